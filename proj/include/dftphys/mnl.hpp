#pragma once

// Multinomial logit: linear-in-parameters utilities and softmax probabilities.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/dataset.hpp"
#include "dftphys/error.hpp"

namespace dftphys {

/// One additive utility term: coefficient * covariate(observation, alternative),
/// applied to the alternatives in `mask` (empty mask = every alternative).
struct UtilityTerm {
  std::string coefficient;
  std::string field;  ///< covariate name, used in diagnostics
  std::function<double(const Observation&, int)> covariate;
  std::vector<int> mask;
  bool constant = false;  ///< alternative-specific constant

  bool applies_to(int alt) const {
    if (mask.empty()) return true;
    for (int m : mask)
      if (m == alt) return true;
    return false;
  }
};

struct UtilitySpec {
  int alternatives = 0;
  std::vector<UtilityTerm> terms;

  /// Distinct coefficient names in first-use order.
  std::vector<std::string> coefficients() const {
    std::vector<std::string> out;
    for (const auto& t : terms)
      if (std::find(out.begin(), out.end(), t.coefficient) == out.end()) out.push_back(t.coefficient);
    return out;
  }

  /// Index of each term's coefficient in `names`; throws if one is missing or
  /// if no alternative is left without a constant.
  std::vector<int> bind(const std::vector<std::string>& names) const {
    std::vector<int> idx;
    for (const auto& t : terms) {
      auto it = std::find(names.begin(), names.end(), t.coefficient);
      if (it == names.end())
        throw SpecError(fmt::format("utility coefficient '{}' not in parameter vector", t.coefficient));
      idx.push_back(static_cast<int>(it - names.begin()));
    }
    bool normalized = false;
    for (int j = 0; j < alternatives && !normalized; ++j) {
      bool has_constant = false;
      for (const auto& t : terms) has_constant = has_constant || (t.constant && t.applies_to(j));
      normalized = !has_constant;
    }
    if (!normalized)
      throw SpecError("every alternative carries a constant; one must be normalized to zero");
    return idx;
  }
};

/// Systematic utility of every alternative.
inline Eigen::VectorXd utility(const Observation& obs, const UtilitySpec& spec,
                               const std::vector<int>& binding, std::span<const double> theta) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(spec.alternatives);
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const auto& term = spec.terms[t];
    const double coef = theta[static_cast<std::size_t>(binding[t])];
    for (int j = 0; j < spec.alternatives; ++j) {
      if (!term.applies_to(j)) continue;
      const double x = term.covariate(obs, j);
      if (std::isnan(x))
        throw DataError(fmt::format("task {} (participant {}): missing covariate '{}'", obs.task_id,
                                    obs.participant_id, term.field));
      u(j) += coef * x;
    }
  }
  return u;
}

/// Softmax with max subtraction.
inline Eigen::VectorXd mnl_probability(const Eigen::VectorXd& utilities) {
  Eigen::VectorXd e = (utilities.array() - utilities.maxCoeff()).exp();
  return e / e.sum();
}

/// Gradient of ln P(chosen) with respect to theta (size n_params).
inline Eigen::VectorXd mnl_log_probability_gradient(const Observation& obs, const UtilitySpec& spec,
                                                    const std::vector<int>& binding,
                                                    std::span<const double> theta) {
  const Eigen::VectorXd p = mnl_probability(utility(obs, spec, binding, theta));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const auto& term = spec.terms[t];
    double expected = 0.0;
    double at_chosen = 0.0;
    for (int j = 0; j < spec.alternatives; ++j) {
      if (!term.applies_to(j)) continue;
      const double x = term.covariate(obs, j);
      expected += p(j) * x;
      if (j == obs.chosen) at_chosen = x;
    }
    g(binding[t]) += at_chosen - expected;
  }
  return g;
}

/// Static design: U_j = sum_k beta_k x_jk, no constants.
inline UtilitySpec static_utility_spec(const std::vector<std::string>& attribute_names, int J) {
  UtilitySpec s;
  s.alternatives = J;
  for (std::size_t k = 0; k < attribute_names.size(); ++k) {
    s.terms.push_back({"beta_" + attribute_names[k], attribute_names[k],
                       [k](const Observation& o, int j) {
                         return o.attributes(j, static_cast<Eigen::Index>(k));
                       },
                       {}, false});
  }
  return s;
}

/// Gap acceptance: accept (alternative 0) utility
///   delta_G + (beta_gap + beta_gapn ln i) x_gapsize + beta_pos x_pos
///   + beta_speed 1[i=1] x_speed + alpha_age z_age + alpha_reg z_reg,
/// reject utility fixed at zero.
inline UtilitySpec gap_utility_spec(const Dataset& d) {
  const int gi = d.require_scalar("gap_index");
  const int gs = d.require_scalar("x_gapsize");
  const int ps = d.require_scalar("x_pos");
  const int sp = d.require_scalar("x_speed");
  const int ag = d.require_scalar("z_age");
  const int rg = d.require_scalar("z_reg");
  auto col = [](int c) {
    return [c](const Observation& o, int) { return o.scalars[static_cast<std::size_t>(c)]; };
  };
  UtilitySpec s;
  s.alternatives = 2;
  const std::vector<int> accept{0};
  s.terms.push_back({"delta_G", "constant", [](const Observation&, int) { return 1.0; }, accept, true});
  s.terms.push_back({"beta_gap", "x_gapsize", col(gs), accept, false});
  s.terms.push_back({"beta_gapn", "ln(gap_index)*x_gapsize",
                     [gi, gs](const Observation& o, int) {
                       return std::log(o.scalars[static_cast<std::size_t>(gi)]) *
                              o.scalars[static_cast<std::size_t>(gs)];
                     },
                     accept, false});
  s.terms.push_back({"beta_pos", "x_pos", col(ps), accept, false});
  s.terms.push_back({"beta_speed", "1[gap_index=1]*x_speed",
                     [gi, sp](const Observation& o, int) {
                       const double i = o.scalars[static_cast<std::size_t>(gi)];
                       const double x = o.scalars[static_cast<std::size_t>(sp)];
                       if (std::isnan(i)) return i;
                       return i == 1.0 ? x : 0.0;
                     },
                     accept, false});
  s.terms.push_back({"alpha_age", "z_age", col(ag), accept, false});
  s.terms.push_back({"alpha_reg", "z_reg", col(rg), accept, false});
  return s;
}

}  // namespace dftphys
