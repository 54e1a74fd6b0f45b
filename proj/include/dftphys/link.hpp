#pragma once

// Physiological linking: turns per-observation eye-tracking and stress features
// into the parameters of a DFT or logit model.

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/dataset.hpp"
#include "dftphys/dft.hpp"
#include "dftphys/error.hpp"
#include "dftphys/params.hpp"

namespace dftphys {

// ---------------------------------------------------------------------------
// Elementary link functions

namespace detail {

inline void check_shares(const Eigen::VectorXd& shares, Eigen::Index k, const char* what) {
  if (shares.size() != k)
    throw SpecError(fmt::format("{} has {} entries, expected {}", what, shares.size(), k));
  if ((shares.array() < 0.0).any() || (shares.array() > 1.0).any() ||
      std::abs(shares.sum() - 1.0) > 1e-9)
    throw DataError(fmt::format("{} must lie in [0,1] and sum to 1 (sum = {:.12g})", what,
                                shares.sum()));
}

}  // namespace detail

/// gamma[k] + counts[k] * alpha_count + times[k] * alpha_time.
inline Eigen::VectorXd gaze_adjusted_logits(const Eigen::VectorXd& gamma,
                                            const Eigen::VectorXd& counts,
                                            const Eigen::VectorXd& times, double alpha_count,
                                            double alpha_time) {
  detail::check_shares(counts, gamma.size(), "fixation count shares");
  detail::check_shares(times, gamma.size(), "viewing time shares");
  return gamma + alpha_count * counts + alpha_time * times;
}

/// beta[k] + counts[k] * alpha_count.
inline Eigen::VectorXd gaze_adjusted_scalings(const Eigen::VectorXd& beta,
                                              const Eigen::VectorXd& counts, double alpha_count) {
  detail::check_shares(counts, beta.size(), "fixation count shares");
  return beta + alpha_count * counts;
}

/// Total stress: delta_stress x_scen + alpha_hr z_hr + alpha_scr z_scr.
inline double stress_index(double x_scen, double z_hr, double z_scr, double delta_stress,
                           double alpha_hr, double alpha_scr) {
  return delta_stress * x_scen + alpha_hr * z_hr + alpha_scr * z_scr;
}

/// Process-noise standard deviation exp(alpha_stress).
inline double stress_noise(double alpha_stress) {
  if (!std::isfinite(alpha_stress) || alpha_stress > 700.0)
    throw ParameterDomainError(
        fmt::format("stress index {} overflows the process-noise link", alpha_stress));
  return std::exp(alpha_stress);
}

/// Total gaze measure: y_left a_left + y_yaw_sd a_yaw + y_pitch_sd a_pitch.
inline double gaze_total(double y_left, double y_yaw_sd, double y_pitch_sd,
                         const std::array<double, 3>& alphas) {
  return y_left * alphas[0] + y_yaw_sd * alphas[1] + y_pitch_sd * alphas[2];
}

/// Gap-task attention weights (gap, position, other factors) =
/// (e^a, 1, 1) / (2 + e^a), evaluated as a softmax of (a, 0, 0).
inline Eigen::Vector3d gap_attention_weights(double alpha_gaze) {
  Eigen::Vector3d w;
  if (alpha_gaze > 0.0) {
    const double e = std::exp(-alpha_gaze);
    w << 1.0 / (1.0 + 2.0 * e), e / (1.0 + 2.0 * e), e / (1.0 + 2.0 * e);
  } else {
    const double e = std::exp(alpha_gaze);
    w << e / (2.0 + e), 1.0 / (2.0 + e), 1.0 / (2.0 + e);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Declarative link specification

enum class LinkTarget { AttentionLogits, Scalings, InitialPreference, ProcessNoise, GapAttentionWeight };

inline const char* to_string(LinkTarget t) {
  switch (t) {
    case LinkTarget::AttentionLogits: return "attention_logits";
    case LinkTarget::Scalings: return "scalings";
    case LinkTarget::InitialPreference: return "initial_preference";
    case LinkTarget::ProcessNoise: return "process_noise";
    case LinkTarget::GapAttentionWeight: return "gap_attention_weight";
  }
  return "?";
}

inline LinkTarget parse_link_target(const std::string& s) {
  for (auto t : {LinkTarget::AttentionLogits, LinkTarget::Scalings, LinkTarget::InitialPreference,
                 LinkTarget::ProcessNoise, LinkTarget::GapAttentionWeight})
    if (s == to_string(t)) return t;
  throw SpecError(fmt::format("unknown link target '{}'", s));
}

/// feature * coefficient added to `target`.
struct LinkTerm {
  LinkTarget target;
  std::string feature;
  std::string coefficient;
};

struct LinkSpec {
  std::vector<LinkTerm> terms;
  /// Allow a process-noise link even when sigma_eps is fixed by the
  /// two-alternative identification convention.
  bool override_fixed_noise = false;

  bool empty() const { return terms.empty(); }

  void validate() const {
    for (std::size_t i = 0; i < terms.size(); ++i)
      for (std::size_t j = i + 1; j < terms.size(); ++j)
        if (terms[i].target == terms[j].target && terms[i].feature == terms[j].feature)
          throw SpecError(fmt::format("link ({}, {}) appears twice", to_string(terms[i].target),
                                      terms[i].feature));
  }
};

enum class BaseKind { StaticMnl, GapMnl, StaticDft, GapDft };

inline bool is_dft(BaseKind b) { return b == BaseKind::StaticDft || b == BaseKind::GapDft; }

// ---------------------------------------------------------------------------
// Per-observation resolution

/// Compiled link + parameter layout for one (base model, dataset) pair.
/// Resolution is a pure function of (observation, theta).
class Resolver {
public:
  Resolver(BaseKind base, const LinkSpec& link, const ParamSpace& space, const Dataset& data)
      : base_(base), alternatives_(data.alternatives) {
    link.validate();
    const bool is_static = base == BaseKind::StaticMnl || base == BaseKind::StaticDft;
    if (is_static != (data.application == Application::Static))
      throw SpecError(fmt::format("model expects {} data, dataset is {}",
                                  is_static ? "static" : "gap", to_string(data.application)));
    attributes_ = is_static ? data.attribute_count() : 3;

    if (is_static) {
      for (const auto& a : data.attribute_names) beta_.push_back(space.require("beta_" + a));
      if (base == BaseKind::StaticDft)
        for (const auto& a : data.attribute_names) gamma_.push_back(space.require("gamma_" + a));
    } else {
      delta_g_ = space.require("delta_G");
      beta_gap_ = space.require("beta_gap");
      beta_gapn_ = space.require("beta_gapn");
      beta_speed_ = space.require("beta_speed");
      beta_pos_ = space.require("beta_pos");
      alpha_age_ = space.require("alpha_age");
      alpha_reg_ = space.require("alpha_reg");
      if (base == BaseKind::GapDft) delta_bias_ = space.require("delta_bias");
      col_gap_index_ = data.require_scalar("gap_index");
      col_gapsize_ = data.require_scalar("x_gapsize");
      col_pos_ = data.require_scalar("x_pos");
      col_speed_ = data.require_scalar("x_speed");
      col_age_ = data.require_scalar("z_age");
      col_reg_ = data.require_scalar("z_reg");
    }
    if (is_dft(base)) {
      phi1_ = space.require("phi1");
      phi2_ = space.require("phi2");
      sigma_ = space.require("sigma_eps");
      tau_ = space.require("tau");
    }

    for (const auto& t : link.terms) {
      Compiled c{t.target, false, 0, space.require(t.coefficient), t.feature};
      if (auto v = data.vector_index(t.feature)) {
        c.vector_feature = true;
        c.feature = *v;
      } else if (auto s = data.scalar_index(t.feature)) {
        c.feature = *s;
      } else {
        throw SpecError(fmt::format("link feature '{}' is not in the dataset", t.feature));
      }
      check_target(c, space, link);
      terms_.push_back(c);
    }
  }

  BaseKind base() const { return base_; }

  /// Task (attribute matrix) and fully resolved DFT parameters for one observation.
  std::pair<ChoiceTask, DftParams> resolve_dft(const Observation& o,
                                               std::span<const double> theta) const {
    ChoiceTask task;
    task.chosen = o.chosen;
    task.task_id = o.task_id;
    task.participant_id = o.participant_id;
    DftParams p;
    p.phi1 = theta[phi1_];
    p.phi2 = theta[phi2_];
    p.sigma_eps = theta[sigma_];
    p.tau = theta[tau_];
    p.p0 = Eigen::VectorXd::Zero(alternatives_);

    if (base_ == BaseKind::StaticDft) {
      task.attributes = o.attributes;
      p.beta.resize(attributes_);
      p.gamma.resize(attributes_);
      for (int k = 0; k < attributes_; ++k) {
        p.beta(k) = theta[beta_[static_cast<std::size_t>(k)]];
        p.gamma(k) = theta[gamma_[static_cast<std::size_t>(k)]];
      }
    } else {
      const double i = scalar(o, col_gap_index_, "gap_index");
      const double gap = scalar(o, col_gapsize_, "x_gapsize");
      const double pos = scalar(o, col_pos_, "x_pos");
      const double speed = i == 1.0 ? scalar(o, col_speed_, "x_speed") : 0.0;
      task.attributes.resize(2, 3);
      task.attributes << gap, pos, 1.0, 0.0, 0.0, 0.0;
      p.beta.resize(3);
      p.beta << theta[beta_gap_] + theta[beta_gapn_] * std::log(i), theta[beta_pos_],
          theta[delta_bias_] + theta[beta_speed_] * speed +
              theta[alpha_age_] * scalar(o, col_age_, "z_age") +
              theta[alpha_reg_] * scalar(o, col_reg_, "z_reg");
      p.gamma = Eigen::VectorXd::Zero(3);
      p.p0(0) = theta[delta_g_];
    }

    double noise_index = 0.0;
    for (const auto& t : terms_) {
      const double coef = theta[t.coefficient];
      switch (t.target) {
        case LinkTarget::AttentionLogits: p.gamma += coef * shares(o, t); break;
        case LinkTarget::Scalings:
          if (t.vector_feature)
            p.beta += coef * shares(o, t);
          else
            p.beta(0) += coef * scalar(o, t.feature, t.name);
          break;
        case LinkTarget::InitialPreference: p.p0(0) += coef * scalar(o, t.feature, t.name); break;
        case LinkTarget::ProcessNoise: noise_index += coef * scalar(o, t.feature, t.name); break;
        case LinkTarget::GapAttentionWeight: p.gamma(0) += coef * scalar(o, t.feature, t.name); break;
      }
    }
    if (noise_index != 0.0) p.sigma_eps *= stress_noise(noise_index);
    p.validate();
    return {std::move(task), std::move(p)};
  }

  /// Copy of theta with the utility coefficients adjusted for this observation.
  Eigen::VectorXd resolve_mnl(const Observation& o, std::span<const double> theta) const {
    Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(theta.data(),
                                                            static_cast<Eigen::Index>(theta.size()));
    for (const auto& t : terms_) {
      const double coef = theta[t.coefficient];
      if (t.target == LinkTarget::Scalings) {
        const Eigen::VectorXd s = shares(o, t);
        for (int k = 0; k < attributes_; ++k)
          out(static_cast<Eigen::Index>(beta_[static_cast<std::size_t>(k)])) += coef * s(k);
      } else {  // InitialPreference
        out(static_cast<Eigen::Index>(delta_g_)) += coef * scalar(o, t.feature, t.name);
      }
    }
    return out;
  }

private:
  struct Compiled {
    LinkTarget target;
    bool vector_feature;
    int feature;
    std::size_t coefficient;
    std::string name;
  };

  void check_target(const Compiled& c, const ParamSpace& space, const LinkSpec& link) const {
    auto reject = [&](const char* why) {
      throw SpecError(fmt::format("link target {} (feature '{}') {}", to_string(c.target), c.name, why));
    };
    const bool vec = c.vector_feature;
    switch (c.target) {
      case LinkTarget::AttentionLogits:
        if (base_ != BaseKind::StaticDft) reject("needs a static DFT base");
        if (!vec) reject("needs a per-attribute share feature");
        break;
      case LinkTarget::Scalings:
        if (base_ == BaseKind::GapMnl) reject("is not defined for the gap logit model");
        if ((base_ == BaseKind::GapDft) == vec)
          reject(vec ? "needs a scalar feature on gap data" : "needs a per-attribute share feature");
        break;
      case LinkTarget::InitialPreference:
        if (base_ != BaseKind::GapDft && base_ != BaseKind::GapMnl)
          reject("needs a base with an initial preference / constant (gap models)");
        if (vec) reject("needs a scalar feature");
        break;
      case LinkTarget::ProcessNoise:
        if (!is_dft(base_)) reject("needs a DFT base");
        if (vec) reject("needs a scalar feature");
        if (base_ == BaseKind::GapDft && space[sigma_].fixed && !link.override_fixed_noise)
          reject("is absent from the variant: sigma_eps is fixed by the two-alternative "
                 "convention (set override_fixed_noise to link it)");
        break;
      case LinkTarget::GapAttentionWeight:
        if (base_ != BaseKind::GapDft) reject("needs the gap DFT base");
        if (vec) reject("needs a scalar feature");
        break;
    }
  }

  static double scalar(const Observation& o, int col, const std::string& name) {
    const double v = o.scalars[static_cast<std::size_t>(col)];
    if (std::isnan(v))
      throw DataError(fmt::format("task {} (participant {}): missing value for '{}'", o.task_id,
                                  o.participant_id, name));
    return v;
  }

  Eigen::VectorXd shares(const Observation& o, const Compiled& t) const {
    const Eigen::VectorXd& s = o.shares[static_cast<std::size_t>(t.feature)];
    if (!s.allFinite())
      throw DataError(fmt::format("task {} (participant {}): missing '{}' shares", o.task_id,
                                  o.participant_id, t.name));
    return s;
  }

  BaseKind base_;
  int alternatives_;
  int attributes_ = 0;
  std::vector<std::size_t> beta_, gamma_;
  std::size_t delta_g_ = 0, beta_gap_ = 0, beta_gapn_ = 0, beta_speed_ = 0, beta_pos_ = 0,
              alpha_age_ = 0, alpha_reg_ = 0, delta_bias_ = 0;
  std::size_t phi1_ = 0, phi2_ = 0, sigma_ = 0, tau_ = 0;
  int col_gap_index_ = -1, col_gapsize_ = -1, col_pos_ = -1, col_speed_ = -1, col_age_ = -1,
      col_reg_ = -1;
  std::vector<Compiled> terms_;
};

/// Checks that every present share vector lies on the simplex.
inline void validate_share_features(const Dataset& d) {
  for (const auto& o : d.rows)
    for (std::size_t v = 0; v < o.shares.size(); ++v) {
      if (!o.shares[v].allFinite()) continue;
      try {
        detail::check_shares(o.shares[v], d.attribute_count(), d.vector_names[v].c_str());
      } catch (const Error& e) {
        throw DataError(fmt::format("task {} (participant {}): {}", o.task_id, o.participant_id,
                                    e.what()));
      }
    }
}

}  // namespace dftphys
