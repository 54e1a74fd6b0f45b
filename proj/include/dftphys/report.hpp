#pragma once

// Human-readable and machine-readable renderings of estimation results.

#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "dftphys/csv.hpp"
#include "dftphys/dataset.hpp"
#include "dftphys/estimation.hpp"
#include "dftphys/model.hpp"

namespace dftphys {

/// Six significant digits; blank for missing values.
inline std::string format6(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{:.6g}", v);
}

inline void write_parameter_table(const FitResult& r, std::ostream& out) {
  out << fmt::format("Model: {}\n", r.variant);
  out << fmt::format("{:<28}{:>14}\n", "Log-likelihood(null)", format6(r.null_log_likelihood));
  out << fmt::format("{:<28}{:>14}\n", "Log-likelihood", format6(r.log_likelihood));
  out << fmt::format("{:<28}{:>14}\n", "Estimated parameters", r.k);
  out << fmt::format("{:<28}{:>14}\n", "Observations", r.n);
  out << fmt::format("{:<28}{:>14}\n", "Adj. rho2", format6(r.adj_rho2));
  out << fmt::format("{:<28}{:>14}\n", "BIC", format6(r.bic));
  out << fmt::format("{:<28}{:>14}\n", "Converged",
                     r.converged ? fmt::format("yes ({})", r.convergence_reason) : "NO");
  out << '\n';
  out << fmt::format("{:<24}{:>14}{:>14}\n", "parameter", "est.", "rob. t-rat.");
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto p = static_cast<Eigen::Index>(i);
    const std::string t = r.fixed[i] ? "fixed" : (std::isnan(r.t_ratio(p)) ? "n/a" : format6(r.t_ratio(p)));
    out << fmt::format("{:<24}{:>14}{:>14}\n", r.names[i], format6(r.theta(p)), t);
  }
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

inline nlohmann::json fit_json(const FitResult& r) {
  nlohmann::json j;
  j["variant"] = r.variant;
  j["log_likelihood"] = r.log_likelihood;
  j["null_log_likelihood"] = r.null_log_likelihood;
  j["k"] = r.k;
  j["n"] = r.n;
  j["adj_rho2"] = r.adj_rho2;
  j["bic"] = r.bic;
  j["converged"] = r.converged;
  j["convergence_reason"] = r.convergence_reason;
  j["iterations"] = r.iterations;
  j["gradient_norm"] = r.gradient_norm;
  j["inference_ok"] = r.inference_ok;
  j["floored_probabilities"] = r.floored;
  j["warnings"] = r.warnings;
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto p = static_cast<Eigen::Index>(i);
    params.push_back({{"name", r.names[i]},
                      {"estimate", r.theta(p)},
                      {"fixed", static_cast<bool>(r.fixed[i])},
                      {"robust_se", num(r.std_error(p))},
                      {"robust_t", num(r.t_ratio(p))}});
  }
  j["parameters"] = params;
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index a = 0; a < r.covariance.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index b = 0; b < r.covariance.cols(); ++b) row.push_back(num(r.covariance(a, b)));
    cov.push_back(row);
  }
  j["robust_covariance"] = cov;
  return j;
}

/// One row per observation: probabilities of every alternative and of the choice.
inline void write_probabilities(const Model& model, const Eigen::VectorXd& theta, std::ostream& out,
                                int workers = 1) {
  const Dataset& d = model.data();
  std::vector<Eigen::VectorXd> probs(d.size());
  parallel_for(d.size(), workers, [&](std::size_t i) { probs[i] = model.probabilities(i, as_span(theta)); });
  CsvWriter w(out);
  std::vector<std::string> header{"participant_id", "task_id", "chosen"};
  for (int j = 0; j < d.alternatives; ++j) header.push_back(fmt::format("p_{}", j));
  header.push_back("p_chosen");
  w.row(header);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& o = d.rows[i];
    std::vector<std::string> cells{o.participant_id, o.task_id, std::to_string(o.chosen)};
    for (Eigen::Index j = 0; j < probs[i].size(); ++j) cells.push_back(format_full(probs[i](j)));
    cells.push_back(format_full(probs[i](o.chosen)));
    w.row(cells);
  }
}

}  // namespace dftphys
