#pragma once

// Maximum-likelihood estimation, clustered sandwich covariance and fit statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/error.hpp"
#include "dftphys/model.hpp"
#include "dftphys/optimize.hpp"
#include "dftphys/parallel.hpp"

namespace dftphys {

inline constexpr double kProbabilityFloor = 1e-300;

namespace detail {

// Re-raises the active exception with `ctx` prepended, keeping its type.
[[noreturn]] inline void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const DegenerateCovarianceError& e) {
    throw DegenerateCovarianceError(ctx + ": " + e.what(), e.smallest_eigenvalue());
  } catch (const AccuracyError& e) {
    throw AccuracyError(ctx + ": " + e.what(), e.achieved_error());
  } catch (const IllConditionedFeedbackError& e) {
    throw IllConditionedFeedbackError(ctx + ": " + e.what());
  } catch (const ParameterDomainError& e) {
    throw ParameterDomainError(ctx + ": " + e.what());
  } catch (const InvalidTaskError& e) {
    throw InvalidTaskError(ctx + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(ctx + ": " + e.what());
  } catch (const SpecError& e) {
    throw SpecError(ctx + ": " + e.what());
  }
}

}  // namespace detail

/// Per-observation ln P(chosen), in observation order.
struct Contributions {
  Eigen::VectorXd values;
  std::size_t floored = 0;  ///< probabilities raised to the floor
  double sum() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) s += values(i);
    return s;
  }
};

inline Contributions log_likelihood_contributions(const Model& model, const Eigen::VectorXd& theta,
                                                  int workers = 1) {
  const std::size_t n = model.size();
  Contributions c;
  c.values.resize(static_cast<Eigen::Index>(n));
  std::vector<char> floored(n, 0);
  const auto th = as_span(theta);
  parallel_for(n, workers, [&](std::size_t i) {
    double p;
    try {
      p = model.chosen_probability(i, th);
    } catch (const Error&) {
      const Observation& o = model.data().rows[i];
      detail::rethrow_with_context(
          fmt::format("observation {} (task {}, participant {})", i, o.task_id, o.participant_id));
    }
    if (!(p > kProbabilityFloor)) {
      p = kProbabilityFloor;
      floored[i] = 1;
    }
    c.values(static_cast<Eigen::Index>(i)) = std::log(p);
  });
  for (char f : floored) c.floored += static_cast<std::size_t>(f);
  return c;
}

/// Sum of ln P(chosen) over the dataset; summed in observation order.
inline double log_likelihood(const Model& model, const Eigen::VectorXd& theta, int workers = 1) {
  return log_likelihood_contributions(model, theta, workers).sum();
}

struct FitStats {
  double adj_rho2 = 0.0;
  double bic = 0.0;
};

inline FitStats fit_stats(double ll, double ll0, int k, std::size_t n) {
  return {1.0 - (ll - k) / ll0, -2.0 * ll + k * std::log(static_cast<double>(n))};
}

/// Upper-tail chi-square p-value of 2 (LL_full - LL_restricted).
inline double lr_test(double ll_restricted, double ll_full, int df) {
  if (df < 1) throw SpecError(fmt::format("likelihood ratio test needs df >= 1, got {}", df));
  const double stat = 2.0 * (ll_full - ll_restricted);
  if (stat < -2e-9)
    throw OrderingError(fmt::format("restricted LL {} exceeds full LL {}; arguments swapped?",
                                    ll_restricted, ll_full));
  if (stat <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * stat);
}

struct RobustCovariance {
  std::vector<std::size_t> free;  ///< parameter indices, in order
  Eigen::MatrixXd hessian;        ///< of -LL in transformed coordinates
  Eigen::MatrixXd meat;           ///< sum over clusters of score outer products
  Eigen::MatrixXd transformed;    ///< sandwich in transformed coordinates
  Eigen::MatrixXd natural;        ///< delta-method covariance of the natural parameters
  std::size_t clusters = 0;
};

/// Participant-clustered sandwich covariance H^-1 B H^-1 at theta_hat.
/// Scores and Hessian come from central differences in the optimizer's
/// coordinates; the result is mapped to natural parameters by the delta method.
inline RobustCovariance robust_covariance(const Model& model, const Eigen::VectorXd& theta_hat,
                                          int workers = 1, double rel_step = 1e-4) {
  const ParamSpace& space = model.space();
  RobustCovariance rc;
  rc.free = space.free_indices();
  const auto k = static_cast<Eigen::Index>(rc.free.size());
  const Eigen::VectorXd u = space.contract(theta_hat);
  auto contrib = [&](const Eigen::VectorXd& uu) {
    Contributions c = log_likelihood_contributions(model, space.expand(uu, theta_hat), workers);
    if (!c.values.allFinite()) throw SingularHessianError("log-likelihood not finite near the estimate");
    return c.values;
  };

  const std::size_t n = model.size();
  const Eigen::VectorXd c0 = contrib(u);
  const double f0 = -c0.sum();
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), k);
  rc.hessian.resize(k, k);
  std::vector<double> h(static_cast<std::size_t>(k));
  Eigen::VectorXd uu = u;
  for (Eigen::Index i = 0; i < k; ++i) {
    h[static_cast<std::size_t>(i)] = fd_step(u(i), rel_step);
    const double hi = h[static_cast<std::size_t>(i)];
    uu(i) = u(i) + hi;
    const Eigen::VectorXd cp = contrib(uu);
    uu(i) = u(i) - hi;
    const Eigen::VectorXd cm = contrib(uu);
    uu(i) = u(i);
    scores.col(i) = (cp - cm) / (2.0 * hi);
    rc.hessian(i, i) = (-cp.sum() - 2.0 * f0 - cm.sum()) / (hi * hi);
  }
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hi = h[static_cast<std::size_t>(i)];
      const double hj = h[static_cast<std::size_t>(j)];
      double acc = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          uu(i) = u(i) + si * hi;
          uu(j) = u(j) + sj * hj;
          acc -= si * sj * contrib(uu).sum();
        }
      uu(i) = u(i);
      uu(j) = u(j);
      rc.hessian(i, j) = rc.hessian(j, i) = acc / (4.0 * hi * hj);
    }

  // Cluster score sums, clusters in order of first appearance.
  std::map<std::string, Eigen::Index> cluster_of;
  std::vector<Eigen::VectorXd> sums;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& id = model.data().rows[r].participant_id;
    auto [it, inserted] = cluster_of.emplace(id, static_cast<Eigen::Index>(sums.size()));
    if (inserted) sums.push_back(Eigen::VectorXd::Zero(k));
    sums[static_cast<std::size_t>(it->second)] += scores.row(static_cast<Eigen::Index>(r)).transpose();
  }
  rc.clusters = sums.size();
  rc.meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& s : sums) rc.meat += s * s.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rc.hessian);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  std::vector<std::string> null_dirs;
  for (Eigen::Index e = 0; e < k; ++e) {
    if (ev(e) > 1e-10 * scale && scale > 0.0) continue;
    std::vector<std::string> parts;
    const Eigen::VectorXd v = eig.eigenvectors().col(e);
    for (Eigen::Index i = 0; i < k; ++i)
      if (std::abs(v(i)) > 0.1)
        parts.push_back(fmt::format("{:+.3f}*{}", v(i), space[rc.free[static_cast<std::size_t>(i)]].name));
    null_dirs.push_back(fmt::format("[eigenvalue {:.3g}: {}]", ev(e), fmt::join(parts, " ")));
  }
  if (!null_dirs.empty())
    throw SingularHessianError(fmt::format("Hessian is singular or indefinite; null directions: {}",
                                           fmt::join(null_dirs, ", ")));

  const Eigen::MatrixXd hinv =
      eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  rc.transformed = hinv * rc.meat * hinv;
  rc.transformed = 0.5 * (rc.transformed + rc.transformed.transpose()).eval();
  Eigen::VectorXd jac(k);
  for (Eigen::Index i = 0; i < k; ++i) jac(i) = space[rc.free[static_cast<std::size_t>(i)]].derivative(u(i));
  rc.natural = jac.asDiagonal() * rc.transformed * jac.asDiagonal();
  return rc;
}

struct FitResult {
  std::string variant;
  std::vector<std::string> names;
  std::vector<bool> fixed;
  Eigen::VectorXd theta;      ///< natural scale, every parameter
  Eigen::VectorXd std_error;  ///< robust; NaN for fixed parameters or failed inference
  Eigen::VectorXd t_ratio;
  Eigen::MatrixXd covariance;  ///< natural scale, free parameters only
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  int k = 0;
  std::size_t n = 0;
  double adj_rho2 = 0.0;
  double bic = 0.0;
  bool converged = false;
  std::string convergence_reason;
  int iterations = 0;
  double gradient_norm = 0.0;  ///< max |g| in transformed coordinates
  bool inference_ok = false;
  std::size_t floored = 0;
  std::vector<std::string> warnings;
};

struct EstimateOptions {
  int workers = 1;
  BfgsOptions bfgs;
  bool robust = true;
  double hessian_step = 1e-4;
};

inline FitResult estimate(const Model& model, const EstimateOptions& opts = {}) {
  const ParamSpace& space = model.space();
  const Eigen::VectorXd theta0 = space.starts();
  const Eigen::VectorXd u0 = space.contract(theta0);

  FitResult r;
  r.variant = model.variant().name;
  r.names = space.names();
  for (const auto& d : space.defs()) r.fixed.push_back(d.fixed);
  r.n = model.size();
  r.k = static_cast<int>(space.free_count());
  r.null_log_likelihood = model.data().null_log_likelihood();

  double ll_start;
  try {
    ll_start = log_likelihood(model, theta0, opts.workers);
  } catch (const Error& e) {
    throw StartValueError(fmt::format("log-likelihood cannot be evaluated at the starting values: {}", e.what()));
  }
  if (!std::isfinite(ll_start))
    throw StartValueError(fmt::format("log-likelihood is {} at the starting values", ll_start));

  Objective f = [&](const Eigen::VectorXd& u) {
    try {
      return -log_likelihood(model, space.expand(u, theta0), opts.workers);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const BfgsResult opt = bfgs_minimize(f, u0, opts.bfgs);
  r.theta = space.expand(opt.x, theta0);
  r.converged = opt.converged;
  r.convergence_reason = opt.reason;
  r.iterations = opt.iterations;
  r.gradient_norm = opt.gradient_norm();
  const Contributions c = log_likelihood_contributions(model, r.theta, opts.workers);
  r.log_likelihood = c.sum();
  r.floored = c.floored;
  if (c.floored)
    r.warnings.push_back(fmt::format("{} chosen probabilities floored at {:g}", c.floored, kProbabilityFloor));
  if (!r.converged)
    r.warnings.push_back(fmt::format("optimizer did not converge ({} after {} iterations, max|g| = {:.3g})",
                                     r.convergence_reason, r.iterations, r.gradient_norm));
  const FitStats fs = fit_stats(r.log_likelihood, r.null_log_likelihood, r.k, r.n);
  r.adj_rho2 = fs.adj_rho2;
  r.bic = fs.bic;

  const auto nan = std::numeric_limits<double>::quiet_NaN();
  r.std_error = Eigen::VectorXd::Constant(r.theta.size(), nan);
  r.t_ratio = Eigen::VectorXd::Constant(r.theta.size(), nan);
  r.covariance = Eigen::MatrixXd::Constant(r.k, r.k, nan);
  if (opts.robust && r.k > 0) {
    try {
      const RobustCovariance rc = robust_covariance(model, r.theta, opts.workers, opts.hessian_step);
      r.covariance = rc.natural;
      for (std::size_t i = 0; i < rc.free.size(); ++i) {
        const auto p = static_cast<Eigen::Index>(rc.free[i]);
        const double var = rc.natural(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        r.std_error(p) = std::sqrt(std::max(0.0, var));
        r.t_ratio(p) = r.theta(p) / r.std_error(p);
      }
      r.inference_ok = true;
    } catch (const SingularHessianError& e) {
      r.warnings.push_back(std::string("inference degraded: ") + e.what());
    }
  } else if (r.k == 0) {
    r.inference_ok = true;
  }
  return r;
}

}  // namespace dftphys
