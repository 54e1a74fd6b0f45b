#pragma once

// BFGS minimization with central-difference gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace dftphys {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BfgsOptions {
  double gradient_tol = 1e-5;  ///< on max |g|
  double step_tol = 1e-10;     ///< on max |dx_i| / max(1, |x_i|)
  int max_iterations = 500;
  double fd_step = 1e-6;       ///< relative central-difference step
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::string reason;  ///< "gradient", "step", "max_iterations" or "no_descent"
  double gradient_norm() const { return gradient.size() ? gradient.cwiseAbs().maxCoeff() : 0.0; }
};

inline double fd_step(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

/// Central-difference gradient; falls back to a one-sided difference when one
/// side is not finite.
inline Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                                        double rel = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x(i), rel);
    y(i) = x(i) + h;
    const double fp = f(y);
    y(i) = x(i) - h;
    const double fm = f(y);
    y(i) = x(i);
    if (std::isfinite(fp) && std::isfinite(fm))
      g(i) = (fp - fm) / (2.0 * h);
    else if (std::isfinite(fp))
      g(i) = (fp - fx) / h;
    else if (std::isfinite(fm))
      g(i) = (fx - fm) / h;
    else
      g(i) = std::numeric_limits<double>::quiet_NaN();
  }
  return g;
}

/// Second-difference Hessian, symmetric by construction.
inline Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel = 1e-4) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  const double f0 = f(x);
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = fd_step(x(i), rel);
    y(i) = x(i) + hi;
    const double fp = f(y);
    y(i) = x(i) - hi;
    const double fm = f(y);
    y(i) = x(i);
    h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = fd_step(x(j), rel);
      double acc = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          y(i) = x(i) + si * hi;
          y(j) = x(j) + sj * hj;
          acc += si * sj * f(y);
        }
      y(i) = x(i);
      y(j) = x(j);
      h(i, j) = h(j, i) = acc / (4.0 * hi * hj);
    }
  }
  return h;
}

/// Minimizes f from x0. Non-finite objective values are treated as +inf so the
/// line search backs away from them.
inline BfgsResult bfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0,
                                const BfgsOptions& opts = {}) {
  auto f = [&](const Eigen::VectorXd& x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  const Eigen::Index n = x0.size();
  BfgsResult r;
  r.x = x0;
  r.f = f(x0);
  if (n == 0) {
    r.converged = true;
    r.reason = "gradient";
    r.gradient = Eigen::VectorXd(0);
    return r;
  }
  r.gradient = numeric_gradient(f, r.x, r.f, opts.fd_step);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  auto step_small = [&](const Eigen::VectorXd& step, const Eigen::VectorXd& at) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(step(i)) / std::max(1.0, std::abs(at(i))) >= opts.step_tol) return false;
    return true;
  };

  for (r.iterations = 0; r.iterations < opts.max_iterations; ++r.iterations) {
    if (!r.gradient.allFinite()) {
      r.reason = "no_descent";
      return r;
    }
    if (r.gradient_norm() < opts.gradient_tol) {
      r.converged = true;
      r.reason = "gradient";
      return r;
    }
    Eigen::VectorXd d = -hinv * r.gradient;
    if (r.gradient.dot(d) >= 0.0) {
      hinv.setIdentity();
      scaled = false;
      d = -r.gradient;
    }
    // Unscaled steepest descent: trial step of unit length at most.
    if (!scaled) d /= std::max(1.0, d.cwiseAbs().maxCoeff());
    // Armijo backtracking.
    const double slope = r.gradient.dot(d);
    double alpha = 1.0;
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (;;) {
      const Eigen::VectorXd s = alpha * d;
      if (step_small(s, r.x)) break;
      x_new = r.x + s;
      f_new = f(x_new);
      if (f_new <= r.f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      r.converged = true;
      r.reason = "step";
      return r;
    }
    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd g_new = numeric_gradient(f, x_new, f_new, opts.fd_step);
    const Eigen::VectorXd y = g_new - r.gradient;
    r.x = x_new;
    r.f = f_new;
    r.gradient = g_new;
    if (step_small(s, r.x) && g_new.allFinite() && r.gradient_norm() >= opts.gradient_tol) {
      r.converged = true;
      r.reason = "step";
      ++r.iterations;
      return r;
    }
    const double sy = s.dot(y);
    if (y.allFinite() && sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      hinv = (id - rho * s * y.transpose()) * hinv * (id - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
  }
  r.reason = "max_iterations";
  r.converged = r.gradient.allFinite() && r.gradient_norm() < opts.gradient_tol;
  return r;
}

}  // namespace dftphys
