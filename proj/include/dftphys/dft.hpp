#pragma once

// Decision field theory with an external stopping threshold: preference
// moments after tau updating steps and the resulting choice probabilities.

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/error.hpp"
#include "dftphys/normal.hpp"

namespace dftphys {

/// One observed choice: attribute levels of every alternative and the choice made.
struct ChoiceTask {
  Eigen::MatrixXd attributes;  ///< J x K attribute levels, one row per alternative
  int chosen = 0;
  std::string task_id;
  std::string participant_id;

  int alternatives() const { return static_cast<int>(attributes.rows()); }
  int attribute_count() const { return static_cast<int>(attributes.cols()); }

  void validate() const {
    if (alternatives() < 2)
      throw InvalidTaskError(fmt::format("task {}: need at least 2 alternatives, got {}", task_id,
                                         alternatives()));
    if (attribute_count() < 1)
      throw InvalidTaskError(fmt::format("task {}: need at least 1 attribute", task_id));
    if (!attributes.allFinite())
      throw InvalidTaskError(fmt::format("task {}: non-finite attribute level", task_id));
    if (chosen < 0 || chosen >= alternatives())
      throw InvalidTaskError(fmt::format("task {}: chosen index {} outside [0, {})", task_id,
                                         chosen, alternatives()));
  }
};

/// Fully resolved DFT process parameters for one task.
struct DftParams {
  Eigen::VectorXd beta;   ///< attribute scalings (diagonal of the scaling matrix)
  Eigen::VectorXd gamma;  ///< attention-weight logits
  double phi1 = 0.0;      ///< sensitivity
  double phi2 = 0.0;      ///< memory, in [0, 1/J]
  double sigma_eps = 1.0;
  double tau = 1.0;       ///< number of preference updating steps, real-valued
  Eigen::VectorXd p0;     ///< initial preferences, one per alternative

  DftParams() = default;
  DftParams(Eigen::VectorXd beta_, Eigen::VectorXd gamma_, double phi1_, double phi2_,
            double sigma_eps_, double tau_, Eigen::VectorXd p0_)
      : beta(std::move(beta_)), gamma(std::move(gamma_)), phi1(phi1_), phi2(phi2_),
        sigma_eps(sigma_eps_), tau(tau_), p0(std::move(p0_)) {
    validate(true);
  }

  int alternatives() const { return static_cast<int>(p0.size()); }

  /// `allow_zero_noise` admits sigma_eps = 0 for noise-free simulation.
  void validate(bool allow_zero_noise = false) const {
    const int J = alternatives();
    if (beta.size() != gamma.size())
      throw ParameterDomainError("beta and gamma must have one entry per attribute");
    if (!beta.allFinite() || !gamma.allFinite() || !p0.allFinite())
      throw ParameterDomainError("non-finite beta, gamma or p0");
    if (!(phi1 >= 0.0) || !std::isfinite(phi1))
      throw ParameterDomainError(fmt::format("phi1 = {} must be finite and >= 0", phi1));
    if (!(phi2 >= 0.0) || phi2 > 1.0 / J)
      throw ParameterDomainError(fmt::format("phi2 = {} outside [0, 1/J] with J = {}", phi2, J));
    if (!(sigma_eps > 0.0 || (allow_zero_noise && sigma_eps == 0.0)) || !std::isfinite(sigma_eps))
      throw ParameterDomainError(fmt::format("sigma_eps = {} must be finite and > 0", sigma_eps));
    if (!(tau >= 1.0) || !std::isfinite(tau))
      throw ParameterDomainError(fmt::format("tau = {} must be finite and >= 1", tau));
  }
};

struct PreferenceMoments {
  Eigen::VectorXd xi;     ///< E[P_tau]
  Eigen::MatrixXd omega;  ///< Cov[P_tau]
};

struct ValenceMoments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd phi;
};

/// Numerically stable softmax.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

/// Contrast matrix: 1 on the diagonal, -1/(J-1) elsewhere; rows sum to zero.
inline Eigen::MatrixXd contrast_matrix(int J) {
  if (J < 2) throw InvalidTaskError(fmt::format("contrast matrix needs J >= 2, got {}", J));
  const double off = -1.0 / (J - 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(J, J, off);
  c.diagonal().setOnes();
  return c;
}

/// Pairwise Euclidean distances between beta-scaled attribute rows.
inline Eigen::MatrixXd distance_matrix(const ChoiceTask& task, const Eigen::VectorXd& beta) {
  const int J = task.alternatives();
  const Eigen::MatrixXd scaled = task.attributes * beta.asDiagonal();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(J, J);
  for (int i = 0; i < J; ++i)
    for (int j = i + 1; j < J; ++j) d(i, j) = d(j, i) = (scaled.row(i) - scaled.row(j)).norm();
  return d;
}

/// S = I - phi2 * exp(-phi1 * D^2), elementwise exponential.
inline Eigen::MatrixXd feedback_matrix(const Eigen::MatrixXd& distances, double phi1, double phi2) {
  const auto J = distances.rows();
  if (!(phi1 >= 0.0))
    throw ParameterDomainError(fmt::format("phi1 = {} must be >= 0", phi1));
  if (!(phi2 >= 0.0) || phi2 > 1.0 / static_cast<double>(J))
    throw ParameterDomainError(
        fmt::format("phi2 = {} outside [0, 1/J] with J = {}; (I - S) may be non-invertible", phi2, J));
  Eigen::MatrixXd s = -phi2 * (-phi1 * distances.array().square()).exp().matrix();
  s.diagonal().array() += 1.0;
  return s;
}

/// Expectation and covariance of the per-step valence vector.
inline ValenceMoments valence_moments(const ChoiceTask& task, const DftParams& params) {
  const int J = task.alternatives();
  const Eigen::VectorXd w = softmax(params.gamma);
  const Eigen::MatrixXd b = contrast_matrix(J) * task.attributes * params.beta.asDiagonal();
  Eigen::MatrixXd attend = Eigen::MatrixXd(w.asDiagonal()) - w * w.transpose();
  ValenceMoments out;
  out.mu = b * w;
  out.phi = b * attend * b.transpose();
  out.phi.diagonal().array() += params.sigma_eps * params.sigma_eps;
  out.phi = 0.5 * (out.phi + out.phi.transpose()).eval();
  return out;
}

namespace detail {

// sum_{r=0}^{tau-1} ((1-nu_a)(1-nu_b))^r for real tau, stable near nu -> 0.
inline double geometric_factor(double nu_a, double nu_b, double tau) {
  const double one_minus_rho = nu_a + nu_b - nu_a * nu_b;
  if (one_minus_rho <= 0.0) return tau;
  const double log_rho = std::log1p(-nu_a) + std::log1p(-nu_b);
  if (std::isinf(log_rho)) return 1.0 / one_minus_rho;
  return -std::expm1(tau * log_rho) / one_minus_rho;
}

}  // namespace detail

inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kSingularRatio = 1e-12;

/// Moments of P_tau. Real tau is handled in the eigenbasis of the symmetric
/// matrix I - S; S = I (to 1e-12 in the infinity norm) uses the exact limit
/// xi = p0 + tau mu, omega = tau Phi.
inline PreferenceMoments preference_moments(const Eigen::MatrixXd& s, const Eigen::VectorXd& mu,
                                            const Eigen::MatrixXd& phi, const Eigen::VectorXd& p0,
                                            double tau) {
  if (!(tau >= 1.0) || !std::isfinite(tau))
    throw ParameterDomainError(fmt::format("tau = {} must be finite and >= 1", tau));
  const auto J = s.rows();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(J, J) - s;
  const double dev = a.cwiseAbs().rowwise().sum().maxCoeff();
  if (dev < kIdentityTolerance) return {p0 + tau * mu, tau * phi};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  Eigen::VectorXd nu = eig.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
  if (nu.minCoeff() <= kSingularRatio * nu.maxCoeff())
    throw IllConditionedFeedbackError(fmt::format(
        "(I - S) is numerically singular (eigenvalues {:.3g}..{:.3g}); the feedback matrix "
        "built from phi1/phi2 is degenerate, e.g. duplicated alternatives",
        nu.minCoeff(), nu.maxCoeff()));
  const Eigen::MatrixXd& q = eig.eigenvectors();

  Eigen::VectorXd mu_e = q.transpose() * mu;
  Eigen::VectorXd p0_e = q.transpose() * p0;
  Eigen::VectorXd xi_e(J);
  for (Eigen::Index i = 0; i < J; ++i) {
    const double log_lambda = std::log1p(-nu(i));
    const double drift = -std::expm1(tau * log_lambda) / nu(i);
    xi_e(i) = drift * mu_e(i) + std::exp(tau * log_lambda) * p0_e(i);
  }
  Eigen::MatrixXd om = q.transpose() * phi * q;
  for (Eigen::Index i = 0; i < J; ++i)
    for (Eigen::Index j = 0; j < J; ++j) om(i, j) *= detail::geometric_factor(nu(i), nu(j), tau);

  PreferenceMoments out;
  out.xi = q * xi_e;
  out.omega = q * om * q.transpose();
  out.omega = 0.5 * (out.omega + out.omega.transpose()).eval();
  return out;
}

/// Differences P_tau[j] - P_tau[i], i != j: mean Gamma and covariance Lambda.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> difference_moments(
    const PreferenceMoments& m, int j) {
  const auto J = m.xi.size();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(J - 1, J);
  for (Eigen::Index i = 0, row = 0; i < J; ++i) {
    if (i == j) continue;
    l(row, j) = 1.0;
    l(row, i) = -1.0;
    ++row;
  }
  Eigen::MatrixXd lambda = l * m.omega * l.transpose();
  lambda = 0.5 * (lambda + lambda.transpose()).eval();
  return {l * m.xi, lambda};
}

namespace detail {

inline double smallest_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  if (m.rows() == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double disc = std::hypot(m(0, 0) - m(1, 1), 2.0 * m(0, 1));
    return 0.5 * (tr - disc);
  }
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace detail

/// Probability that alternative j has the largest preference at tau.
inline double choice_probability(const PreferenceMoments& m, int j,
                                 const OrthantOptions& opts = {}) {
  const auto J = m.xi.size();
  if (j < 0 || j >= J)
    throw InvalidTaskError(fmt::format("alternative index {} outside [0, {})", j, J));
  auto [gamma, lambda] = difference_moments(m, j);
  const double tr = lambda.trace();
  const double smallest = detail::smallest_eigenvalue(lambda);
  if (!std::isfinite(tr) || !(tr > 0.0) || smallest <= 1e-13 * tr)
    throw DegenerateCovarianceError(
        fmt::format("difference covariance for alternative {} is not positive definite "
                    "(smallest eigenvalue {:.6g})",
                    j, smallest),
        smallest);
  return orthant_probability(gamma, lambda, opts).value;
}

inline Eigen::VectorXd choice_probabilities(const PreferenceMoments& m,
                                            const OrthantOptions& opts = {}) {
  Eigen::VectorXd p(m.xi.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) p(j) = choice_probability(m, static_cast<int>(j), opts);
  return p;
}

/// Valence moments, feedback matrix and preference moments in one go.
inline PreferenceMoments dft_moments(const ChoiceTask& task, const DftParams& params) {
  if (params.alternatives() != task.alternatives() ||
      params.beta.size() != task.attribute_count())
    throw ParameterDomainError(fmt::format("task {}: parameter dimensions do not match {}x{} task",
                                           task.task_id, task.alternatives(),
                                           task.attribute_count()));
  params.validate();
  const ValenceMoments v = valence_moments(task, params);
  const Eigen::MatrixXd s =
      feedback_matrix(distance_matrix(task, params.beta), params.phi1, params.phi2);
  try {
    return preference_moments(s, v.mu, v.phi, params.p0, params.tau);
  } catch (const IllConditionedFeedbackError& e) {
    throw IllConditionedFeedbackError(
        fmt::format("task {}: phi1 = {:.6g}, phi2 = {:.6g}: {}", task.task_id, params.phi1,
                    params.phi2, e.what()));
  }
}

}  // namespace dftphys
