#include <cmath>

#include <gtest/gtest.h>

#include "dftphys/estimation.hpp"
#include "dftphys/simulate.hpp"

using namespace dftphys;

namespace {

Dataset static_data(std::size_t n, std::uint64_t seed, const Variant& v, const Eigen::VectorXd& theta) {
  Design d;
  d.features = false;
  return generate_dataset(d, v, theta, n, seed);
}

}  // namespace

TEST(Estimation, UninformativeLogLikelihood) {
  const Variant v = make_variant(Application::Static, "MNL-B");
  const Dataset d = static_data(30, 4, v, Eigen::Vector4d(0.5, 0.5, 0.5, 0.5));
  const Model m(v, d);
  EXPECT_NEAR(log_likelihood(m, Eigen::Vector4d::Zero()), 30 * std::log(1.0 / 3.0), 1e-12);
  EXPECT_NEAR(log_likelihood(m, Eigen::Vector4d::Zero()), d.null_log_likelihood(), 1e-12);
}

TEST(Estimation, FitStatsAndLrTest) {
  const FitStats a = fit_stats(-400.0, -426.283, 4, 615);
  EXPECT_NEAR(a.adj_rho2, 1.0 - 404.0 / 426.283, 1e-15);
  EXPECT_NEAR(a.bic, 800.0 + 4.0 * std::log(615.0), 1e-12);
  const FitStats z = fit_stats(-426.283, -426.283, 0, 615);
  EXPECT_DOUBLE_EQ(z.adj_rho2, 0.0);
  EXPECT_DOUBLE_EQ(z.bic, 2 * 426.283);
  EXPECT_EQ(lr_test(-10.0, -10.0, 3), 1.0);
  EXPECT_NEAR(lr_test(-10.0, -10.0 + 3.841458820694124 / 2, 1), 0.05, 1e-12);
  EXPECT_NEAR(lr_test(-10.0, -10.0 + 7.814727903251178 / 2, 3), 0.05, 1e-12);
  EXPECT_THROW(lr_test(-5.0, -10.0, 1), OrderingError);
  EXPECT_THROW(lr_test(-10.0, -5.0, 0), SpecError);
}

TEST(Estimation, BfgsRosenbrock) {
  Objective f = [](const Eigen::VectorXd& x) {
    return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
  };
  const BfgsResult r = bfgs_minimize(f, Eigen::Vector2d(-1.2, 1.0), {1e-7, 1e-12, 2000, 1e-7});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-4);
  EXPECT_NEAR(r.x(1), 1.0, 1e-4);
}

TEST(Estimation, ClusterPerObservationIsClassicalSandwich) {
  const Variant v = make_variant(Application::Static, "MNL-B");
  const Eigen::Vector4d truth(0.4, -0.3, 0.6, 0.2);
  Dataset d = static_data(800, 21, v, truth);
  for (std::size_t i = 0; i < d.size(); ++i) d.rows[i].participant_id = "p" + std::to_string(i);
  const Model m(v, d);
  const FitResult r = estimate(m);
  ASSERT_TRUE(r.converged);
  ASSERT_TRUE(r.inference_ok);
  // Analytic MNL scores and information.
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero(), b = Eigen::Matrix4d::Zero();
  for (const auto& o : d.rows) {
    const Eigen::Vector3d u = o.attributes * r.theta;
    const Eigen::Vector3d p = (u.array() - u.maxCoeff()).exp().matrix() / (u.array() - u.maxCoeff()).exp().sum();
    const Eigen::Vector4d xbar = o.attributes.transpose() * p;
    const Eigen::Vector4d g = o.attributes.row(o.chosen).transpose() - xbar;
    b += g * g.transpose();
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector4d dx = o.attributes.row(j).transpose() - xbar;
      h += p(j) * dx * dx.transpose();
    }
  }
  const Eigen::Matrix4d hi = h.inverse();
  const Eigen::Matrix4d sandwich = hi * b * hi;
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(r.std_error(k), std::sqrt(sandwich(k, k)), 2e-3 * r.std_error(k));
}

TEST(Estimation, DuplicatedParticipantsScaleTRatios) {
  const Variant v = make_variant(Application::Static, "MNL-B");
  const Dataset d = static_data(600, 22, v, Eigen::Vector4d(0.4, -0.3, 0.6, 0.2));
  Dataset dd = d;
  for (auto o : d.rows) {
    o.participant_id += "_copy";
    dd.rows.push_back(o);
  }
  const FitResult a = estimate(Model(v, d)), b = estimate(Model(v, dd));
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(b.theta(k), a.theta(k), 1e-4);
    EXPECT_NEAR(b.t_ratio(k), a.t_ratio(k) * std::sqrt(2.0), 1e-3 * std::abs(a.t_ratio(k)));
  }
}

TEST(Estimation, SandwichDiagonalAndHessianSymmetry) {
  const Variant v = make_variant(Application::Static, "DFT-B2");
  Eigen::VectorXd truth = v.space.starts();
  truth.head(4) << 1.0, 0.8, 0.6, 0.5;
  truth(8) = 0.05;
  truth(10) = 2.0;
  truth(11) = 12.0;
  const Dataset d = static_data(150, 23, v, truth);
  const Model m(v, d);
  const RobustCovariance rc = robust_covariance(m, truth);
  EXPECT_LT((rc.hessian - rc.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE((rc.natural.diagonal().array() >= 0.0).all());
  EXPECT_EQ(rc.clusters, 15u);
}

TEST(Estimation, ReparameterizationInvariance) {
  const Variant v = make_variant(Application::Static, "DFT-B2");
  Eigen::VectorXd truth = v.space.starts();
  truth.head(4) << 1.0, 0.8, 0.6, 0.5;
  truth(8) = 0.05;
  truth(10) = 2.0;
  truth(11) = 12.0;
  Variant fixed_tau = v;
  fixed_tau.space.at("tau").start = 12.0;
  Variant ident = fixed_tau;
  ident.space.at("sigma_eps").transform = Transform::Identity;
  const Dataset d = static_data(300, 24, v, truth);
  const FitResult a = estimate(Model(fixed_tau, d)), b = estimate(Model(ident, d));
  EXPECT_NEAR(a.log_likelihood, b.log_likelihood, 1e-4);
  EXPECT_NEAR(a.theta(10), b.theta(10), 1e-2 * a.theta(10));
}

TEST(Estimation, AllFixedHasNoFreeParameters) {
  Variant v = make_variant(Application::Static, "MNL-B");
  for (const char* n : {"beta_kitchen", "beta_condition", "beta_size", "beta_transport"}) {
    v.space.at(n).fixed = true;
    v.space.at(n).start = 0.1;
  }
  const Dataset d = static_data(50, 25, make_variant(Application::Static, "MNL-B"), Eigen::Vector4d::Zero());
  const Model m(v, d);
  const FitResult r = estimate(m);
  EXPECT_EQ(r.k, 0);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.log_likelihood, log_likelihood(m, Eigen::Vector4d::Constant(0.1)));
  EXPECT_EQ(r.iterations, 0);
}
