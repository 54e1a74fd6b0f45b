#include <cmath>

#include <gtest/gtest.h>

#include "dftphys/model.hpp"
#include "dftphys/simulate.hpp"

using namespace dftphys;

namespace {

ChoiceTask task_of(Eigen::MatrixXd m) {
  ChoiceTask t;
  t.attributes = std::move(m);
  return t;
}

}  // namespace

TEST(Simulate, NoiselessSingleAttributeIsDeterministic) {
  const ChoiceTask t = task_of((Eigen::MatrixXd(2, 1) << 2, 1).finished());
  DftParams p(Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Zero(1), 0.0, 0.2, 0.0, 5.0, Eigen::Vector2d(1, 0));
  const Trajectory a = simulate_trajectory(t, p, 1), b = simulate_trajectory(t, p, 99);
  ASSERT_EQ(a.path.rows(), 6);
  EXPECT_EQ(a.path, b.path);
  // phi1 = 0 makes S = I - phi2 * ones; valence is (0.5, -0.5).
  const Eigen::Matrix2d s = Eigen::Matrix2d::Identity() - 0.2 * Eigen::Matrix2d::Ones();
  Eigen::Vector2d x(1, 0);
  for (int r = 1; r <= 5; ++r) {
    x = s * x + Eigen::Vector2d(0.5, -0.5);
    EXPECT_NEAR(a.path(r, 0), x(0), 1e-14);
    EXPECT_NEAR(a.path(r, 1), x(1), 1e-14);
  }
}

TEST(Simulate, SeedDeterminism) {
  const ChoiceTask t = task_of((Eigen::MatrixXd(3, 2) << 3, 1, 1, 3, 2, 2).finished());
  DftParams p(Eigen::Vector2d(1, 1), Eigen::Vector2d(0.3, 0), 0.1, 0.2, 1.0, 10.0, Eigen::Vector3d::Zero());
  const Trajectory a = simulate_trajectory(t, p, 7), b = simulate_trajectory(t, p, 7), c = simulate_trajectory(t, p, 8);
  EXPECT_EQ(a.path, b.path);
  EXPECT_EQ(a.attended, b.attended);
  EXPECT_NE(a.path, c.path);
}

TEST(Simulate, SymmetricSharesAndWorkerIndependence) {
  const ChoiceTask t = task_of(Eigen::MatrixXd::Identity(3, 3));
  DftParams p(Eigen::Vector3d(1, 1, 1), Eigen::Vector3d::Zero(), 0.1, 0.2, 1.0, 8.0, Eigen::Vector3d::Zero());
  const std::int64_t n = 60'000;
  const Eigen::VectorXd s1 = simulate_choice_shares(t, p, n, 5, 1);
  const Eigen::VectorXd s3 = simulate_choice_shares(t, p, n, 5, 3);
  EXPECT_EQ(s1, s3);
  EXPECT_EQ(s1.sum(), 1.0);
  const double band = 3.0 * std::sqrt(2.0 / (9.0 * n));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(s1(j), 1.0 / 3.0, band);
  EXPECT_THROW(simulate_choice_shares(t, p, 0, 5), SpecError);
}

TEST(Simulate, EmptyAndRepeatableDatasets) {
  const Variant v = make_variant(Application::Static, "MNL-B");
  const Eigen::Vector4d theta(0.4, 0.9, 0.6, 0.6);
  EXPECT_EQ(generate_dataset(Design{}, v, theta, 0, 3).size(), 0u);
  const Dataset a = generate_dataset(Design{}, v, theta, 200, 3), b = generate_dataset(Design{}, v, theta, 200, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.rows[i].attributes, b.rows[i].attributes);
    EXPECT_EQ(a.rows[i].chosen, b.rows[i].chosen);
  }
  Design gap;
  gap.application = Application::Gap;
  EXPECT_THROW(generate_dataset(gap, v, theta, 5, 3), SpecError);
}

TEST(Simulate, ChoiceFrequenciesMatchProbabilities) {
  const Variant v = make_variant(Application::Static, "MNL-B");
  const Eigen::Vector4d theta(0.4, -0.3, 0.6, 0.2);
  const std::size_t n = 100'000;
  const Dataset d = generate_dataset(Design{}, v, theta, n, 11);
  const Model m(v, d);
  Eigen::Vector3d expected = Eigen::Vector3d::Zero(), observed = Eigen::Vector3d::Zero();
  double var0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd p = m.probabilities(i, as_span(theta));
    expected += p;
    observed(d.rows[i].chosen) += 1.0;
    var0 += p(0) * (1 - p(0));
  }
  // Poisson-binomial standard deviation bounds every alternative's count loosely.
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(observed(j), expected(j), 4.0 * std::sqrt(0.25 * n));
  EXPECT_NEAR(observed(0), expected(0), 4.0 * std::sqrt(var0));
}
