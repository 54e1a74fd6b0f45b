#include <cmath>

#include <gtest/gtest.h>

#include "dftphys/estimation.hpp"
#include "dftphys/link.hpp"
#include "dftphys/mnl.hpp"
#include "dftphys/model.hpp"
#include "dftphys/params.hpp"

using namespace dftphys;

namespace {

Observation static_obs(const Eigen::MatrixXd& m, int chosen = 0) {
  Observation o;
  o.participant_id = "p1";
  o.task_id = "t1";
  o.chosen = chosen;
  o.attributes = m;
  o.shares = {Eigen::VectorXd::Constant(m.cols(), 1.0 / m.cols()), Eigen::VectorXd::Constant(m.cols(), 1.0 / m.cols())};
  return o;
}

Observation gap_obs(double gap_index, double x_scen = 0, double z_hr = 0, double z_scr = 0) {
  Observation o;
  o.participant_id = "p1";
  o.task_id = "g1";
  o.scalars = {gap_index, 8.0, 0.4, 0.6, 1.0, 0.0, x_scen, z_hr, z_scr, 0.02, 5.0, 3.0};
  return o;
}

}  // namespace

TEST(Mnl, UtilityExamples) {
  Dataset d = make_static_dataset(default_static_attributes(), 2);
  Eigen::MatrixXd m(2, 4);
  m << 5, 5, 5, 5, 1, 1, 1, 1;
  d.rows.push_back(static_obs(m));
  const UtilitySpec spec = static_utility_spec(d.attribute_names, 2);
  const auto bind = spec.bind({"beta_kitchen", "beta_condition", "beta_size", "beta_transport"});
  const std::vector<double> zero(4, 0.0), reference{0.42, 0.93, 0.60, 0.57};
  EXPECT_EQ(utility(d.rows[0], spec, bind, zero).norm(), 0.0);
  const Eigen::VectorXd u = utility(d.rows[0], spec, bind, reference);
  EXPECT_NEAR(u(0) - u(1), 10.08, 1e-12);
}

TEST(Mnl, GapSpeedOnlyAtFirstGap) {
  Dataset d = make_gap_dataset();
  d.rows = {gap_obs(1), gap_obs(2)};
  const UtilitySpec spec = gap_utility_spec(d);
  const Variant v = make_variant(Application::Gap, "MNL-B");
  const auto bind = spec.bind(v.space.names());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.space.size()));
  theta(static_cast<Eigen::Index>(v.space.require("beta_speed"))) = 1.0;
  EXPECT_DOUBLE_EQ(utility(d.rows[0], spec, bind, as_span(theta))(0), 0.6);
  EXPECT_DOUBLE_EQ(utility(d.rows[1], spec, bind, as_span(theta))(0), 0.0);
}

TEST(Mnl, Probability) {
  EXPECT_TRUE(mnl_probability(Eigen::Vector3d::Zero()).isApprox(Eigen::Vector3d::Constant(1.0 / 3.0)));
  const Eigen::VectorXd p = mnl_probability(Eigen::Vector2d(std::log(2.0), 0.0));
  EXPECT_NEAR(p(0), 2.0 / 3.0, 1e-15);
  const Eigen::Vector3d u(0.3, -1.2, 2.0);
  EXPECT_LT((mnl_probability(u) - mnl_probability(u.array() + 123.4).matrix()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(mnl_probability(Eigen::Vector2d(800, 0))(0), 1.0, 0.0);
}

TEST(Mnl, AnalyticGradientMatchesFiniteDifferences) {
  Dataset d = make_static_dataset(default_static_attributes(), 3);
  Eigen::MatrixXd m(3, 4);
  m << 1, 4, 2, 5, 3, 1, 5, 2, 2, 2, 3, 3;
  d.rows.push_back(static_obs(m, 1));
  const UtilitySpec spec = static_utility_spec(d.attribute_names, 3);
  const auto bind = spec.bind({"beta_kitchen", "beta_condition", "beta_size", "beta_transport"});
  Eigen::VectorXd theta(4);
  theta << 0.3, -0.2, 0.5, 0.1;
  const Eigen::VectorXd g = mnl_log_probability_gradient(d.rows[0], spec, bind, as_span(theta));
  auto lp = [&](const Eigen::VectorXd& t) { return std::log(mnl_probability(utility(d.rows[0], spec, bind, as_span(t)))(1)); };
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd a = theta, b = theta;
    a(k) += 1e-6;
    b(k) -= 1e-6;
    EXPECT_NEAR(g(k), (lp(a) - lp(b)) / 2e-6, 1e-8);
  }
}

TEST(Params, TransformsRoundTrip) {
  ParamDef e{"s", 1.0, false, Transform::Exp};
  ParamDef l{"p", 0.1, false, Transform::ScaledLogistic, 0.0, 1.0 / 3.0};
  for (double v : {1e-4, 0.5, 38.0}) EXPECT_NEAR(e.forward(e.inverse(v)), v, 1e-12 * v);
  for (double v : {0.01, 0.2, 0.33}) EXPECT_NEAR(l.forward(l.inverse(v)), v, 1e-12);
  EXPECT_THROW(e.inverse(0.0), StartValueError);
  EXPECT_THROW(l.inverse(1.0 / 3.0), StartValueError);
  for (double u : {-2.0, 0.0, 1.5}) {
    const double h = 1e-6;
    EXPECT_NEAR(e.derivative(u), (e.forward(u + h) - e.forward(u - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(l.derivative(u), (l.forward(u + h) - l.forward(u - h)) / (2 * h), 1e-8);
  }
}

TEST(Link, AttentionLogits) {
  const Eigen::Vector4d gamma(0.1, -0.3, 0.5, 0.0);
  const Eigen::Vector4d uniform = Eigen::Vector4d::Constant(0.25);
  EXPECT_TRUE(gaze_adjusted_logits(gamma, uniform, uniform, 0.0, 0.0).isApprox(gamma));
  EXPECT_TRUE(softmax(gaze_adjusted_logits(gamma, uniform, uniform, 1.7, -0.4)).isApprox(softmax(gamma), 1e-14));
  const Eigen::VectorXd w =
      softmax(gaze_adjusted_logits(Eigen::Vector4d::Zero(), Eigen::Vector4d(0.4, 0.2, 0.2, 0.2), uniform, 2.29, 0.0));
  // Direct evaluation of softmax(0.916, 0.458, 0.458, 0.458).
  const double e1 = std::exp(0.916), e2 = std::exp(0.458), tot = e1 + 3 * e2;
  EXPECT_NEAR(w(0), e1 / tot, 1e-15);
  EXPECT_NEAR(w(0), 0.345108, 1e-6);
  EXPECT_NEAR(w(1), 0.218297, 1e-6);
  EXPECT_THROW(gaze_adjusted_logits(gamma, Eigen::Vector4d(0.5, 0.5, 0.5, 0.0), uniform, 1, 1), DataError);
}

TEST(Link, Scalings) {
  const Eigen::Vector4d beta(1, 1, 1, 1);
  const Eigen::Vector4d counts(0.5, 0.5, 0, 0);
  EXPECT_TRUE(gaze_adjusted_scalings(beta, counts, 0.0).isApprox(beta));
  EXPECT_TRUE(gaze_adjusted_scalings(beta, counts, 6.0).isApprox(Eigen::Vector4d(4, 4, 1, 1)));
}

TEST(Link, StressAndGaze) {
  EXPECT_EQ(stress_index(0, 0, 0, 0.55, 0.91, 4.49), 0.0);
  const double a = stress_index(1, 1, 0.1, 0.55, 0.91, 4.49);
  EXPECT_NEAR(a, 1.909, 1e-12);
  EXPECT_NEAR(stress_index(1, 1, 0.1, 1.10, 1.82, 8.98), 2 * a, 1e-12);
  EXPECT_EQ(stress_noise(0.0), 1.0);
  EXPECT_NEAR(stress_noise(1.909), 6.746, 5e-4);
  EXPECT_LT(stress_noise(0.3), stress_noise(0.31));
  EXPECT_THROW(stress_noise(800.0), ParameterDomainError);
  EXPECT_EQ(gaze_total(0, 0, 0, {61.05, -1.41, -2.44}), 0.0);
  EXPECT_NEAR(gaze_total(0.02, 5, 3, {61.05, -1.41, -2.44}), -13.149, 1e-12);
  EXPECT_LT(gaze_total(0.02, 6, 3, {61.05, -1.41, -2.44}), gaze_total(0.02, 5, 3, {61.05, -1.41, -2.44}));
}

TEST(Link, GapAttentionWeights) {
  EXPECT_TRUE(gap_attention_weights(0.0).isApprox(Eigen::Vector3d::Constant(1.0 / 3.0)));
  EXPECT_TRUE(gap_attention_weights(std::log(2.0)).isApprox(Eigen::Vector3d(0.5, 0.25, 0.25)));
  const Eigen::Vector3d big = gap_attention_weights(1e4);
  EXPECT_DOUBLE_EQ(big(0), 1.0);
  EXPECT_DOUBLE_EQ(big(1), 0.0);
  const Eigen::Vector3d small = gap_attention_weights(-1e4);
  EXPECT_DOUBLE_EQ(small(1), 0.5);
}

TEST(Link, ResolverAppliesDftS2NoiseAndDftE3Weights) {
  Dataset d = make_gap_dataset();
  d.rows = {gap_obs(2, 1, 1, 0.1)};
  const Variant s2 = make_variant(Application::Gap, "DFT-S2");
  Eigen::VectorXd th = s2.space.starts();
  th(static_cast<Eigen::Index>(s2.space.require("delta_stress"))) = 0.55;
  th(static_cast<Eigen::Index>(s2.space.require("alpha_hr"))) = 0.91;
  th(static_cast<Eigen::Index>(s2.space.require("alpha_scr"))) = 4.49;
  const Resolver r(s2.base, s2.link, s2.space, d);
  auto [task, params] = r.resolve_dft(d.rows[0], as_span(th));
  EXPECT_NEAR(params.sigma_eps, std::exp(1.909), 1e-12);

  const Variant e3 = make_variant(Application::Gap, "DFT-E3");
  Eigen::VectorXd t3 = e3.space.starts();
  for (const char* n : {"delta_stress", "alpha_hr", "alpha_scr"})
    t3(static_cast<Eigen::Index>(e3.space.require(n))) = th(static_cast<Eigen::Index>(s2.space.require(n)));
  t3(static_cast<Eigen::Index>(e3.space.require("alpha_gaze_left"))) = 61.05;
  t3(static_cast<Eigen::Index>(e3.space.require("alpha_gaze_yaw_sd"))) = -1.41;
  t3(static_cast<Eigen::Index>(e3.space.require("alpha_gaze_pitch_sd"))) = -2.44;
  const Resolver r3(e3.base, e3.link, e3.space, d);
  auto [task3, p3] = r3.resolve_dft(d.rows[0], as_span(t3));
  EXPECT_NEAR(p3.sigma_eps, std::exp(1.909), 1e-12);
  EXPECT_TRUE(softmax(p3.gamma).isApprox(gap_attention_weights(-13.149), 1e-12));
}

TEST(Link, EmptySpecReproducesBase) {
  Dataset d = make_gap_dataset();
  d.rows = {gap_obs(1), gap_obs(3)};
  const Variant base = make_variant(Application::Gap, "DFT-B");
  Variant custom = base_variant(BaseKind::GapDft);
  EXPECT_TRUE(custom.link.empty());
  const Eigen::VectorXd th = base.space.starts();
  const Model a(base, d), b(custom, d);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_EQ(a.chosen_probability(i, as_span(th)), b.chosen_probability(i, as_span(th)));
}

TEST(Link, InvalidTargetsRejected) {
  Dataset d = make_gap_dataset();
  d.rows = {gap_obs(1)};
  // Process-noise link without the override on a fixed sigma.
  Variant v = make_variant(Application::Gap, "DFT-B");
  v.space.add({"a", 0.0});
  v.link.terms.push_back({LinkTarget::ProcessNoise, "z_hr", "a"});
  EXPECT_THROW(Model(v, d), SpecError);
  // Unknown feature.
  Variant w = make_variant(Application::Gap, "DFT-B");
  w.space.add({"a", 0.0});
  w.link.terms.push_back({LinkTarget::InitialPreference, "no_such_column", "a"});
  EXPECT_THROW(Model(w, d), Error);
  // Attention logits make no sense for an MNL base.
  Variant m = make_variant(Application::Gap, "MNL-B");
  m.space.add({"a", 0.0});
  m.link.terms.push_back({LinkTarget::AttentionLogits, "z_hr", "a"});
  EXPECT_THROW(Model(m, d), SpecError);
}

TEST(Variants, StaticRowsAndFixedFlags) {
  const Variant b2 = make_variant(Application::Static, "DFT-B2");
  const std::vector<std::string> names{"beta_kitchen", "beta_condition", "beta_size", "beta_transport",
                                       "gamma_kitchen", "gamma_condition", "gamma_size", "gamma_transport",
                                       "phi1", "phi2", "sigma_eps", "tau"};
  EXPECT_EQ(b2.space.names(), names);
  std::vector<bool> fixed;
  for (const auto& d : b2.space.defs()) fixed.push_back(d.fixed);
  EXPECT_EQ(fixed, (std::vector<bool>{true, false, false, false, true, true, true, true, false, true, false, true}));
  EXPECT_EQ(b2.space.free_count(), 5u);
  EXPECT_EQ(make_variant(Application::Static, "DFT-B1").space.free_count(), 5u);
  EXPECT_EQ(make_variant(Application::Static, "MNL-B").space.free_count(), 4u);
  EXPECT_EQ(make_variant(Application::Static, "DFT-E3").space.free_count(), 7u);
  EXPECT_EQ(make_variant(Application::Gap, "MNL-B").space.free_count(), 7u);
  EXPECT_EQ(make_variant(Application::Gap, "DFT-B").space.free_count(), 9u);
  EXPECT_EQ(make_variant(Application::Gap, "MNL-S").space.free_count(), 10u);
  EXPECT_EQ(make_variant(Application::Gap, "DFT-S2").space.free_count(), 12u);
  EXPECT_EQ(make_variant(Application::Gap, "MNL-E").space.free_count(), 13u);
  EXPECT_EQ(make_variant(Application::Gap, "DFT-E3").space.free_count(), 15u);
  EXPECT_THROW(make_variant(Application::Static, "DFT-Z9"), SpecError);
}
