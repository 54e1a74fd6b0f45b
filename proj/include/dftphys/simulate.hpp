#pragma once

// Brute-force simulation of the DFT updating process and synthetic datasets.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/dataset.hpp"
#include "dftphys/dft.hpp"
#include "dftphys/model.hpp"
#include "dftphys/parallel.hpp"
#include "dftphys/rng.hpp"

namespace dftphys {

struct Trajectory {
  Eigen::MatrixXd path;       ///< (steps + 1) x J, row 0 = p0
  std::vector<int> attended;  ///< attribute attended at each step
  std::uint64_t seed = 0;
};

/// Number of simulated steps for a (possibly non-integer) tau.
inline int simulation_steps(double tau) {
  return std::max(1, static_cast<int>(std::llround(tau)));
}

namespace detail {

// Everything one step of the update needs, precomputed once per task.
struct StepKernel {
  Eigen::MatrixXd s;  ///< feedback matrix
  Eigen::MatrixXd b;  ///< C M diag(beta): column k is the valence when attending k
  std::discrete_distribution<int> attend;
  std::normal_distribution<double> noise;
  bool noisy;
  int steps;

  StepKernel(const ChoiceTask& task, const DftParams& p)
      : s(feedback_matrix(distance_matrix(task, p.beta), p.phi1, p.phi2)),
        b(contrast_matrix(task.alternatives()) * task.attributes * p.beta.asDiagonal()),
        noise(0.0, p.sigma_eps > 0.0 ? p.sigma_eps : 1.0),
        noisy(p.sigma_eps > 0.0),
        steps(simulation_steps(p.tau)) {
    const Eigen::VectorXd w = softmax(p.gamma);
    attend = std::discrete_distribution<int>(w.data(), w.data() + w.size());
  }

  template <typename Rng>
  int step(Eigen::VectorXd& pref, Eigen::VectorXd& tmp, Rng& rng) {
    const int k = attend(rng);
    tmp.noalias() = s * pref;
    for (Eigen::Index j = 0; j < pref.size(); ++j) pref(j) = tmp(j) + b(j, k) + (noisy ? noise(rng) : 0.0);
    return k;
  }
};

}  // namespace detail

inline Trajectory simulate_trajectory(const ChoiceTask& task, const DftParams& params, std::uint64_t seed) {
  task.validate();
  params.validate(true);
  detail::StepKernel kernel(task, params);
  auto rng = make_stream(seed, 0);
  Trajectory t;
  t.seed = seed;
  t.path.resize(kernel.steps + 1, task.alternatives());
  Eigen::VectorXd pref = params.p0;
  Eigen::VectorXd tmp(pref.size());
  t.path.row(0) = pref.transpose();
  for (int r = 1; r <= kernel.steps; ++r) {
    t.attended.push_back(kernel.step(pref, tmp, rng));
    t.path.row(r) = pref.transpose();
  }
  return t;
}

inline constexpr std::int64_t kDrawChunk = 4096;

/// Final preference vectors of n independent runs (n x J). Draw i comes from
/// chunk i / 4096, each chunk its own stream.
inline Eigen::MatrixXd simulate_final_preferences(const ChoiceTask& task, const DftParams& params,
                                                  std::int64_t n, std::uint64_t seed, int workers = 1) {
  task.validate();
  params.validate(true);
  const int J = task.alternatives();
  Eigen::MatrixXd out(n, J);
  const auto chunks = static_cast<std::size_t>((n + kDrawChunk - 1) / kDrawChunk);
  parallel_for(chunks, workers, [&](std::size_t c) {
    detail::StepKernel kernel(task, params);
    auto rng = make_stream(seed, c);
    Eigen::VectorXd pref(J), tmp(J);
    const std::int64_t lo = static_cast<std::int64_t>(c) * kDrawChunk;
    const std::int64_t hi = std::min(n, lo + kDrawChunk);
    for (std::int64_t d = lo; d < hi; ++d) {
      pref = params.p0;
      for (int r = 0; r < kernel.steps; ++r) kernel.step(pref, tmp, rng);
      out.row(d) = pref.transpose();
    }
  });
  return out;
}

/// Frequency with which each alternative holds the largest preference after
/// tau steps; ties are broken uniformly at random.
inline Eigen::VectorXd simulate_choice_shares(const ChoiceTask& task, const DftParams& params,
                                              std::int64_t n_draws, std::uint64_t seed, int workers = 1) {
  if (n_draws < 1) throw SpecError("simulate_choice_shares needs at least one draw");
  task.validate();
  params.validate(true);
  const int J = task.alternatives();
  const auto chunks = static_cast<std::size_t>((n_draws + kDrawChunk - 1) / kDrawChunk);
  std::vector<std::vector<std::int64_t>> counts(chunks, std::vector<std::int64_t>(static_cast<std::size_t>(J), 0));
  parallel_for(chunks, workers, [&](std::size_t c) {
    detail::StepKernel kernel(task, params);
    auto rng = make_stream(seed, c);
    Eigen::VectorXd pref(J), tmp(J);
    std::vector<int> ties;
    const std::int64_t lo = static_cast<std::int64_t>(c) * kDrawChunk;
    const std::int64_t hi = std::min(n_draws, lo + kDrawChunk);
    for (std::int64_t d = lo; d < hi; ++d) {
      pref = params.p0;
      for (int r = 0; r < kernel.steps; ++r) kernel.step(pref, tmp, rng);
      const double best = pref.maxCoeff();
      ties.clear();
      for (int j = 0; j < J; ++j)
        if (pref(j) == best) ties.push_back(j);
      int winner = ties.front();
      if (ties.size() > 1)
        winner = ties[std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng)];
      ++counts[c][static_cast<std::size_t>(winner)];
    }
  });
  Eigen::VectorXd shares = Eigen::VectorXd::Zero(J);
  for (const auto& cc : counts)
    for (int j = 0; j < J; ++j) shares(j) += static_cast<double>(cc[static_cast<std::size_t>(j)]);
  return shares / static_cast<double>(n_draws);
}

// ---------------------------------------------------------------------------
// Synthetic datasets

/// Covariate distributions for generated data.
struct Design {
  Application application = Application::Static;
  int alternatives = 3;
  std::vector<std::string> attribute_names = default_static_attributes();
  int level_min = 1;  ///< static attribute levels: integers in [level_min, level_max]
  int level_max = 5;
  int tasks_per_participant = 10;
  bool features = true;  ///< draw share (static) or stress/gaze (gap) features
  // Gap design.
  int gaps_per_sequence = 4;
  double gap_min = 4.0;
  double gap_max = 12.0;
};

namespace detail {

inline Eigen::VectorXd dirichlet_ones(int k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = e(rng);
  return v / v.sum();
}

}  // namespace detail

/// Covariates only; every `chosen` is 0.
inline Dataset generate_design(const Design& design, std::size_t n, std::uint64_t seed) {
  Dataset d;
  if (design.application == Application::Static) {
    if (design.alternatives < 2) throw SpecError("design needs at least two alternatives");
    if (design.level_max <= design.level_min) throw SpecError("design needs level_max > level_min");
    d = make_static_dataset(design.attribute_names, design.alternatives);
    if (!design.features) d.vector_names.clear();
  } else {
    d = make_gap_dataset();
    if (!design.features) d.scalar_names = gap_design_columns();
  }
  const int per = std::max(1, design.tasks_per_participant);
  const int K = static_cast<int>(design.attribute_names.size());
  d.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t participant = i / static_cast<std::size_t>(per);
    const int within = static_cast<int>(i % static_cast<std::size_t>(per));
    Observation& o = d.rows[i];
    o.participant_id = fmt::format("p{:04d}", participant + 1);
    o.task_id = fmt::format("t{:06d}", i + 1);
    auto rng = make_stream(seed, 2 * i);
    if (design.application == Application::Static) {
      std::uniform_int_distribution<int> level(design.level_min, design.level_max);
      o.attributes.resize(design.alternatives, K);
      for (bool distinct = false; !distinct;) {
        for (int j = 0; j < design.alternatives; ++j)
          for (int k = 0; k < K; ++k) o.attributes(j, k) = level(rng);
        distinct = true;
        for (int a = 0; a < design.alternatives && distinct; ++a)
          for (int b = a + 1; b < design.alternatives && distinct; ++b)
            distinct = o.attributes.row(a) != o.attributes.row(b);
      }
      if (design.features)
        for (std::size_t v = 0; v < d.vector_names.size(); ++v) o.shares.push_back(detail::dirichlet_ones(K, rng));
    } else {
      auto prng = make_stream(seed, (std::uint64_t{1} << 62) + participant);
      std::bernoulli_distribution coin(0.5);
      const double z_age = coin(prng);
      const double z_reg = coin(prng);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_real_distribution<double> gap(design.gap_min, design.gap_max);
      const int gi = within % std::max(1, design.gaps_per_sequence) + 1;
      o.scalars = {static_cast<double>(gi), gap(rng), unit(rng), unit(rng), z_age, z_reg};
      if (design.features) {
        std::normal_distribution<double> z(0.0, 1.0);
        std::exponential_distribution<double> scr(10.0);
        std::normal_distribution<double> left(0.0, 0.1);
        std::uniform_real_distribution<double> yaw(2.0, 10.0);
        std::uniform_real_distribution<double> pitch(1.0, 5.0);
        const double x_scen = within >= per / 2 ? 1.0 : 0.0;
        o.scalars.insert(o.scalars.end(), {x_scen, z(rng), scr(rng), left(rng), yaw(rng), pitch(rng)});
      }
    }
  }
  return d;
}

/// Draws every observation's choice from the model's analytic probabilities.
inline void draw_choices(Dataset& d, const Variant& variant, const Eigen::VectorXd& theta,
                         std::uint64_t seed, int workers = 1, OrthantOptions quadrature = {}) {
  const Model model(variant, d, quadrature);
  std::vector<int> chosen(d.size(), 0);
  parallel_for(d.size(), workers, [&](std::size_t i) {
    const Eigen::VectorXd p = model.probabilities(i, as_span(theta));
    auto rng = make_stream(seed, 2 * i + 1);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int j = 0;
    for (; j < p.size() - 1; ++j) {
      acc += p(j);
      if (u < acc) break;
    }
    chosen[i] = j;
  });
  for (std::size_t i = 0; i < d.size(); ++i) d.rows[i].chosen = chosen[i];
}

/// N synthetic observations from `design` with choices from `variant` at `theta`.
inline Dataset generate_dataset(const Design& design, const Variant& variant, const Eigen::VectorXd& theta,
                                std::size_t n, std::uint64_t seed, int workers = 1,
                                OrthantOptions quadrature = {}) {
  if (design.application != variant.application())
    throw SpecError(fmt::format("design is for {} data but variant {} is a {} model",
                                to_string(design.application), variant.name,
                                to_string(variant.application())));
  Dataset d = generate_design(design, n, seed);
  draw_choices(d, variant, theta, seed, workers, quadrature);
  return d;
}

}  // namespace dftphys
