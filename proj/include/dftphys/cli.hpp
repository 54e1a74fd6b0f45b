#pragma once

// Command implementations behind the dftphys executable. Each command reads a
// RunConfig, writes its files under `out`, and returns a process exit code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "dftphys/dataset.hpp"
#include "dftphys/estimation.hpp"
#include "dftphys/model.hpp"
#include "dftphys/report.hpp"
#include "dftphys/signal.hpp"
#include "dftphys/simulate.hpp"

namespace dftphys::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string data;
  std::string out = "out";
  std::string signals, events, fixations;  ///< preprocess inputs
  Application application = Application::Static;
  std::string variant = "MNL-B";
  std::optional<BaseKind> base;  ///< for variant "custom"
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json links = nlohmann::json::array();
  bool override_fixed_noise = false;
  std::uint64_t seed = 1;
  int workers = 1;
  std::int64_t draws = 1'000'000;
  double tol = 1e-6;
  // simulate
  std::size_t n = 1000;
  Design design;
  int trajectories = 0;
  std::map<std::string, double> truth;
  // validate
  int cases = 50;
  int threshold = 48;
  // preprocess
  FeatureOptions features;
  std::vector<std::string> attributes = default_static_attributes();
};

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open config {}", path));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(fmt::format("{}: {}", path, e.what()));
  }
}

/// Fills a RunConfig from the structured config; unknown keys are rejected.
inline RunConfig parse_config(const nlohmann::json& j) {
  static const std::vector<std::string> known{
      "data", "out", "signals", "events", "fixations", "application", "variant", "base", "parameters",
      "links", "override_fixed_noise", "seed", "workers", "draws", "tol", "simulate", "validate", "preprocess"};
  RunConfig c;
  if (!j.is_object()) throw SpecError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw SpecError(fmt::format("unknown config key '{}'", it.key()));
  try {
    if (j.contains("data")) c.data = j["data"].get<std::string>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("signals")) c.signals = j["signals"].get<std::string>();
    if (j.contains("events")) c.events = j["events"].get<std::string>();
    if (j.contains("fixations")) c.fixations = j["fixations"].get<std::string>();
    if (j.contains("application")) c.application = parse_application(j["application"].get<std::string>());
    if (j.contains("variant")) c.variant = j["variant"].get<std::string>();
    if (j.contains("base")) c.base = parse_base_kind(j["base"].get<std::string>());
    if (j.contains("parameters")) c.parameters = j["parameters"];
    if (j.contains("links")) c.links = j["links"];
    if (j.contains("override_fixed_noise")) c.override_fixed_noise = j["override_fixed_noise"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<int>();
    if (j.contains("draws")) c.draws = j["draws"].get<std::int64_t>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    c.design.application = c.application;
    if (j.contains("simulate")) {
      const auto& s = j["simulate"];
      if (s.contains("n")) c.n = s["n"].get<std::size_t>();
      if (s.contains("trajectories")) c.trajectories = s["trajectories"].get<int>();
      if (s.contains("truth"))
        for (auto it = s["truth"].begin(); it != s["truth"].end(); ++it) c.truth[it.key()] = it.value().get<double>();
      if (s.contains("design")) {
        const auto& d = s["design"];
        if (d.contains("alternatives")) c.design.alternatives = d["alternatives"].get<int>();
        if (d.contains("attributes")) c.design.attribute_names = d["attributes"].get<std::vector<std::string>>();
        if (d.contains("level_min")) c.design.level_min = d["level_min"].get<int>();
        if (d.contains("level_max")) c.design.level_max = d["level_max"].get<int>();
        if (d.contains("tasks_per_participant"))
          c.design.tasks_per_participant = d["tasks_per_participant"].get<int>();
        if (d.contains("features")) c.design.features = d["features"].get<bool>();
        if (d.contains("gaps_per_sequence")) c.design.gaps_per_sequence = d["gaps_per_sequence"].get<int>();
        if (d.contains("gap_min")) c.design.gap_min = d["gap_min"].get<double>();
        if (d.contains("gap_max")) c.design.gap_max = d["gap_max"].get<double>();
      }
    }
    if (j.contains("validate")) {
      const auto& v = j["validate"];
      if (v.contains("cases")) c.cases = v["cases"].get<int>();
      if (v.contains("threshold")) c.threshold = v["threshold"].get<int>();
    }
    if (j.contains("preprocess")) {
      const auto& p = j["preprocess"];
      if (p.contains("gaze_window")) c.features.gaze_window = p["gaze_window"].get<double>();
      if (p.contains("scr_window")) c.features.scr_window = p["scr_window"].get<double>();
      if (p.contains("scr_threshold")) c.features.scr_threshold = p["scr_threshold"].get<double>();
      if (p.contains("positive_yaw_left")) c.features.positive_yaw_left = p["positive_yaw_left"].get<bool>();
      if (p.contains("attributes")) c.attributes = p["attributes"].get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(fmt::format("config: {}", e.what()));
  }
  return c;
}

/// Predefined or custom variant with the config's overrides applied.
inline Variant build_variant(const RunConfig& c, const std::vector<std::string>& attrs, int J) {
  Variant v;
  if (c.variant == "custom") {
    if (!c.base) throw SpecError("variant 'custom' needs a 'base' (static_mnl, static_dft, gap_mnl, gap_dft)");
    if (application_of(*c.base) != c.application)
      throw SpecError(fmt::format("base {} does not match application {}", to_string(*c.base),
                                  to_string(c.application)));
    v = base_variant(*c.base, attrs, J);
  } else {
    v = make_variant(c.application, c.variant, attrs, J);
  }
  try {
    for (auto it = c.parameters.begin(); it != c.parameters.end(); ++it) {
      const auto& o = it.value();
      ParamDef def;
      def.name = it.key();
      if (auto idx = v.space.index(it.key())) def = v.space[*idx];
      if (o.contains("start")) def.start = o["start"].get<double>();
      if (o.contains("fixed")) def.fixed = o["fixed"].get<bool>();
      if (o.contains("transform")) def.transform = parse_transform(o["transform"].get<std::string>());
      if (o.contains("lower")) def.lower = o["lower"].get<double>();
      if (o.contains("upper")) def.upper = o["upper"].get<double>();
      if (!std::isfinite(def.start))
        throw StartValueError(fmt::format("parameter {} has a non-finite start", def.name));
      if (v.space.index(it.key()))
        v.space.at(it.key()) = def;
      else
        v.space.add(def);
    }
    for (const auto& l : c.links)
      v.link.terms.push_back({parse_link_target(l.at("target").get<std::string>()), l.at("feature").get<std::string>(),
                              l.at("coefficient").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(fmt::format("config: {}", e.what()));
  }
  if (c.override_fixed_noise) v.link.override_fixed_noise = true;
  return v;
}

inline std::filesystem::path prepare_out(const RunConfig& c) {
  std::filesystem::path out(c.out);
  std::filesystem::create_directories(out);
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot write {}", p.string()));
  return f;
}

// ---------------------------------------------------------------------------

inline int cmd_estimate(const RunConfig& c, std::ostream& log) {
  if (c.data.empty()) throw SpecError("estimate needs --data or a 'data' config entry");
  const Dataset d = read_dataset(c.data);
  if (d.application != c.application)
    throw SpecError(fmt::format("{} holds {} data but the config says application '{}'", c.data,
                                to_string(d.application), to_string(c.application)));
  const Variant v = build_variant(c, d.attribute_names, d.alternatives);
  const Model model(v, d, OrthantOptions{c.tol});
  EstimateOptions opts;
  opts.workers = c.workers;
  const FitResult r = estimate(model, opts);
  const auto out = prepare_out(c);
  {
    auto f = open_out(out / "parameters.txt");
    write_parameter_table(r, f);
  }
  {
    auto f = open_out(out / "fit.json");
    f << fit_json(r).dump(2) << '\n';
  }
  {
    auto f = open_out(out / "probabilities.csv");
    write_probabilities(model, r.theta, f, c.workers);
  }
  write_parameter_table(r, log);
  return r.converged ? kExitOk : kExitNumerical;
}

inline Eigen::VectorXd truth_vector(const Variant& v, const std::map<std::string, double>& truth) {
  Eigen::VectorXd theta = v.space.starts();
  for (const auto& [name, value] : truth) theta(static_cast<Eigen::Index>(v.space.require(name))) = value;
  return theta;
}

inline int cmd_simulate(const RunConfig& c, std::ostream& log) {
  Design design = c.design;
  design.application = c.application;
  const Variant v = build_variant(c, design.attribute_names, design.application == Application::Gap ? 2 : design.alternatives);
  const Eigen::VectorXd theta = truth_vector(v, c.truth);
  const Dataset d = generate_dataset(design, v, theta, c.n, c.seed, c.workers, OrthantOptions{c.tol});
  const auto out = prepare_out(c);
  write_dataset(d, (out / "simulated.csv").string());

  nlohmann::json truth;
  truth["variant"] = v.name;
  truth["application"] = to_string(v.application());
  truth["seed"] = c.seed;
  truth["n"] = c.n;
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < v.space.size(); ++i)
    params.push_back({{"name", v.space[i].name},
                      {"value", theta(static_cast<Eigen::Index>(i))},
                      {"fixed", v.space[i].fixed}});
  truth["parameters"] = params;
  {
    auto f = open_out(out / "truth.json");
    f << truth.dump(2) << '\n';
  }

  if (c.trajectories > 0) {
    if (!is_dft(v.base)) throw SpecError("trajectory dumps need a DFT variant");
    const Model model(v, d);
    auto f = open_out(out / "trajectories.csv");
    CsvWriter w(f);
    std::vector<std::string> header{"trajectory", "task_id", "step", "attended"};
    for (int j = 0; j < d.alternatives; ++j) header.push_back(fmt::format("p_{}", j));
    w.row(header);
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(c.trajectories), d.size());
    for (std::size_t i = 0; i < count; ++i) {
      auto [task, params] = model.resolver().resolve_dft(d.rows[i], as_span(theta));
      const Trajectory t = simulate_trajectory(task, params, splitmix64(c.seed ^ (0x7a3bULL + i)));
      for (Eigen::Index r = 0; r < t.path.rows(); ++r) {
        std::vector<std::string> cells{std::to_string(i), d.rows[i].task_id, std::to_string(r),
                                       r == 0 ? "" : std::to_string(t.attended[static_cast<std::size_t>(r - 1)])};
        for (Eigen::Index j = 0; j < t.path.cols(); ++j) cells.push_back(format_full(t.path(r, j)));
        w.row(cells);
      }
    }
  }
  log << fmt::format("simulated {} observations of {} ({}) with seed {}\n", d.size(), v.name,
                     to_string(v.application()), c.seed);
  return kExitOk;
}

/// One randomized oracle case: analytic probabilities against simulated shares.
struct ValidationCase {
  int index = 0;
  ChoiceTask task;
  DftParams params;
  Eigen::VectorXd analytic, simulated;
  double max_z = 0.0;  ///< largest |simulated - analytic| / binomial SE
  bool pass = false;
};

inline ChoiceTask random_task(std::mt19937_64& rng, int J, int K) {
  std::uniform_int_distribution<int> level(1, 5);
  ChoiceTask t;
  t.attributes.resize(J, K);
  for (bool distinct = false; !distinct;) {
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) t.attributes(j, k) = level(rng);
    distinct = true;
    for (int a = 0; a < J && distinct; ++a)
      for (int b = a + 1; b < J && distinct; ++b) distinct = t.attributes.row(a) != t.attributes.row(b);
  }
  return t;
}

inline DftParams random_params(std::mt19937_64& rng, int J, int K) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  DftParams p;
  p.beta.resize(K);
  p.gamma.resize(K);
  for (int k = 0; k < K; ++k) {
    p.beta(k) = 0.2 + 1.3 * u(rng);
    p.gamma(k) = z(rng);
  }
  p.phi1 = 0.01 + 0.99 * u(rng);
  p.phi2 = u(rng) / J;
  p.sigma_eps = 0.5 + 1.5 * u(rng);
  p.tau = std::uniform_int_distribution<int>(1, 50)(rng);
  p.p0.resize(J);
  for (int j = 0; j < J; ++j) p.p0(j) = z(rng);
  p.validate();
  return p;
}

inline ValidationCase run_validation_case(int index, std::uint64_t seed, std::int64_t draws, int workers,
                                          double tol) {
  auto rng = make_stream(seed, static_cast<std::uint64_t>(index));
  ValidationCase v;
  v.index = index;
  const int J = std::uniform_int_distribution<int>(2, 3)(rng);
  const int K = std::uniform_int_distribution<int>(1, 4)(rng);
  v.task = random_task(rng, J, K);
  v.params = random_params(rng, J, K);
  v.analytic = choice_probabilities(dft_moments(v.task, v.params), OrthantOptions{tol});
  v.simulated = simulate_choice_shares(v.task, v.params, draws, splitmix64(seed + 0x51ULL * (index + 1)), workers);
  for (int j = 0; j < J; ++j) {
    const double p = v.analytic(j);
    const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(draws));
    const double diff = std::abs(v.simulated(j) - p);
    v.max_z = std::max(v.max_z, se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0));
  }
  v.pass = v.max_z <= 3.0;
  return v;
}

inline int cmd_validate(const RunConfig& c, std::ostream& log) {
  const auto out = prepare_out(c);
  auto f = open_out(out / "validation.txt");
  int passed = 0;
  auto emit = [&](const std::string& line) {
    f << line;
    log << line;
  };
  emit(fmt::format("oracle validation: {} cases, {} draws each, seed {}\n", c.cases, c.draws, c.seed));
  for (int i = 0; i < c.cases; ++i) {
    const ValidationCase v = run_validation_case(i, c.seed, c.draws, c.workers, c.tol);
    passed += v.pass;
    std::vector<std::string> a, s;
    for (Eigen::Index j = 0; j < v.analytic.size(); ++j) {
      a.push_back(fmt::format("{:.6f}", v.analytic(j)));
      s.push_back(fmt::format("{:.6f}", v.simulated(j)));
    }
    emit(fmt::format("case {:02d} J={} K={} tau={:>2}: analytic [{}] simulated [{}] max|z| = {:.3f} {}\n", i,
                     v.task.alternatives(), v.task.attribute_count(), v.params.tau, fmt::join(a, " "),
                     fmt::join(s, " "), v.max_z, v.pass ? "PASS" : "FAIL"));
  }
  const bool ok = passed >= c.threshold;
  emit(fmt::format("{}/{} cases within 3 binomial standard errors (threshold {}): {}\n", passed, c.cases,
                   c.threshold, ok ? "PASS" : "FAIL"));
  return ok ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------

inline int cmd_preprocess(const RunConfig& c, std::ostream& log) {
  if (c.signals.empty() == c.events.empty() && c.signals.empty() && c.fixations.empty())
    throw SpecError("preprocess needs --signals with --events, and/or --fixations");
  if (c.signals.empty() != c.events.empty()) throw SpecError("--signals and --events must be given together");
  const auto out = prepare_out(c);
  auto read = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open {}", path));
    return read_csv(in, path);
  };
  std::vector<std::string> summary;

  if (!c.signals.empty()) {
    const CsvTable sig = read(c.signals);
    const CsvTable ev = read(c.events);
    require_columns(ev, {"participant_id", "task_id", "onset"}, "gap event");
    const auto streams = signal_streams(sig);
    std::map<std::string, const SignalStream*> by_id;
    for (const auto& s : streams) by_id[s.participant_id] = &s;

    const int pid = *ev.column("participant_id");
    const int tid = *ev.column("task_id");
    const int onc = *ev.column("onset");
    // Events grouped by participant, output in event-file order.
    std::map<std::string, std::vector<std::size_t>> rows_of;
    for (std::size_t r = 0; r < ev.rows.size(); ++r) rows_of[ev.rows[r][static_cast<std::size_t>(pid)]].push_back(r);
    std::vector<GapFeatures> feats(ev.rows.size());
    std::size_t skipped_total = 0;
    for (const auto& [participant, rows] : rows_of) {
      auto it = by_id.find(participant);
      if (it == by_id.end())
        throw DataError(fmt::format("{}: participant {} has events but no signal samples", c.events, participant));
      std::vector<GapEvent> events;
      for (std::size_t r : rows) {
        const double onset = ev.number(r, onc);
        if (!std::isfinite(onset))
          throw DataError(fmt::format("{}: row {}: missing onset", c.events, r + 2));
        events.push_back({participant, ev.rows[r][static_cast<std::size_t>(tid)], onset});
      }
      std::size_t skipped = 0;
      const auto f = gap_features(*it->second, events, c.features, &skipped);
      for (std::size_t k = 0; k < rows.size(); ++k) feats[rows[k]] = f[k];
      skipped_total += skipped;
      summary.push_back(fmt::format("participant {}: {} samples, {} skipped (missing gaze channel), {} gaps",
                                    participant, it->second->samples.size(), skipped, rows.size()));
    }
    auto f = open_out(out / "features.csv");
    CsvWriter w(f);
    std::vector<std::string> header = ev.header;
    for (const auto& col : gap_feature_output_columns()) header.push_back(col);
    w.row(header);
    for (std::size_t r = 0; r < ev.rows.size(); ++r) {
      std::vector<std::string> cells = ev.rows[r];
      const GapFeatures& g = feats[r];
      for (double x : {g.z_hr, g.z_scr, g.y_gaze_left, g.y_gaze_yaw_sd, g.y_gaze_pitch_sd})
        cells.push_back(format_full(x));
      w.row(cells);
    }
    summary.push_back(fmt::format("gap features: {} rows, {} gaze samples skipped", ev.rows.size(), skipped_total));
  }

  if (!c.fixations.empty()) {
    const CsvTable fx = read(c.fixations);
    require_columns(fx, {"participant_id", "task_id", "attribute", "alternative", "duration"}, "fixation");
    const int pid = *fx.column("participant_id");
    const int tid = *fx.column("task_id");
    const int atc = *fx.column("attribute");
    const int alc = *fx.column("alternative");
    const int duc = *fx.column("duration");
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<FixationRecord>> groups;
    for (std::size_t r = 0; r < fx.rows.size(); ++r) {
      const auto key = std::pair{fx.rows[r][static_cast<std::size_t>(pid)], fx.rows[r][static_cast<std::size_t>(tid)]};
      if (!groups.count(key)) order.push_back(key);
      FixationRecord rec;
      rec.task_id = key.second;
      const std::string& a = fx.rows[r][static_cast<std::size_t>(atc)];
      if (!a.empty() && a != "none") {
        auto it = std::find(c.attributes.begin(), c.attributes.end(), a);
        if (it == c.attributes.end())
          throw DataError(fmt::format("{}: row {}: unknown attribute '{}' (known: {})", c.fixations, r + 2, a,
                                      fmt::join(c.attributes, ", ")));
        rec.attribute = static_cast<int>(it - c.attributes.begin());
      }
      const double alt = fx.number(r, alc);
      rec.alternative = std::isfinite(alt) ? static_cast<int>(alt) : -1;
      rec.duration = fx.number(r, duc);
      groups[key].push_back(rec);
    }
    auto f = open_out(out / "fixation_features.csv");
    CsvWriter w(f);
    std::vector<std::string> header{"participant_id", "task_id"};
    for (const auto& v : share_feature_names())
      for (const auto& a : c.attributes) header.push_back(v + "_" + a);
    w.row(header);
    std::size_t excluded = 0;
    for (const auto& key : order) {
      const auto& recs = groups[key];
      const FixationShares s = fixation_shares(recs, static_cast<int>(c.attributes.size()), key.second);
      excluded += s.excluded;
      std::vector<std::string> cells{key.first, key.second};
      for (Eigen::Index k = 0; k < s.count.size(); ++k) cells.push_back(format_full(s.count(k)));
      for (Eigen::Index k = 0; k < s.time.size(); ++k) cells.push_back(format_full(s.time(k)));
      w.row(cells);
    }
    summary.push_back(fmt::format("fixation features: {} tasks, {} fixations outside attribute regions excluded",
                                  order.size(), excluded));
  }
  auto f = open_out(out / "preprocess_summary.txt");
  for (const auto& s : summary) {
    f << s << '\n';
    log << s << '\n';
  }
  return kExitOk;
}

}  // namespace dftphys::cli
