#pragma once

// Physiological signal preprocessing: gaze aggregation and zones, windowed gaze
// statistics, heart-rate normalization, skin conductance responses and
// fixation shares.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/csv.hpp"
#include "dftphys/error.hpp"

namespace dftphys {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct SignalSample {
  double time = 0.0;  ///< seconds
  double head_yaw = kMissing, head_pitch = kMissing;
  double left_yaw = kMissing, left_pitch = kMissing;
  double right_yaw = kMissing, right_pitch = kMissing;
  double hr = kMissing;   ///< bpm
  double eda = kMissing;  ///< microsiemens
};

struct SignalStream {
  std::string participant_id;
  std::vector<SignalSample> samples;

  void validate() const {
    for (std::size_t i = 1; i < samples.size(); ++i)
      if (!(samples[i].time > samples[i - 1].time))
        throw DataError(fmt::format("participant {}: timestamps not strictly increasing at sample {} (t = {})",
                                    participant_id, i, samples[i].time));
  }
};

/// Head plus half of each eye; empty when any of the six angles is missing.
inline std::optional<std::pair<double, double>> aggregate_gaze(const SignalSample& s) {
  const double v[] = {s.head_yaw, s.head_pitch, s.left_yaw, s.left_pitch, s.right_yaw, s.right_pitch};
  for (double x : v)
    if (!std::isfinite(x)) return std::nullopt;
  return std::pair{s.head_yaw + 0.5 * s.left_yaw + 0.5 * s.right_yaw,
                   s.head_pitch + 0.5 * s.left_pitch + 0.5 * s.right_pitch};
}

/// Aggregated gaze samples of one participant.
struct GazeTrack {
  std::vector<double> time, yaw, pitch;
  std::size_t skipped = 0;  ///< samples dropped for missing angle channels
  std::size_t size() const { return time.size(); }
};

inline GazeTrack aggregate_stream(const SignalStream& stream) {
  GazeTrack t;
  for (const auto& s : stream.samples) {
    if (auto g = aggregate_gaze(s)) {
      t.time.push_back(s.time);
      t.yaw.push_back(g->first);
      t.pitch.push_back(g->second);
    } else {
      ++t.skipped;
    }
  }
  return t;
}

/// Subtracts the mean yaw and pitch.
inline GazeTrack recenter(GazeTrack t) {
  if (t.size() == 0) throw DataError("cannot recenter an empty gaze stream");
  const double n = static_cast<double>(t.size());
  double my = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    my += t.yaw[i];
    mp += t.pitch[i];
  }
  my /= n;
  mp /= n;
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.yaw[i] -= my;
    t.pitch[i] -= mp;
  }
  return t;
}

enum class Zone { Left = 0, Right = 1, Up = 2, Down = 3, Centre = 4 };

inline const char* to_string(Zone z) {
  static const char* names[] = {"left", "right", "up", "down", "centre"};
  return names[static_cast<int>(z)];
}

/// Centre inside a 6 degree radius; otherwise the quadrant split by the
/// diagonals, ties |yaw| = |pitch| going to up/down.
inline Zone zone_of(double yaw, double pitch, bool positive_yaw_left = true) {
  if (yaw * yaw + pitch * pitch < 36.0) return Zone::Centre;
  if (std::abs(yaw) > std::abs(pitch)) return (yaw > 0.0) == positive_yaw_left ? Zone::Left : Zone::Right;
  return pitch >= 0.0 ? Zone::Up : Zone::Down;
}

/// Each sample owns the interval to its successor; the last one owns the
/// median interval.
inline std::vector<double> sample_weights(const std::vector<double>& time) {
  const std::size_t n = time.size();
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    w[i] = time[i + 1] - time[i];
    gaps.push_back(w[i]);
  }
  std::sort(gaps.begin(), gaps.end());
  const std::size_t m = gaps.size();
  w[n - 1] = m % 2 ? gaps[m / 2] : 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]);
  return w;
}

/// Time-weighted share of each zone among samples with t in [t0, t1).
/// Returns all zeros when the window holds no sample.
inline std::array<double, 5> zone_shares(const GazeTrack& t, const std::vector<double>& weights, double t0,
                                         double t1, bool positive_yaw_left = true) {
  std::array<double, 5> s{};
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.time[i] < t0 || t.time[i] >= t1) continue;
    s[static_cast<std::size_t>(zone_of(t.yaw[i], t.pitch[i], positive_yaw_left))] += weights[i];
    total += weights[i];
  }
  if (total > 0.0)
    for (auto& v : s) v /= total;
  return s;
}

/// Time-weighted left share over the whole track.
inline double overall_left_share(const GazeTrack& t, bool positive_yaw_left = true) {
  if (t.size() == 0) throw DataError("empty gaze track");
  const auto w = sample_weights(t.time);
  return zone_shares(t, w, -std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity(), positive_yaw_left)[0];
}

/// Left share in [onset - window, onset) minus the participant's overall left share.
inline double left_share_deviation(const GazeTrack& t, double onset, double overall_share,
                                   double window = 5.0, bool positive_yaw_left = true,
                                   const std::string& gap = "") {
  const auto w = sample_weights(t.time);
  bool any = false;
  for (double x : t.time) any = any || (x >= onset - window && x < onset);
  if (!any)
    throw DataError(fmt::format("gap {}: no gaze samples in the {} s before onset {}", gap, window, onset));
  return zone_shares(t, w, onset - window, onset, positive_yaw_left)[0] - overall_share;
}

namespace detail {

inline double sample_sd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace detail

/// Sample standard deviations (n - 1) of yaw and pitch in [onset - window, onset).
inline std::pair<double, double> gaze_dispersion(const GazeTrack& t, double onset, double window = 5.0,
                                                 const std::string& gap = "") {
  std::vector<double> y, p;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.time[i] >= onset - window && t.time[i] < onset) {
      y.push_back(t.yaw[i]);
      p.push_back(t.pitch[i]);
    }
  if (y.size() < 2)
    throw DataError(fmt::format("gap {}: {} gaze samples in the {} s before onset {}, need at least 2", gap,
                                y.size(), window, onset));
  return {detail::sample_sd(y), detail::sample_sd(p)};
}

/// (value - mean) / sd against the participant's own series, sd with n - 1.
inline double normalize_hr(std::span<const double> series, double value) {
  if (series.size() < 2) throw DataError("heart-rate normalization needs at least 2 samples");
  double m = 0.0;
  for (double v : series) m += v;
  m /= static_cast<double>(series.size());
  const double sd = detail::sample_sd(series);
  if (!(sd > 0.0)) throw DataError("heart-rate channel is flat (zero standard deviation)");
  return (value - m) / sd;
}

inline constexpr double kScrThreshold = 0.01;

/// Largest trough-to-peak rise, max_j (x_j - min_{i <= j} x_i); zero when it
/// does not reach `threshold`.
inline double scr_amplitude(std::span<const double> eda, double threshold = kScrThreshold) {
  if (eda.empty()) throw DataError("empty skin conductance window");
  double trough = eda[0];
  double best = 0.0;
  for (double v : eda) {
    trough = std::min(trough, v);
    best = std::max(best, v - trough);
  }
  return best >= threshold ? best : 0.0;
}

/// Amplitude of the response among samples with t in [onset, onset + window).
inline double scr_extract(std::span<const double> time, std::span<const double> eda, double onset,
                          double window = 4.0, double threshold = kScrThreshold, const std::string& gap = "") {
  std::vector<double> x;
  for (std::size_t i = 0; i < time.size(); ++i)
    if (time[i] >= onset && time[i] < onset + window && std::isfinite(eda[i])) x.push_back(eda[i]);
  if (x.empty())
    throw DataError(fmt::format("gap {}: no skin conductance samples in [{}, {})", gap, onset, onset + window));
  return scr_amplitude(x, threshold);
}

// ---------------------------------------------------------------------------
// Fixations (static tasks)

struct FixationRecord {
  std::string task_id;
  int attribute = -1;  ///< -1: outside every attribute region
  int alternative = 0;
  double duration = 0.0;  ///< seconds
};

struct FixationShares {
  Eigen::VectorXd count;
  Eigen::VectorXd time;
  std::size_t excluded = 0;
};

/// Count and duration shares per attribute, pooled over alternatives.
inline FixationShares fixation_shares(std::span<const FixationRecord> fixations, int attributes,
                                      const std::string& task_id = "") {
  FixationShares s;
  s.count = Eigen::VectorXd::Zero(attributes);
  s.time = Eigen::VectorXd::Zero(attributes);
  for (const auto& f : fixations) {
    if (!(f.duration > 0.0))
      throw DataError(fmt::format("task {}: fixation duration {} must be > 0", task_id, f.duration));
    if (f.attribute < 0 || f.attribute >= attributes) {
      ++s.excluded;
      continue;
    }
    s.count(f.attribute) += 1.0;
    s.time(f.attribute) += f.duration;
  }
  if (s.count.sum() == 0.0)
    throw DataError(fmt::format("task {}: no fixations on any attribute", task_id));
  s.count /= s.count.sum();
  s.time /= s.time.sum();
  return s;
}

// ---------------------------------------------------------------------------
// Gap feature extraction

struct FeatureOptions {
  double gaze_window = 5.0;  ///< seconds before onset
  double scr_window = 4.0;   ///< seconds after onset
  double scr_threshold = kScrThreshold;
  bool positive_yaw_left = true;
};

struct GapEvent {
  std::string participant_id;
  std::string task_id;
  double onset = 0.0;
};

struct GapFeatures {
  double z_hr = 0.0;
  double z_scr = 0.0;
  double y_gaze_left = 0.0;
  double y_gaze_yaw_sd = 0.0;
  double y_gaze_pitch_sd = 0.0;
};

inline const std::vector<std::string>& gap_feature_output_columns() {
  static const std::vector<std::string> c{"z_hr", "z_scr", "y_gaze_left", "y_gaze_yaw_sd", "y_gaze_pitch_sd"};
  return c;
}

/// Features of each event of one participant, in event order.
inline std::vector<GapFeatures> gap_features(const SignalStream& stream, const std::vector<GapEvent>& events,
                                             const FeatureOptions& opt, std::size_t* skipped = nullptr) {
  stream.validate();
  const GazeTrack track = recenter(aggregate_stream(stream));
  if (skipped) *skipped = track.skipped;
  const double overall = overall_left_share(track, opt.positive_yaw_left);
  std::vector<double> hr_t, hr, eda_t, eda;
  for (const auto& s : stream.samples) {
    if (std::isfinite(s.hr)) {
      hr_t.push_back(s.time);
      hr.push_back(s.hr);
    }
    if (std::isfinite(s.eda)) {
      eda_t.push_back(s.time);
      eda.push_back(s.eda);
    }
  }
  std::vector<GapFeatures> out;
  for (const auto& e : events) {
    GapFeatures f;
    // Heart rate at onset: last reading at or before it.
    auto it = std::upper_bound(hr_t.begin(), hr_t.end(), e.onset);
    if (it == hr_t.begin())
      throw DataError(fmt::format("participant {}, gap {}: no heart-rate reading before onset {}",
                                  e.participant_id, e.task_id, e.onset));
    f.z_hr = normalize_hr(hr, hr[static_cast<std::size_t>(it - hr_t.begin()) - 1]);
    f.z_scr = scr_extract(eda_t, eda, e.onset, opt.scr_window, opt.scr_threshold, e.task_id);
    f.y_gaze_left = left_share_deviation(track, e.onset, overall, opt.gaze_window, opt.positive_yaw_left, e.task_id);
    std::tie(f.y_gaze_yaw_sd, f.y_gaze_pitch_sd) = gaze_dispersion(track, e.onset, opt.gaze_window, e.task_id);
    out.push_back(f);
  }
  return out;
}

/// Signal CSV columns; every one must be present, channel cells may be empty.
inline const std::vector<std::string>& signal_columns() {
  static const std::vector<std::string> c{"participant_id", "time",        "head_yaw", "head_pitch",
                                          "left_yaw",       "left_pitch",  "right_yaw", "right_pitch",
                                          "hr",             "eda"};
  return c;
}

inline void require_columns(const CsvTable& t, const std::vector<std::string>& cols, const char* what) {
  std::vector<std::string> missing;
  for (const auto& c : cols)
    if (!t.column(c)) missing.push_back(c);
  if (!missing.empty())
    throw DataError(fmt::format("{}: not a {} file; missing column(s): {}", t.source, what,
                                fmt::join(missing, ", ")));
}

/// Streams per participant, in order of first appearance.
inline std::vector<SignalStream> signal_streams(const CsvTable& t) {
  require_columns(t, signal_columns(), "raw signal");
  std::vector<int> col;
  for (const auto& c : signal_columns()) col.push_back(*t.column(c));
  std::vector<SignalStream> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& pid = t.rows[r][static_cast<std::size_t>(col[0])];
    auto [it, inserted] = index.emplace(pid, out.size());
    if (inserted) out.push_back(SignalStream{pid, {}});
    SignalSample s;
    s.time = t.number(r, col[1]);
    if (!std::isfinite(s.time))
      throw DataError(fmt::format("{}: row {}: missing timestamp", t.source, r + 2));
    double* ch[] = {&s.head_yaw, &s.head_pitch, &s.left_yaw, &s.left_pitch,
                    &s.right_yaw, &s.right_pitch, &s.hr, &s.eda};
    for (int c = 0; c < 8; ++c) *ch[c] = t.number(r, col[static_cast<std::size_t>(c + 2)]);
    out[it->second].samples.push_back(s);
  }
  return out;
}

}  // namespace dftphys
