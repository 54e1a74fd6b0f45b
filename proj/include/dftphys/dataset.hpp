#pragma once

// Choice datasets in wide form: one row per observation, and their CSV schema.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/csv.hpp"
#include "dftphys/dft.hpp"
#include "dftphys/error.hpp"

namespace dftphys {

enum class Application { Static, Gap };

inline const char* to_string(Application a) { return a == Application::Static ? "static" : "gap"; }

inline Application parse_application(const std::string& s) {
  if (s == "static") return Application::Static;
  if (s == "gap") return Application::Gap;
  throw SpecError(fmt::format("unknown application '{}' (expected static or gap)", s));
}

/// Covariates of the gap-acceptance design, in schema order.
inline const std::vector<std::string>& gap_design_columns() {
  static const std::vector<std::string> cols{"gap_index", "x_gapsize", "x_pos",
                                             "x_speed",   "z_age",     "z_reg"};
  return cols;
}

/// Physiological features of the gap-acceptance schema, in schema order.
inline const std::vector<std::string>& gap_feature_columns() {
  static const std::vector<std::string> cols{"x_scen",      "z_hr",          "z_scr",
                                             "y_gaze_left", "y_gaze_yaw_sd", "y_gaze_pitch_sd"};
  return cols;
}

inline const std::vector<std::string>& share_feature_names() {
  static const std::vector<std::string> names{"count_share", "time_share"};
  return names;
}

struct Observation {
  std::string participant_id;
  std::string task_id;
  int chosen = 0;
  Eigen::MatrixXd attributes;           ///< J x K (static designs only)
  std::vector<double> scalars;          ///< aligned with Dataset::scalar_names; NaN = missing
  std::vector<Eigen::VectorXd> shares;  ///< aligned with Dataset::vector_names, K entries each
};

/// A set of observations sharing one schema.
///
/// Static data: `attributes` holds the J x K attribute levels, the per-attribute
/// fixation shares live in `shares`. Gap data: two alternatives (0 = accept,
/// 1 = reject) and all covariates in `scalars`.
struct Dataset {
  Application application = Application::Static;
  int alternatives = 0;
  std::vector<std::string> attribute_names;
  std::vector<std::string> scalar_names;
  std::vector<std::string> vector_names;
  std::vector<Observation> rows;

  std::size_t size() const { return rows.size(); }
  int attribute_count() const { return static_cast<int>(attribute_names.size()); }

  std::optional<int> scalar_index(const std::string& name) const {
    auto it = std::find(scalar_names.begin(), scalar_names.end(), name);
    if (it == scalar_names.end()) return std::nullopt;
    return static_cast<int>(it - scalar_names.begin());
  }
  std::optional<int> vector_index(const std::string& name) const {
    auto it = std::find(vector_names.begin(), vector_names.end(), name);
    if (it == vector_names.end()) return std::nullopt;
    return static_cast<int>(it - vector_names.begin());
  }

  int require_scalar(const std::string& name) const {
    if (auto i = scalar_index(name)) return *i;
    throw DataError(fmt::format("dataset has no column '{}'", name));
  }

  ChoiceTask task(std::size_t i) const {
    const Observation& o = rows[i];
    return ChoiceTask{o.attributes, o.chosen, o.task_id, o.participant_id};
  }

  /// Sum over observations of ln(1/J): the equal-shares null log-likelihood.
  double null_log_likelihood() const {
    return static_cast<double>(rows.size()) * std::log(1.0 / alternatives);
  }
};

inline Dataset make_static_dataset(std::vector<std::string> attribute_names, int alternatives) {
  Dataset d;
  d.application = Application::Static;
  d.alternatives = alternatives;
  d.attribute_names = std::move(attribute_names);
  d.vector_names = share_feature_names();
  return d;
}

inline Dataset make_gap_dataset() {
  Dataset d;
  d.application = Application::Gap;
  d.alternatives = 2;
  d.scalar_names = gap_design_columns();
  for (const auto& f : gap_feature_columns()) d.scalar_names.push_back(f);
  return d;
}

/// Full-precision number formatting for machine-readable output.
inline std::string format_full(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{:.17g}", v);
}

inline std::vector<std::string> dataset_header(const Dataset& d) {
  std::vector<std::string> h{"participant_id", "task_id", "chosen"};
  if (d.application == Application::Static) {
    for (int j = 0; j < d.alternatives; ++j)
      for (const auto& a : d.attribute_names) h.push_back(fmt::format("alt{}_{}", j + 1, a));
    for (const auto& v : d.vector_names)
      for (const auto& a : d.attribute_names) h.push_back(v + "_" + a);
  }
  for (const auto& s : d.scalar_names) h.push_back(s);
  return h;
}

inline void write_dataset(const Dataset& d, std::ostream& out) {
  CsvWriter w(out);
  w.row(dataset_header(d));
  for (const auto& o : d.rows) {
    std::vector<std::string> cells{o.participant_id, o.task_id, std::to_string(o.chosen)};
    if (d.application == Application::Static) {
      for (int j = 0; j < d.alternatives; ++j)
        for (int k = 0; k < d.attribute_count(); ++k) cells.push_back(format_full(o.attributes(j, k)));
      for (const auto& v : o.shares)
        for (Eigen::Index k = 0; k < v.size(); ++k) cells.push_back(format_full(v(k)));
    }
    for (double s : o.scalars) cells.push_back(format_full(s));
    w.row(cells);
  }
}

inline void write_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path));
  write_dataset(d, out);
}

/// Parses a wide-form choice CSV. The presence of a `gap_index` column selects
/// the gap schema; otherwise `alt<j>_<attribute>` columns define a static design.
inline Dataset read_dataset(std::istream& in, const std::string& source = "<stream>") {
  CsvTable t = read_csv(in, source);
  for (const char* req : {"participant_id", "task_id", "chosen"})
    if (!t.column(req))
      throw DataError(fmt::format("{}: missing required column '{}'", source, req));

  Dataset d;
  std::vector<int> used(t.header.size(), 0);
  auto mark = [&](const std::string& c) { used[static_cast<std::size_t>(*t.column(c))] = 1; };
  mark("participant_id");
  mark("task_id");
  mark("chosen");

  std::vector<std::vector<int>> attr_cols;    // [alt][attr] column index
  std::vector<std::vector<int>> share_cols;   // [vector feature][attr]
  if (t.column("gap_index")) {
    d = make_gap_dataset();
    for (const auto& c : gap_design_columns())
      if (!t.column(c))
        throw DataError(fmt::format("{}: gap schema requires column '{}'", source, c));
  } else {
    std::vector<std::string> attrs;
    for (const auto& h : t.header)
      if (h.rfind("alt1_", 0) == 0) attrs.push_back(h.substr(5));
    if (attrs.empty())
      throw DataError(fmt::format(
          "{}: no attribute columns (expected alt1_<attribute>... or a gap_index column)", source));
    int J = 0;
    while (t.column(fmt::format("alt{}_{}", J + 1, attrs.front()))) ++J;
    if (J < 2) throw DataError(fmt::format("{}: static schema needs at least alt1_ and alt2_ columns", source));
    d = make_static_dataset(attrs, J);
    for (int j = 0; j < J; ++j) {
      attr_cols.emplace_back();
      for (const auto& a : attrs) {
        const std::string name = fmt::format("alt{}_{}", j + 1, a);
        auto c = t.column(name);
        if (!c) throw DataError(fmt::format("{}: missing attribute column '{}'", source, name));
        attr_cols.back().push_back(*c);
        mark(name);
      }
    }
    d.vector_names.clear();
    for (const auto& v : share_feature_names()) {
      std::vector<int> cols;
      for (const auto& a : attrs)
        if (auto c = t.column(v + "_" + a)) cols.push_back(*c);
      if (cols.empty()) continue;
      if (cols.size() != attrs.size())
        throw DataError(fmt::format("{}: '{}' columns present for only some attributes", source, v));
      for (const auto& a : attrs) mark(v + "_" + a);
      d.vector_names.push_back(v);
      share_cols.push_back(std::move(cols));
    }
    d.scalar_names.clear();
  }
  // Remaining numeric columns become scalar covariates.
  if (d.application == Application::Gap) {
    std::vector<std::string> present;
    for (const auto& c : d.scalar_names)
      if (t.column(c)) present.push_back(c);
    d.scalar_names = present;
  }
  for (const auto& c : d.scalar_names) mark(c);
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (!used[c]) d.scalar_names.push_back(t.header[c]);

  std::vector<int> scalar_cols;
  for (const auto& c : d.scalar_names) scalar_cols.push_back(*t.column(c));

  const int pid = *t.column("participant_id");
  const int tid = *t.column("task_id");
  const int cho = *t.column("chosen");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Observation o;
    o.participant_id = row[static_cast<std::size_t>(pid)];
    o.task_id = row[static_cast<std::size_t>(tid)];
    const double chosen = t.number(r, cho);
    if (std::isnan(chosen) || chosen != std::floor(chosen) || chosen < 0 || chosen >= d.alternatives)
      throw DataError(fmt::format("{}: row {} (task {}): chosen must be an integer in [0, {})",
                                  source, r + 2, o.task_id, d.alternatives));
    o.chosen = static_cast<int>(chosen);
    if (d.application == Application::Static) {
      o.attributes.resize(d.alternatives, d.attribute_count());
      for (int j = 0; j < d.alternatives; ++j)
        for (int k = 0; k < d.attribute_count(); ++k) {
          const double v = t.number(r, attr_cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
          if (!std::isfinite(v))
            throw DataError(fmt::format("{}: row {} (task {}): missing attribute level {}", source,
                                        r + 2, o.task_id,
                                        t.header[static_cast<std::size_t>(attr_cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)])]));
          o.attributes(j, k) = v;
        }
      for (const auto& cols : share_cols) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) v(static_cast<Eigen::Index>(k)) = t.number(r, cols[k]);
        o.shares.push_back(std::move(v));
      }
    }
    for (int c : scalar_cols) o.scalars.push_back(t.number(r, c));
    d.rows.push_back(std::move(o));
  }
  return d;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  return read_dataset(in, path);
}

}  // namespace dftphys
