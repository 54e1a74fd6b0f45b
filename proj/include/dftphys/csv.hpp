#pragma once

// Minimal RFC-4180 style CSV reading and writing.

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dftphys/error.hpp"

namespace dftphys {

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<int> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return std::nullopt;
  }

  /// Numeric cell; empty cells are NaN (missing), unparsable cells throw.
  double number(std::size_t row, int col) const {
    const std::string& s = rows[row][static_cast<std::size_t>(col)];
    if (s.empty() || s == "NA" || s == "nan" || s == "NaN")
      return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    if (first < last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    while (ptr < last && *ptr == ' ') ++ptr;
    if (ec != std::errc() || ptr != last)
      throw DataError(fmt::format("{}: row {}, column '{}': '{}' is not a number", source, row + 2,
                                  header[static_cast<std::size_t>(col)], s));
    return v;
  }
};

namespace detail {

// Splits one logical record; returns false at end of input.
inline bool read_record(std::istream& in, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      out.push_back(std::move(field));
      return true;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  out.push_back(std::move(field));
  return true;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  t.source = source;
  if (!detail::read_record(in, t.header) || (t.header.size() == 1 && t.header[0].empty()))
    throw DataError(fmt::format("{}: empty input (no header row)", source));
  if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
  std::vector<std::string> rec;
  while (detail::read_record(in, rec)) {
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != t.header.size())
      throw DataError(fmt::format("{}: row {} has {} fields, header has {}", source,
                                  t.rows.size() + 2, rec.size(), t.header.size()));
    t.rows.push_back(rec);
  }
  return t;
}

class CsvWriter {
public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      write_cell(cells[i]);
    }
    out_ << '\n';
  }

private:
  void write_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
      out_ << s;
      return;
    }
    out_ << '"';
    for (char c : s) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }

  std::ostream& out_;
};

}  // namespace dftphys
