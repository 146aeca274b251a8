#pragma once

// Numeric CSV tables written by the harness. The first line is a comment
// "# lightcone-lab <experiment> <timestamp>", then the column header, then
// one row per point with '%.17g' values, ',' separators and LF endings.
// Everything after the first line is a pure function of the configuration.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lightcone/error.hpp"

namespace lightcone {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  explicit Table(std::vector<std::string> cols = {}) : columns(std::move(cols)) {}

  void add(std::vector<double> row) {
    require(row.size() == columns.size(), errc::shape, "row width does not match the table header");
    rows.push_back(std::move(row));
  }

  size_t column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    fail(errc::config, "no column '" + name + "'");
  }

  std::vector<double> values(const std::string& name) const {
    const size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_table_body(std::ostream& os, const Table& t) {
  for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_number(r[i]);
    os << '\n';
  }
}

inline void write_table(std::ostream& os, const Table& t, const std::string& experiment,
                        const std::string& timestamp) {
  os << "# lightcone-lab " << experiment << ' ' << timestamp << '\n';
  write_table_body(os, t);
}

/// Parses a table written by write_table; '#' lines are skipped.
inline Table read_table(std::istream& is) {
  Table t;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      header = true;
      continue;
    }
    require(cells.size() == t.columns.size(), errc::config, "malformed CSV row '" + line + "'");
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      double v = std::strtod(c.c_str(), &end);
      require(end && *end == '\0' && !c.empty(), errc::config, "non-numeric CSV cell '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  require(header, errc::config, "CSV has no header");
  return t;
}

}  // namespace lightcone
