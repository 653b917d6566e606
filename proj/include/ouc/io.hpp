#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ouc/error.hpp"
#include "ouc/matrix.hpp"
#include "ouc/ou.hpp"
#include "ouc/wasserstein.hpp"

namespace ouc {

/// Round-trip decimal form used for every CSV cell.
[[nodiscard]] inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Comma-joined %.17g row.
[[nodiscard]] inline std::string csv_row(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

/// "prefix1,...,prefixN"
[[nodiscard]] inline std::string numbered_header(const std::string& prefix, std::size_t n) {
  std::string out;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i > 1) out += ',';
    out += prefix + std::to_string(i);
  }
  return out;
}

/// One matrix row per line, no header.
[[nodiscard]] inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) out += csv_row(m.row(r)) + '\n';
  return out;
}

[[nodiscard]] inline Matrix matrix_from_csv(const std::string& text) {
  std::vector<Vector> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Vector row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      while (end != nullptr && (*end == ' ' || *end == '\t')) ++end;
      if (end == cell.c_str() || (end != nullptr && *end != '\0')) {
        throw Error(ErrorKind::Config, "bad number '" + cell + "' on CSV line " + std::to_string(line_no));
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::Config, "ragged CSV matrix at line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Config, "empty CSV matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorKind::Config, "write failed for " + path);
}

/// Header `t,x1,...,xm`, one row per grid time.
[[nodiscard]] inline std::string path_to_csv(const SamplePath& path, bool header = true) {
  std::string out;
  const std::size_t m = path.states.empty() ? 0 : path.states.front().size();
  if (header) out += "t," + numbered_header("x", m) + '\n';
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    out += fmt(path.times[k]);
    for (double v : path.states[k]) out += ',' + fmt(v);
    out += '\n';
  }
  return out;
}

/// Header `x1,...,xm`, one sample per row.
[[nodiscard]] inline std::string samples_to_csv(const std::vector<Vector>& samples) {
  const std::size_t m = samples.empty() ? 0 : samples.front().size();
  std::string out = numbered_header("x", m) + '\n';
  for (const auto& s : samples) out += csv_row(s) + '\n';
  return out;
}

inline constexpr const char* kBoundsCsvHeader =
    "t,p,upper_shift,upper_disint,lower_shift,lower_mean,wp_estimate,mc_n,seed";

[[nodiscard]] inline std::string bounds_csv_row(const BoundBundle& b) {
  return csv_row(Vector{b.t, b.p, b.upper_shift, b.upper_disintegration, b.lower_shift, b.lower_mean, b.wp_estimate}) +
         ',' + std::to_string(b.mc_n) + ',' + std::to_string(b.seed);
}

}  // namespace ouc
