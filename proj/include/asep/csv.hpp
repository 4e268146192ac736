#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "asep/errors.hpp"

namespace asep::csv {

/// Fixed-format rendering so that identical values always produce identical bytes.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("csv: not a number: '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("csv: trailing characters in '" + s + "'");
  return v;
}

/// Reads a CSV file with a one-line header. Returns the data rows.
inline std::vector<std::vector<std::string>> read_rows(const std::string& path,
                                                       std::vector<std::string>* header = nullptr) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: empty file " + path);
  if (header) *header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split(line));
  }
  return rows;
}

}  // namespace asep::csv
