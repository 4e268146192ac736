#pragma once

// Cell-averaged fields on [0,1] and their space-time stacks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "asep/csv.hpp"
#include "asep/errors.hpp"

namespace asep {

/// M equal cells partitioning [0,1]; cell j covers [j/M, (j+1)/M) and
/// carries the average of the represented function over that cell.
class GridField {
 public:
  GridField() = default;
  GridField(std::size_t m, double value) : cells_(m, value) { check(); }
  explicit GridField(std::vector<double> cells) : cells_(std::move(cells)) { check(); }

  std::size_t size() const noexcept { return cells_.size(); }
  double dx() const noexcept { return 1.0 / static_cast<double>(cells_.size()); }
  double x_center(std::size_t j) const noexcept {
    return (static_cast<double>(j) + 0.5) / static_cast<double>(cells_.size());
  }

  double operator[](std::size_t j) const noexcept { return cells_[j]; }
  double& operator[](std::size_t j) noexcept { return cells_[j]; }
  std::span<const double> values() const noexcept { return cells_; }
  std::span<double> values() noexcept { return cells_; }

  /// Value of the cell containing x; x = 1 maps to the last cell.
  double value_at(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("GridField::value_at: x outside [0,1]");
    auto j = static_cast<std::size_t>(x * static_cast<double>(cells_.size()));
    return cells_[std::min(j, cells_.size() - 1)];
  }

  double integral() const noexcept {
    double s = 0.0;
    for (double v : cells_) s += v;
    return s * dx();
  }

  double min() const { return *std::min_element(cells_.begin(), cells_.end()); }
  double max() const { return *std::max_element(cells_.begin(), cells_.end()); }

  friend bool operator==(const GridField&, const GridField&) = default;

 private:
  void check() const {
    if (cells_.empty()) throw DomainError("GridField: need at least one cell");
  }
  std::vector<double> cells_;
};

/// Cell-average restriction of a field onto m cells. Overlaps are computed in
/// integer units of 1/(M*m), so the weights are exact.
inline GridField restrict_to(const GridField& f, std::size_t m) {
  const std::size_t ms = f.size();
  if (m == ms) return f;
  if (m == 0) throw DomainError("restrict_to: need at least one cell");
  std::vector<double> out(m, 0.0);
  const std::uint64_t src = ms, dst = m;
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint64_t lo = j * src, hi = (j + 1) * src;  // target cell in units 1/(ms*m)
    std::size_t i = static_cast<std::size_t>(lo / dst);
    double acc = 0.0;
    for (; i < ms; ++i) {
      const std::uint64_t clo = i * dst, chi = (i + 1) * dst;
      if (clo >= hi) break;
      const std::uint64_t ov = std::min(hi, chi) - std::max(lo, clo);
      acc += f[i] * static_cast<double>(ov);
    }
    out[j] = acc / static_cast<double>(src);
  }
  return GridField(std::move(out));
}

namespace detail {

inline std::pair<GridField, GridField> align(const GridField& a, const GridField& b) {
  const std::size_t m = std::min(a.size(), b.size());
  return {restrict_to(a, m), restrict_to(b, m)};
}

/// Length of cell j (of m) that lies inside [lo, hi].
inline double window_overlap(std::size_t j, std::size_t m, double lo, double hi) {
  const double a = static_cast<double>(j) / static_cast<double>(m);
  const double b = static_cast<double>(j + 1) / static_cast<double>(m);
  return std::max(0.0, std::min(b, hi) - std::max(a, lo));
}

}  // namespace detail

/// Integral of |a - b| over [lo, hi] after restriction onto the coarser grid.
inline double l1_distance(const GridField& a, const GridField& b, double lo = 0.0, double hi = 1.0) {
  auto [ra, rb] = detail::align(a, b);
  const std::size_t m = ra.size();
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += std::abs(ra[j] - rb[j]) * detail::window_overlap(j, m, lo, hi);
  return s;
}

/// L2 norm of a - b over [lo, hi] after restriction onto the coarser grid.
inline double l2_distance(const GridField& a, const GridField& b, double lo = 0.0, double hi = 1.0) {
  auto [ra, rb] = detail::align(a, b);
  const std::size_t m = ra.size();
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double d = ra[j] - rb[j];
    s += d * d * detail::window_overlap(j, m, lo, hi);
  }
  return std::sqrt(s);
}

/// Fields sampled at increasing times, all on the same grid.
struct SpaceTimeField {
  std::vector<double> times;
  std::vector<GridField> frames;

  std::size_t size() const noexcept { return times.size(); }

  void push(double t, GridField f) {
    if (!frames.empty() && f.size() != frames.front().size())
      throw DomainError("SpaceTimeField: all frames must share one grid");
    if (!times.empty() && !(t > times.back()))
      throw DomainError("SpaceTimeField: sample times must increase");
    times.push_back(t);
    frames.push_back(std::move(f));
  }

  std::size_t cells() const { return frames.empty() ? 0 : frames.front().size(); }
};

inline void write_field_csv(std::ostream& os, const GridField& f) {
  os << "x_center,value\n";
  for (std::size_t j = 0; j < f.size(); ++j) os << csv::num(f.x_center(j)) << ',' << csv::num(f[j]) << '\n';
}

inline void write_space_time_csv(std::ostream& os, const SpaceTimeField& f,
                                 const std::string& value_name = "value") {
  os << "t,x_center," << value_name << '\n';
  for (std::size_t k = 0; k < f.size(); ++k) {
    const auto& g = f.frames[k];
    const std::string t = csv::num(f.times[k]);
    for (std::size_t j = 0; j < g.size(); ++j)
      os << t << ',' << csv::num(g.x_center(j)) << ',' << csv::num(g[j]) << '\n';
  }
}

/// Reads a space-time CSV (t, x_center, value). Rows for one time must be
/// contiguous and ordered by x_center.
inline SpaceTimeField read_space_time_csv(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = csv::read_rows(path, &header);
  if (header.size() < 3) throw ConfigError("space-time csv needs columns t,x_center,value: " + path);
  SpaceTimeField out;
  std::vector<double> cells;
  double current_t = 0.0;
  bool open = false;
  for (const auto& r : rows) {
    if (r.size() < 3) throw ConfigError("space-time csv: short row in " + path);
    const double t = csv::to_double(r[0]);
    if (open && t != current_t) {
      out.push(current_t, GridField(std::move(cells)));
      cells.clear();
    }
    current_t = t;
    open = true;
    cells.push_back(csv::to_double(r[2]));
  }
  if (open) out.push(current_t, GridField(std::move(cells)));
  return out;
}

}  // namespace asep
