#pragma once

// Microscopic functionals of a configuration: empirical and block-averaged
// densities, smoothed currents, and the block-estimate residuals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asep/core_model.hpp"
#include "asep/grid_field.hpp"

namespace asep {

inline double flux_J(double u) noexcept { return u * (1.0 - u); }

/// Empirical density with N equal cells; cell i carries eta_i. The two
/// half-width end cells of the centred partition are merged into their
/// neighbours, so the integral equals (sum eta)/N exactly.
inline GridField empirical_density(const LatticeConfig& eta) {
  std::vector<double> cells(eta.size());
  for (std::size_t k = 0; k < eta.size(); ++k) cells[k] = eta[k];
  return GridField(std::move(cells));
}

/// Exact triangular-kernel sums: entry i (1-based) of the result is
///   sum_{m=i-K+1}^{i+K-1} (K - |i-m|) x_m,
/// defined for K <= i and i+K-1 <= x.size(). Computed from second-order
/// prefix sums in integer arithmetic.
inline std::vector<std::int64_t> triangular_sums(std::span<const std::int64_t> x, std::size_t k) {
  const std::size_t n = x.size();
  // P[j] = sum_{m<=j} S[m], S[m] = sum_{l<=m} x_l, 1-based with P[0] = S[0] = 0.
  std::vector<std::int64_t> p(n + 1, 0);
  std::int64_t s = 0;
  for (std::size_t j = 1; j <= n; ++j) {
    s += x[j - 1];
    p[j] = p[j - 1] + s;
  }
  auto at = [&](std::ptrdiff_t j) { return j <= 0 ? std::int64_t{0} : p[static_cast<std::size_t>(j)]; };
  std::vector<std::int64_t> out;
  if (n + 1 < 2 * k) return out;
  for (std::size_t i = k; i + k - 1 <= n; ++i) {
    const auto ii = static_cast<std::ptrdiff_t>(i), kk = static_cast<std::ptrdiff_t>(k);
    out.push_back(at(ii + kk - 1) - 2 * at(ii - 1) + at(ii - kk - 1));
  }
  return out;
}

/// Uniform and smoothly weighted block averages of one configuration.
///   bar[i-K] = (1/K) sum_{i'=0}^{K-1} eta_{i-i'},            i = K..N
///   hat[i-K] = sum_{|i'|<K} w_{i'} eta_{i-i'},                i = K..N-K+1
///   hat_current[i-K] = sum_{|i'|<K} w_{i'} J_{i-i',i-i'+1},   i = K..N-K
/// with w_{i'} = (K-|i'|)/K^2 and J_{j,j+1} = eta_j (1 - eta_{j+1}).
/// The *_num arrays hold the exact integer numerators (K*bar, K^2*hat, K^2*hat_current).
struct BlockAverages {
  std::size_t K = 1;
  std::vector<double> bar, hat, hat_current;
  std::vector<std::int64_t> bar_num, hat_num, hat_current_num;

  double bar_at(std::size_t i) const { return bar.at(i - K); }
  double hat_at(std::size_t i) const { return hat.at(i - K); }
  double current_at(std::size_t i) const { return hat_current.at(i - K); }
};

inline BlockAverages block_averages(const LatticeConfig& eta, std::size_t k) {
  const std::size_t n = eta.size();
  if (k < 1 || 2 * k >= n) throw DomainError("block_averages: need 1 <= K < N/2");
  BlockAverages b;
  b.K = k;
  std::vector<std::int64_t> x(n), j(n - 1);
  for (std::size_t m = 0; m < n; ++m) x[m] = eta[m];
  for (std::size_t m = 0; m + 1 < n; ++m) j[m] = eta[m] * (1 - eta[m + 1]);

  std::int64_t run = 0;
  for (std::size_t m = 0; m < k; ++m) run += x[m];
  b.bar_num.push_back(run);
  for (std::size_t i = k + 1; i <= n; ++i) {
    run += x[i - 1] - x[i - 1 - k];
    b.bar_num.push_back(run);
  }
  b.hat_num = triangular_sums(x, k);
  b.hat_current_num = triangular_sums(j, k);

  const double dk = static_cast<double>(k), dk2 = dk * dk;
  b.bar.reserve(b.bar_num.size());
  for (auto v : b.bar_num) b.bar.push_back(static_cast<double>(v) / dk);
  for (auto v : b.hat_num) b.hat.push_back(static_cast<double>(v) / dk2);
  for (auto v : b.hat_current_num) b.hat_current.push_back(static_cast<double>(v) / dk2);
  return b;
}

/// Smoothed empirical density on N cells: cell i carries hat eta_{i,K} for
/// i = K+1..N-K and the nearest defined value outside that window.
inline GridField smoothed_density(const LatticeConfig& eta, std::size_t k) {
  const auto b = block_averages(eta, k);
  const std::size_t n = eta.size();
  std::vector<double> cells(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t c = std::clamp(i, k + 1, n - k);
    cells[i - 1] = b.hat_at(c);
  }
  return GridField(std::move(cells));
}

/// Exact integer numerators K^2 * (smoothed cell value), same layout as smoothed_density.
inline std::vector<std::int64_t> smoothed_density_numerators(const LatticeConfig& eta, std::size_t k) {
  const std::size_t n = eta.size();
  if (k < 1 || 2 * k >= n) throw DomainError("smoothed_density: need 1 <= K < N/2");
  std::vector<std::int64_t> x(n);
  for (std::size_t m = 0; m < n; ++m) x[m] = eta[m];
  const auto hat = triangular_sums(x, k);
  std::vector<std::int64_t> out(n);
  for (std::size_t i = 1; i <= n; ++i) out[i - 1] = hat[std::clamp(i, k + 1, n - k) - k];
  return out;
}

/// Microscopic currents j_{0,1}, ..., j_{N,N+1} of the generator at fixed rates.
inline std::vector<double> microscopic_currents(const LatticeConfig& eta, const BoundaryRates& r,
                                                const ScalingPlan& plan) {
  const std::size_t n = eta.size();
  std::vector<double> j(n + 1);
  j[0] = plan.sigma_tilde * (r.alpha - (r.alpha + r.gamma) * eta[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const double a = eta[i - 1], b = eta[i];
    j[i] = plan.p * a * (1.0 - b) + plan.sigma * (a - b);
  }
  j[n] = plan.sigma_tilde * ((r.beta + r.delta) * eta[n - 1] - r.delta);
  return j;
}

inline std::vector<double> microscopic_currents(const LatticeConfig& eta, const RateSchedule& schedule,
                                                const ScalingPlan& plan, double t) {
  return microscopic_currents(eta, schedule.rates_at(t), plan);
}

/// Per-site residuals of the block estimates for one snapshot.
struct BlockResiduals {
  double one_block = 0.0;  ///< mean over i=K..N-K of (hat J_i - J(hat eta_i))^2
  double h1 = 0.0;         ///< mean over i=K..N-K of (hat eta_{i+1} - hat eta_i)^2
  double left = 0.0;       ///< (hat eta_{K} - rho_-)^2
  double right = 0.0;      ///< (hat eta_{N-K} - rho_+)^2
};

inline BlockResiduals block_residuals(const BlockAverages& b, std::size_t n, ReservoirDensities rho) {
  const std::size_t k = b.K;
  BlockResiduals r;
  double s1 = 0.0, s2 = 0.0;
  std::size_t count = 0;
  for (std::size_t i = k; i <= n - k; ++i, ++count) {
    const double d = b.current_at(i) - flux_J(b.hat_at(i));
    s1 += d * d;
    const double g = b.hat_at(i + 1) - b.hat_at(i);
    s2 += g * g;
  }
  r.one_block = s1 / static_cast<double>(count);
  r.h1 = s2 / static_cast<double>(count);
  const double dl = b.hat_at(k) - rho.rho_minus;
  const double dr = b.hat_at(n - k) - rho.rho_plus;
  r.left = dl * dl;
  r.right = dr * dr;
  return r;
}

inline BlockResiduals block_residuals(const LatticeConfig& eta, std::size_t k, ReservoirDensities rho) {
  return block_residuals(block_averages(eta, k), eta.size(), rho);
}

/// A configuration observed at time t.
struct TimedConfig {
  double t = 0.0;
  LatticeConfig config;
};

namespace detail {

template <class Member>
double time_average(std::span<const TimedConfig> traj, std::size_t k, const RateSchedule* schedule,
                    Member member) {
  if (traj.empty()) throw DomainError("residual: empty trajectory");
  double s = 0.0;
  for (const auto& snap : traj) {
    const ReservoirDensities rho =
        schedule ? reservoir_densities(*schedule, snap.t) : ReservoirDensities{0.0, 0.0};
    s += member(block_residuals(snap.config, k, rho));
  }
  return s / static_cast<double>(traj.size());
}

}  // namespace detail

/// Time average (over equally spaced snapshots) of the per-site one-block residual.
inline double one_block_residual(std::span<const TimedConfig> traj, std::size_t k) {
  return detail::time_average(traj, k, nullptr, [](const BlockResiduals& r) { return r.one_block; });
}

inline double h1_residual(std::span<const TimedConfig> traj, std::size_t k) {
  return detail::time_average(traj, k, nullptr, [](const BlockResiduals& r) { return r.h1; });
}

struct BoundaryResidual {
  double left = 0.0;
  double right = 0.0;
};

inline BoundaryResidual boundary_block_residual(std::span<const TimedConfig> traj, std::size_t k,
                                                const RateSchedule& schedule) {
  return {detail::time_average(traj, k, &schedule, [](const BlockResiduals& r) { return r.left; }),
          detail::time_average(traj, k, &schedule, [](const BlockResiduals& r) { return r.right; })};
}

/// Mean and standard error of independent replica values. Values are summed
/// in sorted order, so the result does not depend on replica order.
struct EnsembleStat {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline EnsembleStat ensemble_stat(std::vector<double> values) {
  EnsembleStat s;
  s.n = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    std::vector<double> sq;
    sq.reserve(s.n);
    for (double v : values) sq.push_back((v - s.mean) * (v - s.mean));
    std::sort(sq.begin(), sq.end());
    double ss = 0.0;
    for (double v : sq) ss += v;
    s.se = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
  }
  return s;
}

}  // namespace asep
