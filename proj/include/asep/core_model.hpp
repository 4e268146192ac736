#pragma once

// Static model data: lattice occupations, boundary rate schedules and the
// scaling parameters (p, sigma_N, sigma~_N, K) of the accelerated dynamics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "asep/errors.hpp"

namespace asep {

/// Occupation state eta in {0,1}^N. Storage is 0-based: entry k holds the
/// occupation of site k+1 of the lattice {1,...,N}.
class LatticeConfig {
 public:
  explicit LatticeConfig(std::size_t n) : occ_(n, 0) {
    if (n < 2) throw DomainError("LatticeConfig: need at least 2 sites");
  }

  explicit LatticeConfig(std::vector<std::uint8_t> occupations) : occ_(std::move(occupations)) {
    if (occ_.size() < 2) throw DomainError("LatticeConfig: need at least 2 sites");
    for (auto v : occ_) {
      if (v > 1) throw DomainError("LatticeConfig: occupations must be 0 or 1");
    }
  }

  std::size_t size() const noexcept { return occ_.size(); }
  std::uint8_t operator[](std::size_t k) const noexcept { return occ_[k]; }

  /// 1-based accessor matching the site labels 1..N.
  std::uint8_t site(std::size_t i) const { return occ_.at(i - 1); }

  void set(std::size_t k, std::uint8_t v) {
    if (v > 1) throw DomainError("LatticeConfig: occupations must be 0 or 1");
    occ_.at(k) = v;
  }
  void flip(std::size_t k) noexcept { occ_[k] ^= 1u; }
  void swap_bond(std::size_t k) noexcept { std::swap(occ_[k], occ_[k + 1]); }

  std::span<const std::uint8_t> occupations() const noexcept { return occ_; }

  std::int64_t particle_count() const noexcept {
    std::int64_t n = 0;
    for (auto v : occ_) n += v;
    return n;
  }

  friend bool operator==(const LatticeConfig&, const LatticeConfig&) = default;

 private:
  std::vector<std::uint8_t> occ_;
};

/// Creation/annihilation rates of the two reservoirs: alpha creates and
/// gamma annihilates at site 1, delta creates and beta annihilates at site N.
struct BoundaryRates {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double delta = 1.0;

  double min() const noexcept { return std::min({alpha, beta, gamma, delta}); }
  friend bool operator==(const BoundaryRates&, const BoundaryRates&) = default;
};

struct ReservoirDensities {
  double rho_minus = 0.0;
  double rho_plus = 0.0;
};

/// Piecewise-constant boundary rates on [0, t_end]. Interval k covers
/// [t_k, t_{k+1}) (left-closed, right-open); the final instant t_end is
/// attributed to the last interval.
class RateSchedule {
 public:
  struct Interval {
    double t_start = 0.0;
    BoundaryRates rates;
  };

  RateSchedule(std::vector<Interval> intervals,
               double t_end = std::numeric_limits<double>::infinity())
      : intervals_(std::move(intervals)), t_end_(t_end) {
    if (intervals_.empty()) throw DomainError("RateSchedule: no intervals");
    if (intervals_.front().t_start != 0.0)
      throw DomainError("RateSchedule: first interval must start at t = 0");
    for (std::size_t k = 0; k < intervals_.size(); ++k) {
      const auto& r = intervals_[k].rates;
      for (double v : {r.alpha, r.beta, r.gamma, r.delta}) {
        if (!std::isfinite(v) || v < 0.0)
          throw DomainError("RateSchedule: rates must be finite and nonnegative");
      }
      if (k > 0 && !(intervals_[k].t_start > intervals_[k - 1].t_start))
        throw DomainError("RateSchedule: breakpoints must be strictly increasing");
    }
    if (!(t_end_ > intervals_.back().t_start))
      throw DomainError("RateSchedule: t_end must exceed the last breakpoint");
  }

  static RateSchedule constant(BoundaryRates r,
                               double t_end = std::numeric_limits<double>::infinity()) {
    return RateSchedule({Interval{0.0, r}}, t_end);
  }

  std::span<const Interval> intervals() const noexcept { return intervals_; }
  double t_end() const noexcept { return t_end_; }
  bool covers(double t) const noexcept { return t >= 0.0 && t <= t_end_; }

  std::size_t interval_index(double t) const {
    if (!covers(t)) {
      std::ostringstream os;
      os << "RateSchedule: time " << t << " outside coverage [0, " << t_end_ << "]";
      throw OutOfRangeError(os.str());
    }
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t,
                               [](double v, const Interval& iv) { return v < iv.t_start; });
    return static_cast<std::size_t>(std::distance(intervals_.begin(), it)) - 1;
  }

  const BoundaryRates& rates_at(double t) const { return intervals_[interval_index(t)].rates; }

  /// Smallest breakpoint strictly greater than t, or t_end.
  double next_breakpoint(double t) const {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t,
                               [](double v, const Interval& iv) { return v < iv.t_start; });
    return it == intervals_.end() ? t_end_ : it->t_start;
  }

  /// Essential infimum of all four rates over [0, horizon].
  double min_rate(double horizon) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& iv : intervals_) {
      if (iv.t_start >= horizon && iv.t_start > 0.0) break;
      m = std::min(m, iv.rates.min());
    }
    return m;
  }

  /// Checks coverage of [0, horizon] and the positivity assumption on the rates.
  void require_positive(double horizon) const {
    if (!covers(horizon)) {
      std::ostringstream os;
      os << "RateSchedule: horizon " << horizon << " exceeds coverage " << t_end_;
      throw OutOfRangeError(os.str());
    }
    if (!(min_rate(horizon) > 0.0))
      throw DomainError("RateSchedule: boundary rates must have positive infimum");
  }

 private:
  std::vector<Interval> intervals_;
  double t_end_;
};

inline ReservoirDensities reservoir_densities(const BoundaryRates& r) {
  if (!(r.alpha + r.gamma > 0.0) || !(r.beta + r.delta > 0.0))
    throw DomainError("reservoir_densities: a reservoir has zero total rate");
  return {r.alpha / (r.alpha + r.gamma), r.delta / (r.beta + r.delta)};
}

inline ReservoirDensities reservoir_densities(const RateSchedule& schedule, double t) {
  return reservoir_densities(schedule.rates_at(t));
}

/// Boundary rates that project the infinite ASEP (right rate p+sigma, left
/// rate sigma) with Bernoulli reservoirs of densities rho_bar_minus/plus.
inline RateSchedule liggett_rates(double p, double sigma, double rho_bar_minus,
                                  double rho_bar_plus) {
  if (!(p > 0.0) || !(sigma > 0.0)) throw DomainError("liggett_rates: p and sigma must be > 0");
  for (double rb : {rho_bar_minus, rho_bar_plus}) {
    if (!(rb >= 0.0 && rb <= 1.0)) throw DomainError("liggett_rates: densities must lie in [0,1]");
  }
  BoundaryRates r;
  r.alpha = (p + sigma) * rho_bar_minus;
  r.gamma = sigma * (1.0 - rho_bar_minus);
  r.beta = (p + sigma) * (1.0 - rho_bar_plus);
  r.delta = sigma * rho_bar_plus;
  return RateSchedule::constant(r);
}

enum class ScalingMode { strict, exploratory };

/// Drift p, symmetric acceleration sigma_N, reservoir acceleration
/// sigma~_N and mesoscopic block size K for a lattice of N sites.
struct ScalingPlan {
  ScalingMode mode = ScalingMode::exploratory;
  std::size_t N = 2;
  double p = 1.0;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double theta = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;
  double sigma_tilde = 1.0;
  std::size_t K = 1;

  /// sigma_N = N^(5/7+kappa), K = floor(N^(4/7+kappa)), sigma~_N = N^theta.
  static ScalingPlan strict(std::size_t n, double kappa, double theta = 1.0, double p = 1.0) {
    if (n < 2) throw DomainError("ScalingPlan: N must be >= 2");
    if (!(p > 0.0)) throw DomainError("ScalingPlan: p must be > 0");
    if (!(theta > 0.0)) throw DomainError("ScalingPlan: theta must be > 0");
    ScalingPlan plan;
    plan.mode = ScalingMode::strict;
    plan.N = n;
    plan.p = p;
    plan.kappa = kappa;
    plan.theta = theta;
    const double dn = static_cast<double>(n);
    plan.sigma = std::pow(dn, 5.0 / 7.0 + kappa);
    plan.sigma_tilde = std::pow(dn, theta);
    plan.K = floor_power(dn, 4.0 / 7.0 + kappa);
    return plan;
  }

  static ScalingPlan exploratory(std::size_t n, double sigma, double sigma_tilde, std::size_t k,
                                 double p = 1.0) {
    if (n < 2) throw DomainError("ScalingPlan: N must be >= 2");
    if (!(p > 0.0)) throw DomainError("ScalingPlan: p must be > 0");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("ScalingPlan: sigma must be >= 0");
    if (!(sigma_tilde > 0.0) || !std::isfinite(sigma_tilde))
      throw DomainError("ScalingPlan: sigma_tilde must be > 0");
    if (k < 1) throw DomainError("ScalingPlan: K must be >= 1");
    ScalingPlan plan;
    plan.mode = ScalingMode::exploratory;
    plan.N = n;
    plan.p = p;
    plan.sigma = sigma;
    plan.sigma_tilde = sigma_tilde;
    plan.K = k;
    return plan;
  }

  /// floor(n^e), robust to n^e landing a few ulps below an exact integer.
  static std::size_t floor_power(double n, double e) {
    const double v = std::pow(n, e);
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::floor(v));
  }
};

struct ScalingRatio {
  std::string name;
  double value = 0.0;
  bool flagged = false;
};

struct ScalingReport {
  bool pass = true;
  std::array<ScalingRatio, 5> ratios;
  std::vector<std::string> failures;

  bool any_flagged() const {
    return std::any_of(ratios.begin(), ratios.end(), [](const auto& r) { return r.flagged; });
  }
};

/// A ratio above this is reported as "not small" for the asymptotic constraints.
inline constexpr double kScalingAdvisoryThreshold = 0.5;

/// Evaluates the five asymptotic ratios of a plan. Throws DomainError when
/// K >= N/2, since the smoothed block averages are then undefined.
inline ScalingReport validate_scaling(const ScalingPlan& plan) {
  const double n = static_cast<double>(plan.N);
  const double k = static_cast<double>(plan.K);
  if (plan.K < 1 || 2 * plan.K >= plan.N) {
    std::ostringstream os;
    os << "validate_scaling: block size K = " << plan.K << " must satisfy 1 <= K < N/2 (N = "
       << plan.N << ")";
    throw DomainError(os.str());
  }
  const double s = plan.sigma;
  ScalingReport rep;
  rep.ratios = {ScalingRatio{"N^(5/7)/sigma", std::pow(n, 5.0 / 7.0) / s},
                ScalingRatio{"sigma/N", s / n},
                ScalingRatio{"N*sigma/K^3", n * s / (k * k * k)},
                ScalingRatio{"N*K^2/sigma^3", n * k * k / (s * s * s)},
                ScalingRatio{"sigma^2/(N*K)", s * s / (n * k)}};
  for (auto& r : rep.ratios) r.flagged = !(r.value < kScalingAdvisoryThreshold);
  if (plan.mode == ScalingMode::strict) {
    if (!(plan.kappa > 0.0 && plan.kappa < 2.0 / 7.0)) {
      rep.pass = false;
      rep.failures.push_back("strict plan requires kappa in (0, 2/7)");
    }
  }
  if (!(plan.sigma_tilde > 0.0)) {
    rep.pass = false;
    rep.failures.push_back("sigma_tilde must be positive");
  }
  return rep;
}

}  // namespace asep
