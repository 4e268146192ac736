#pragma once

// First-order Godunov scheme for u_t + p (u(1-u))_x = 0 on [0,1] with
// boundary data imposed through ghost cells, the exact Riemann solution,
// and the quasi-stationary profile for constant reservoir densities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "asep/core_model.hpp"
#include "asep/csv.hpp"
#include "asep/errors.hpp"
#include "asep/grid_field.hpp"

namespace asep {

struct FluxFn {
  double p = 1.0;

  double J(double u) const noexcept { return u * (1.0 - u); }
  double dJ(double u) const noexcept { return 1.0 - 2.0 * u; }
  double flux(double u) const noexcept { return p * J(u); }
};

/// Godunov flux for the concave flux p*J. Inputs slightly outside [0,1]
/// are clamped and counted in *clamps when given.
inline double godunov_flux(double ul, double ur, const FluxFn& f, std::uint64_t* clamps = nullptr) {
  auto clamp01 = [&](double u) {
    if (u < 0.0 || u > 1.0) {
      if (clamps) ++*clamps;
      return std::clamp(u, 0.0, 1.0);
    }
    return u;
  };
  ul = clamp01(ul);
  ur = clamp01(ur);
  if (ul <= ur) return f.p * std::min(f.J(ul), f.J(ur));
  if (ur <= 0.5 && 0.5 <= ul) return f.p * 0.25;
  return f.p * std::max(f.J(ul), f.J(ur));
}

/// Rates whose reservoir densities are (rho_minus, rho_plus). Only the
/// densities matter to the solver.
inline RateSchedule density_schedule(double rho_minus, double rho_plus,
                                     double t_end = std::numeric_limits<double>::infinity()) {
  if (!(rho_minus >= 0.0 && rho_minus <= 1.0 && rho_plus >= 0.0 && rho_plus <= 1.0))
    throw DomainError("density_schedule: densities must lie in [0,1]");
  return RateSchedule({{0.0, BoundaryRates{rho_minus, 1.0 - rho_plus, 1.0 - rho_minus, rho_plus}}}, t_end);
}

struct SolverState {
  GridField u;
  double t = 0.0;
  double cfl = 0.9;
  RateSchedule boundary = density_schedule(0.5, 0.5);
  FluxFn flux{};
  double left_flux_integral = 0.0;   ///< int F_{1/2} dt since the start
  double right_flux_integral = 0.0;  ///< int F_{M+1/2} dt since the start
  std::uint64_t clamps = 0;
  std::uint64_t steps = 0;

  double max_dt() const { return cfl * u.dx() / flux.p; }
};

inline SolverState make_solver_state(GridField u0, RateSchedule boundary, FluxFn flux = {},
                                     double cfl = 0.9, double t0 = 0.0) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw DomainError("solver: cfl must lie in (0,1]");
  if (!(flux.p > 0.0)) throw DomainError("solver: p must be > 0");
  if (u0.min() < 0.0 || u0.max() > 1.0) throw DomainError("solver: initial data outside [0,1]");
  SolverState s;
  s.u = std::move(u0);
  s.t = t0;
  s.cfl = cfl;
  s.boundary = std::move(boundary);
  s.flux = flux;
  return s;
}

/// One explicit conservative step with the boundary densities at state.t.
inline void advance(SolverState& s, double dt) {
  if (!(dt >= 0.0)) throw DomainError("advance: dt must be >= 0");
  if (dt > s.max_dt() * (1.0 + 1e-12))
    throw ContractError("advance: dt = " + csv::num(dt) + " violates CFL bound " + csv::num(s.max_dt()));
  if (dt == 0.0) return;
  const auto rho = reservoir_densities(s.boundary, s.t);
  const std::size_t m = s.u.size();
  const double lambda = dt / s.u.dx();
  std::vector<double> f(m + 1);
  f[0] = godunov_flux(rho.rho_minus, s.u[0], s.flux, &s.clamps);
  for (std::size_t j = 1; j < m; ++j) f[j] = godunov_flux(s.u[j - 1], s.u[j], s.flux, &s.clamps);
  f[m] = godunov_flux(s.u[m - 1], rho.rho_plus, s.flux, &s.clamps);
  for (std::size_t j = 0; j < m; ++j) s.u[j] -= lambda * (f[j + 1] - f[j]);
  s.left_flux_integral += dt * f[0];
  s.right_flux_integral += dt * f[m];
  s.t += dt;
  ++s.steps;
}

/// Advances to time target with maximal steps, stopping at schedule breakpoints.
inline void advance_to(SolverState& s, double target) {
  while (s.t < target) {
    const double stop = std::min(target, s.boundary.next_breakpoint(s.t));
    const double dt = std::min(s.max_dt(), stop - s.t);
    if (s.t + dt >= stop) {
      advance(s, stop - s.t);
      s.t = stop;
    } else {
      advance(s, dt);
    }
  }
}

struct SolveResult {
  SpaceTimeField field;
  SolverState final_state;
};

/// Solves on M cells up to T, recording the solution at sample_times
/// (default: 201 uniform times on [0,T]). u0 is resampled onto M cells by
/// cell averaging.
inline SolveResult solve_detailed(const GridField& u0, const RateSchedule& schedule, double T, std::size_t m,
                                  std::vector<double> sample_times = {}, FluxFn flux = {}, double cfl = 0.9) {
  if (!(T >= 0.0)) throw DomainError("solve: T must be >= 0");
  if (!schedule.covers(T)) throw OutOfRangeError("solve: schedule does not cover T = " + csv::num(T));
  if (sample_times.empty()) {
    for (std::size_t k = 0; k <= 200; ++k) sample_times.push_back(T * static_cast<double>(k) / 200.0);
    sample_times.back() = T;
  }
  for (std::size_t k = 0; k < sample_times.size(); ++k) {
    if (sample_times[k] < 0.0 || sample_times[k] > T || (k > 0 && !(sample_times[k] > sample_times[k - 1])))
      throw DomainError("solve: sample times must increase within [0,T]");
  }
  SolveResult r{{}, make_solver_state(restrict_to(u0, m), schedule, flux, cfl)};
  for (double ts : sample_times) {
    advance_to(r.final_state, ts);
    r.field.push(ts, r.final_state.u);
  }
  return r;
}

inline SpaceTimeField solve(const GridField& u0, const RateSchedule& schedule, double T, std::size_t m,
                            std::vector<double> sample_times = {}, FluxFn flux = {}, double cfl = 0.9) {
  return solve_detailed(u0, schedule, T, m, std::move(sample_times), flux, cfl).field;
}

/// Entropy solution of the Riemann problem with the jump at x0, as exact
/// averages over M equal cells of [0,1].
inline GridField riemann_exact(double ul, double ur, const FluxFn& f, double t, std::size_t m, double x0 = 0.5) {
  if (!(t >= 0.0)) throw DomainError("riemann_exact: t must be >= 0");
  // u is constant left of a, linear on [a,b], constant right of b.
  double a = x0, b = x0;
  if (ul < ur) {
    const double s = f.p * (f.J(ur) - f.J(ul)) / (ur - ul);
    a = b = x0 + s * t;
  } else if (ul > ur) {
    a = x0 + f.p * f.dJ(ul) * t;
    b = x0 + f.p * f.dJ(ur) * t;
  }
  auto value = [&](double x) {
    if (x <= a) return ul;
    if (x >= b) return ur;
    return 0.5 * (1.0 - (x - x0) / (f.p * t));
  };
  auto integral = [&](double lo, double hi) {
    double s = 0.0;
    const double l1 = std::min(hi, a);
    if (l1 > lo) s += ul * (l1 - lo);
    const double f0 = std::max(lo, a), f1 = std::min(hi, b);
    if (f1 > f0) s += value(0.5 * (f0 + f1)) * (f1 - f0);
    const double r0 = std::max(lo, b);
    if (hi > r0) s += ur * (hi - r0);
    return s;
  };
  std::vector<double> cells(m);
  const double dx = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j)
    cells[j] = integral(static_cast<double>(j) * dx, static_cast<double>(j + 1) * dx) / dx;
  return GridField(std::move(cells));
}

/// Piecewise constant Riemann data on M cells, jump at x0 (cell averages).
inline GridField riemann_initial(double ul, double ur, std::size_t m, double x0 = 0.5) {
  return riemann_exact(ul, ur, FluxFn{}, 0.0, m, x0);
}

enum class Phase : std::uint8_t { low_density, high_density, max_current, critical_line };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::low_density: return "low-density";
    case Phase::high_density: return "high-density";
    case Phase::max_current: return "max-current";
    case Phase::critical_line: return "critical-line";
  }
  return "?";
}

struct PhasePoint {
  double rho_minus = 0.0;
  double rho_plus = 0.0;
  Phase phase = Phase::low_density;
  std::optional<double> u_bar;  ///< unset on the critical line
  double current = 0.0;
};

inline constexpr double kCriticalLineTolerance = 1e-12;

/// Bulk density selected by constant reservoir densities.
inline PhasePoint quasi_stationary_profile(double rho_minus, double rho_plus, double p = 1.0) {
  if (!(rho_minus >= 0.0 && rho_minus <= 1.0 && rho_plus >= 0.0 && rho_plus <= 1.0))
    throw DomainError("quasi_stationary_profile: densities must lie in [0,1]");
  if (!(p > 0.0)) throw DomainError("quasi_stationary_profile: p must be > 0");
  const FluxFn f{p};
  PhasePoint pt{rho_minus, rho_plus, Phase::low_density, std::nullopt, 0.0};
  if (rho_minus < 0.5 && std::abs(rho_minus + rho_plus - 1.0) <= kCriticalLineTolerance) {
    pt.phase = Phase::critical_line;
    pt.current = f.flux(rho_minus);
    return pt;
  }
  if (rho_minus < 0.5 && rho_minus < 1.0 - rho_plus) {
    pt.phase = Phase::low_density;
    pt.u_bar = rho_minus;
  } else if (rho_plus > 0.5 && rho_plus > 1.0 - rho_minus) {
    pt.phase = Phase::high_density;
    pt.u_bar = rho_plus;
  } else {
    pt.phase = Phase::max_current;
    pt.u_bar = 0.5;
  }
  pt.current = f.flux(*pt.u_bar);
  return pt;
}

inline void write_phase_csv(std::ostream& os, const std::vector<PhasePoint>& pts) {
  os << "rho_minus,rho_plus,phase,u_bar,current\n";
  for (const auto& pt : pts) {
    os << csv::num(pt.rho_minus) << ',' << csv::num(pt.rho_plus) << ',' << to_string(pt.phase) << ','
       << (pt.u_bar ? csv::num(*pt.u_bar) : std::string("nan")) << ',' << csv::num(pt.current) << '\n';
  }
}

}  // namespace asep
