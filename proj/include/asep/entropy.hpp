#pragma once

// Entropy pairs, boundary entropy pairs, entropy production and the
// boundary entropy inequality evaluated on cell-averaged space-time fields.
//
// Fluxes q and Q are normalised without the factor p: q' = J' f' with
// J(u) = u(1-u). The factor p appears in the space-time integrals.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "asep/burgers.hpp"
#include "asep/core_model.hpp"
#include "asep/csv.hpp"
#include "asep/errors.hpp"
#include "asep/grid_field.hpp"

namespace asep {

namespace detail {

inline double integrate(const std::function<double(double)>& g, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 10, 1e-13);
}

}  // namespace detail

/// Entropy f with its flux q, q' = (1 - 2u) f'.
struct LaxPair {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> q;
  bool convex = false;

  /// Builds q(u) = int_0^u (1-2v) f'(v) dv by adaptive quadrature.
  static LaxPair from_entropy(std::function<double(double)> f, std::function<double(double)> df, bool convex) {
    LaxPair pair{f, df, {}, convex};
    pair.q = [df](double u) { return detail::integrate([&](double v) { return (1.0 - 2.0 * v) * df(v); }, 0.0, u); };
    return pair;
  }

  /// f(u) = u, q(u) = J(u): production is the weak-form residual of the equation.
  static LaxPair identity() {
    return {[](double u) { return u; }, [](double) { return 1.0; }, [](double u) { return u * (1.0 - u); },
            false};
  }

  /// f(u) = (u - h)^2 in closed form.
  static LaxPair quadratic(double h) {
    return {[h](double u) { return (u - h) * (u - h); }, [h](double u) { return 2.0 * (u - h); },
            [h](double u) {
              auto prim = [h](double v) { return v * v - 2.0 * h * v - 4.0 * v * v * v / 3.0 + 2.0 * h * v * v; };
              return prim(u) - prim(0.0);
            },
            true};
  }
};

/// Boundary entropy pair (F, Q) with dQ/du = (1 - 2u) dF/du.
struct BoundaryEntropyPair {
  std::function<double(double, double)> F;
  std::function<double(double, double)> Q;
  std::function<double(double, double)> dF_du;
  double smoothing = 0.0;
  std::string name;
};

/// Smoothed Kruzkov pair F(u,w) = sqrt((u-w)^2 + d^2) - d, with Q in closed form.
inline BoundaryEntropyPair smoothed_kruzkov(double d = 1e-3) {
  if (!(d > 0.0)) throw DomainError("smoothed_kruzkov: smoothing must be > 0");
  BoundaryEntropyPair pair;
  pair.smoothing = d;
  pair.name = "smoothed-kruzkov(" + csv::num(d) + ")";
  // sqrt(s^2+d^2) - d written without cancellation
  auto excess = [d](double s) { return s * s / (std::hypot(s, d) + d); };
  pair.F = [excess](double u, double w) { return excess(u - w); };
  pair.dF_du = [d](double u, double w) { return (u - w) / std::hypot(u - w, d); };
  pair.Q = [d, excess](double u, double w) {
    const double s = u - w;
    return (1.0 - 2.0 * w) * excess(s) - (s * std::hypot(s, d) - d * d * std::asinh(s / d));
  };
  return pair;
}

/// Boundary pair built from F and dF/du, with Q(u,w) = int_w^u (1-2v) dF/du(v,w) dv by quadrature.
inline BoundaryEntropyPair boundary_pair_from_entropy(std::function<double(double, double)> F,
                                                      std::function<double(double, double)> dF_du,
                                                      std::string name) {
  BoundaryEntropyPair pair;
  pair.F = F;
  pair.dF_du = dF_du;
  pair.name = std::move(name);
  pair.Q = [dF_du](double u, double w) {
    return detail::integrate([&](double v) { return (1.0 - 2.0 * v) * dF_du(v, w); }, w, u);
  };
  return pair;
}

/// Nonnegative test function psi(t,x) with analytic partial derivatives.
struct TestFunction {
  std::function<double(double, double)> psi;
  std::function<double(double, double)> psi_t;
  std::function<double(double, double)> psi_x;
  bool compact_in_space = false;  ///< support inside (0,1) in x
  bool compact_in_time = false;   ///< support inside (0,T) in t
  bool vanishes_at_T = false;
  double T = 1.0;
  std::string name;
};

namespace detail {

/// C-infinity bump on (c - r, c + r) with derivative.
struct Bump {
  double c, r;
  double operator()(double z) const {
    const double y = (z - c) / r;
    return std::abs(y) < 1.0 ? std::exp(-1.0 / (1.0 - y * y)) : 0.0;
  }
  double d(double z) const {
    const double y = (z - c) / r;
    if (std::abs(y) >= 1.0) return 0.0;
    const double g = 1.0 - y * y;
    return std::exp(-1.0 / g) * (-2.0 * y / (g * g)) / r;
  }
};

}  // namespace detail

/// Product of smooth bumps supported in (xc-xr, xc+xr) x (tc-tr, tc+tr).
inline TestFunction bump_test_function(double xc, double xr, double tc, double tr, double T) {
  const detail::Bump bx{xc, xr}, bt{tc, tr};
  TestFunction f;
  f.psi = [=](double t, double x) { return bt(t) * bx(x); };
  f.psi_t = [=](double t, double x) { return bt.d(t) * bx(x); };
  f.psi_x = [=](double t, double x) { return bt(t) * bx.d(x); };
  f.compact_in_space = xc - xr > 0.0 && xc + xr < 1.0;
  f.compact_in_time = tc - tr > 0.0 && tc + tr < T;
  f.vanishes_at_T = tc + tr <= T;
  f.T = T;
  f.name = "bump(x=" + csv::num(xc) + ";t=" + csv::num(tc) + ")";
  return f;
}

/// (1 - t/T)^2 exp(-(x-c)^2 / (2 w^2)); reaches both boundaries.
inline TestFunction gaussian_test_function(double c, double w, double T) {
  TestFunction f;
  auto time = [T](double t) { return (1.0 - t / T) * (1.0 - t / T); };
  auto dtime = [T](double t) { return -2.0 * (1.0 - t / T) / T; };
  auto space = [c, w](double x) { return std::exp(-(x - c) * (x - c) / (2.0 * w * w)); };
  f.psi = [=](double t, double x) { return time(t) * space(x); };
  f.psi_t = [=](double t, double x) { return dtime(t) * space(x); };
  f.psi_x = [=](double t, double x) { return time(t) * space(x) * (-(x - c) / (w * w)); };
  f.vanishes_at_T = true;
  f.T = T;
  f.name = "gaussian(c=" + csv::num(c) + ";w=" + csv::num(w) + ")";
  return f;
}

/// (1 - t/T) (a + b x), nonnegative on [0,1] when a, a + b >= 0.
inline TestFunction affine_test_function(double a, double b, double T) {
  if (a < 0.0 || a + b < 0.0) throw DomainError("affine_test_function: must be nonnegative on [0,1]");
  TestFunction f;
  f.psi = [=](double t, double x) { return (1.0 - t / T) * (a + b * x); };
  f.psi_t = [=](double, double x) { return -(a + b * x) / T; };
  f.psi_x = [=](double t, double) { return (1.0 - t / T) * b; };
  f.vanishes_at_T = true;
  f.T = T;
  f.name = "affine(" + csv::num(a) + ";" + csv::num(b) + ")";
  return f;
}

namespace detail {

inline void require_field(const SpaceTimeField& field) {
  if (field.size() < 2) throw ContractError("entropy: field needs at least two sample times");
}

/// Trapezoid weights for the sample times.
inline std::vector<double> time_weights(const std::vector<double>& ts) {
  std::vector<double> w(ts.size(), 0.0);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double h = ts[k + 1] - ts[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

/// -int int a(u) psi_t - p int int b(u) psi_x: trapezoid in time over the
/// sample times, midpoint in space over the cells.
template <class A, class B>
double space_time_form(const SpaceTimeField& field, const TestFunction& psi, double p, A a, B b) {
  const auto wt = time_weights(field.times);
  double total = 0.0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    const auto& g = field.frames[k];
    const double t = field.times[k];
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double x = g.x_center(j);
      s += a(g[j]) * psi.psi_t(t, x) + p * b(g[j]) * psi.psi_x(t, x);
    }
    total -= wt[k] * s * g.dx();
  }
  return total;
}

}  // namespace detail

/// X(psi) = -int int f(u) psi_t - p int int q(u) psi_x; nonpositive for
/// convex f on entropy solutions.
inline double entropy_production(const SpaceTimeField& field, const LaxPair& pair, const TestFunction& psi,
                                 double p = 1.0) {
  detail::require_field(field);
  if (!psi.compact_in_space || !psi.compact_in_time)
    throw ContractError("entropy_production: test function must be compactly supported in (0,T) x (0,1)");
  return detail::space_time_form(field, psi, p, pair.f, pair.q);
}

enum class Side : std::uint8_t { left, right };

/// int Q(u(t, r), rho_-(t)) phi(t) dt on the left, int Q(u(t, 1-r), rho_+(t)) phi(t) dt
/// on the right (trapezoid over sample times). Admissible traces give <= 0 on
/// the left and >= 0 on the right.
inline double otto_boundary_check(const SpaceTimeField& field, const BoundaryEntropyPair& pair,
                                  const RateSchedule& schedule, Side side, double r,
                                  const std::function<double(double)>& phi) {
  detail::require_field(field);
  if (!(r > 0.0 && r < 1.0)) throw DomainError("otto_boundary_check: offset must lie in (0,1)");
  const auto wt = detail::time_weights(field.times);
  double s = 0.0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double t = field.times[k];
    const auto rho = reservoir_densities(schedule, t);
    const double u = field.frames[k].value_at(side == Side::left ? r : 1.0 - r);
    const double w = side == Side::left ? rho.rho_minus : rho.rho_plus;
    s += wt[k] * pair.Q(u, w) * phi(t);
  }
  return s;
}

struct OttoTerms {
  double lhs = 0.0;
  double rhs = 0.0;
  double initial = 0.0;  ///< int F(u0, h) psi(0, x) dx
  double left = 0.0;     ///< p int F(rho_-, h) psi(t, 0) dt
  double right = 0.0;    ///< p int F(rho_+, h) psi(t, 1) dt
};

/// Both sides of the boundary entropy inequality lhs <= rhs:
///   lhs = -int int F(u,h) psi_t - p int int Q(u,h) psi_x
///   rhs = int F(u0,h) psi(0,.) + p int F(rho_-,h) psi(.,0) + p int F(rho_+,h) psi(.,1)
inline OttoTerms otto_integral_inequality(const SpaceTimeField& field, const BoundaryEntropyPair& pair, double h,
                                          const TestFunction& psi, const GridField& u0,
                                          const RateSchedule& schedule, double p = 1.0) {
  detail::require_field(field);
  if (!psi.vanishes_at_T) throw ContractError("otto_integral_inequality: test function must vanish at T");
  const double T = field.times.back();
  for (std::size_t j = 0; j <= 20; ++j) {
    const double x = static_cast<double>(j) / 20.0;
    if (psi.psi(T, x) != 0.0 && std::abs(psi.psi(T, x)) > 1e-14)
      throw ContractError("otto_integral_inequality: psi(T, .) does not vanish");
    for (double t : {field.times.front(), 0.5 * T})
      if (psi.psi(t, x) < 0.0) throw ContractError("otto_integral_inequality: psi must be nonnegative");
  }
  OttoTerms out;
  out.lhs = detail::space_time_form(
      field, psi, p, [&](double u) { return pair.F(u, h); }, [&](double u) { return pair.Q(u, h); });
  const double t0 = field.times.front();
  for (std::size_t j = 0; j < u0.size(); ++j) out.initial += pair.F(u0[j], h) * psi.psi(t0, u0.x_center(j));
  out.initial *= u0.dx();
  const auto wt = detail::time_weights(field.times);
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double t = field.times[k];
    const auto rho = reservoir_densities(schedule, t);
    out.left += wt[k] * pair.F(rho.rho_minus, h) * psi.psi(t, 0.0);
    out.right += wt[k] * pair.F(rho.rho_plus, h) * psi.psi(t, 1.0);
  }
  out.left *= p;
  out.right *= p;
  out.rhs = out.initial + out.left + out.right;
  return out;
}

/// Boundary weight
///   1 - (sigma/(sigma+1))^(N x)        for x <= delta_N
///   1 - ((sigma-1)/sigma)^(N (1-x))    for x > delta_N
/// continuous at delta_N = (log sigma - log(sigma-1)) / (log(sigma+1) - log(sigma-1)).
class AuxiliaryWeight {
 public:
  AuxiliaryWeight(double n, double sigma) : n_(n), sigma_(sigma) {
    if (!(n > 0.0)) throw DomainError("AuxiliaryWeight: N must be > 0");
    if (!(sigma > 1.0)) throw DomainError("AuxiliaryWeight: sigma must be > 1");
    log_left_ = std::log1p(1.0 / sigma);    // -log(sigma/(sigma+1))
    log_right_ = -std::log1p(-1.0 / sigma);  // -log((sigma-1)/sigma)
    delta_ = log_right_ / (log_left_ + log_right_);
  }

  double N() const noexcept { return n_; }
  double sigma() const noexcept { return sigma_; }
  double delta() const noexcept { return delta_; }

  double operator()(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("AuxiliaryWeight: x outside [0,1]");
    return x <= delta_ ? -std::expm1(-log_left_ * n_ * x) : -std::expm1(-log_right_ * n_ * (1.0 - x));
  }

  /// Derivative; at the kink the left-sided value is returned.
  double derivative(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("AuxiliaryWeight: x outside [0,1]");
    if (x <= delta_) return log_left_ * n_ * std::exp(-log_left_ * n_ * x);
    return -log_right_ * n_ * std::exp(-log_right_ * n_ * (1.0 - x));
  }

  /// Exact int_0^1 |alpha'|: the weight increases on [0, delta_N] and
  /// decreases on [delta_N, 1], so the total variation is 2 alpha(delta_N).
  double total_variation() const {
    const double left = -std::expm1(-log_left_ * n_ * delta_);
    const double right = -std::expm1(-log_right_ * n_ * (1.0 - delta_));
    return left + right;
  }

  /// Bound on |alpha'| off the kink.
  double derivative_bound() const { return 2.0 * n_ / sigma_; }

 private:
  double n_, sigma_, log_left_ = 0.0, log_right_ = 0.0, delta_ = 0.5;
};

struct AuxiliaryWeightReport {
  bool endpoints_zero = false;      ///< alpha(0) = alpha(1) = 0
  bool range_ok = false;            ///< alpha in [0,1) on the grid
  bool derivative_ok = false;       ///< |alpha'| <= 2N/sigma on the grid
  bool variation_ok = false;        ///< exact total variation <= 2
  double max_value = 0.0;
  double max_derivative = 0.0;
  double total_variation = 0.0;
  double grid_variation = 0.0;      ///< sum |alpha(x_{k+1}) - alpha(x_k)| on the grid
  double delta_expansion_error = 0.0;  ///< |delta_N - 1/2 - 1/(4 sigma)|

  bool pass() const { return endpoints_zero && range_ok && derivative_ok && variation_ok; }
};

inline AuxiliaryWeightReport auxiliary_weight_properties(const AuxiliaryWeight& w, std::size_t grid = 10000) {
  AuxiliaryWeightReport r;
  r.endpoints_zero = w(0.0) == 0.0 && w(1.0) == 0.0;
  r.range_ok = true;
  double prev = w(0.0);
  for (std::size_t k = 0; k <= grid; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(grid);
    const double v = w(x);
    r.range_ok = r.range_ok && v >= 0.0 && v < 1.0;
    r.max_value = std::max(r.max_value, v);
    if (k > 0) r.grid_variation += std::abs(v - prev);
    prev = v;
    if (k > 0 && k < grid) r.max_derivative = std::max(r.max_derivative, std::abs(w.derivative(x)));
  }
  r.derivative_ok = r.max_derivative <= w.derivative_bound();
  r.total_variation = w.total_variation();
  r.variation_ok = r.total_variation <= 2.0;
  r.delta_expansion_error = std::abs(w.delta() - 0.5 - 0.25 / w.sigma());
  return r;
}

/// sup of 1 - alpha_N over [a, 1-a] for each weight; a decreasing sequence
/// shows alpha_N -> 1 uniformly on compacts.
inline std::vector<double> auxiliary_weight_compact_gap(const std::vector<AuxiliaryWeight>& ws, double a = 0.1,
                                                        std::size_t grid = 10000) {
  std::vector<double> out;
  for (const auto& w : ws) {
    double gap = 0.0;
    for (std::size_t k = 0; k <= grid; ++k) {
      const double x = a + (1.0 - 2.0 * a) * static_cast<double>(k) / static_cast<double>(grid);
      gap = std::max(gap, 1.0 - w(x));
    }
    out.push_back(gap);
  }
  return out;
}

/// One line of a diagnostic report.
struct DiagnosticRow {
  std::string check;
  std::string parameters;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticRow>& rows) {
  os << "check,parameters,value,threshold,pass\n";
  for (const auto& r : rows)
    os << r.check << ',' << r.parameters << ',' << csv::num(r.value) << ',' << csv::num(r.threshold) << ','
       << (r.pass ? "true" : "false") << '\n';
}

}  // namespace asep
