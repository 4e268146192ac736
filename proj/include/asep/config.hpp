#pragma once

// Experiment description read from a JSON file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asep/burgers.hpp"
#include "asep/core_model.hpp"
#include "asep/errors.hpp"
#include "asep/grid_field.hpp"

namespace asep {

enum class Mode : std::uint8_t { hydrodynamic, quasi_static, stationary, phase_scan, solver_only, diagnostics };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::hydrodynamic: return "hydrodynamic";
    case Mode::quasi_static: return "quasi-static";
    case Mode::stationary: return "stationary";
    case Mode::phase_scan: return "phase-scan";
    case Mode::solver_only: return "solver-only";
    case Mode::diagnostics: return "diagnostics";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::hydrodynamic, Mode::quasi_static, Mode::stationary, Mode::phase_scan, Mode::solver_only,
                 Mode::diagnostics})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown mode '" + s + "'");
}

/// Scaling for one or more lattice sizes.
struct ScalingSpec {
  ScalingMode mode = ScalingMode::strict;
  std::vector<std::size_t> sizes{128, 256, 512};
  double kappa = 1.0 / 7.0;
  double theta = 1.0;
  double p = 1.0;
  double sigma = 1.0;        // exploratory only
  double sigma_tilde = 1.0;  // exploratory only
  std::size_t K = 1;         // exploratory only

  ScalingPlan plan(std::size_t n) const {
    return mode == ScalingMode::strict ? ScalingPlan::strict(n, kappa, theta, p)
                                       : ScalingPlan::exploratory(n, sigma, sigma_tilde, K, p);
  }
};

struct InitialProfile {
  enum class Kind : std::uint8_t { constant, riemann, file } kind = Kind::constant;
  double value = 0.5;
  double u_left = 0.5, u_right = 0.5, x0 = 0.5;
  std::string path;

  /// Profile as averages over m cells.
  GridField profile(std::size_t m) const {
    switch (kind) {
      case Kind::constant: return GridField(m, value);
      case Kind::riemann: return riemann_initial(u_left, u_right, m, x0);
      case Kind::file: {
        std::vector<std::string> header;
        const auto rows = csv::read_rows(path, &header);
        std::vector<double> cells;
        for (const auto& r : rows) {
          if (r.size() < 2) throw ConfigError("initial profile file: expected x_center,value rows");
          cells.push_back(csv::to_double(r[1]));
        }
        if (cells.empty()) throw ConfigError("initial profile file is empty: " + path);
        return restrict_to(GridField(std::move(cells)), m);
      }
    }
    throw ConfigError("initial profile: unknown kind");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::constant: return "constant(" + csv::num(value) + ")";
      case Kind::riemann:
        return "riemann(" + csv::num(u_left) + ";" + csv::num(u_right) + ";" + csv::num(x0) + ")";
      case Kind::file: return "file(" + path + ")";
    }
    return "?";
  }
};

struct ExperimentSpec {
  Mode mode = Mode::hydrodynamic;
  ScalingSpec scaling;
  RateSchedule schedule = density_schedule(0.5, 0.5);
  InitialProfile initial;
  double horizon = 1.0;
  std::size_t replicas = 20;
  std::uint64_t seed = 1;
  std::string output = "out";
  std::size_t solver_cells = 400;
  double quasi_static_exponent = 0.5;
  std::size_t samples = 101;
  std::uint64_t event_budget = 2'000'000'000ULL;
  double burn_in = 0.2;
  std::size_t record_blocks = 64;
  std::vector<std::size_t> block_sizes{4};
  std::optional<std::pair<double, double>> window;
  std::size_t threads = 0;
  // stationary mode
  std::vector<double> rho_bar{0.5};
  // phase-scan mode
  std::vector<double> scan_rho_minus{0.2, 0.5, 0.8};
  std::vector<double> scan_rho_plus{0.2, 0.5, 0.8};
  double solver_horizon = 10.0;
  // diagnostics
  double kruzkov_smoothing = 1e-3;
  std::vector<double> entropy_levels{0.1, 0.3, 0.5, 0.7, 0.9};

  nlohmann::json raw;
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline RateSchedule parse_schedule(const nlohmann::json& j) {
  const double t_end = j.contains("t_end") ? j.at("t_end").get<double>() : std::numeric_limits<double>::infinity();
  std::vector<RateSchedule::Interval> iv;
  if (j.contains("intervals")) {
    for (const auto& e : j.at("intervals")) {
      BoundaryRates r{e.at("alpha").get<double>(), e.at("beta").get<double>(), e.at("gamma").get<double>(),
                      e.at("delta").get<double>()};
      iv.push_back({e.at("t_start").get<double>(), r});
    }
  } else if (j.contains("densities")) {
    for (const auto& e : j.at("densities")) {
      const double rm = e.at("rho_minus").get<double>(), rp = e.at("rho_plus").get<double>();
      if (!(rm >= 0.0 && rm <= 1.0 && rp >= 0.0 && rp <= 1.0))
        throw ConfigError("schedule densities must lie in [0,1]");
      iv.push_back({e.at("t_start").get<double>(), BoundaryRates{rm, 1.0 - rp, 1.0 - rm, rp}});
    }
  } else {
    throw ConfigError("schedule needs 'intervals' or 'densities'");
  }
  return RateSchedule(std::move(iv), t_end);
}

}  // namespace detail

/// Parses and validates a configuration. Relative file paths are resolved
/// against base_dir.
inline ExperimentSpec parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentSpec s;
  s.raw = j;
  try {
    s.mode = parse_mode(detail::get_or<std::string>(j, "mode", "hydrodynamic"));
    if (j.contains("scaling")) {
      const auto& js = j.at("scaling");
      const auto m = detail::get_or<std::string>(js, "mode", "strict");
      if (m == "strict")
        s.scaling.mode = ScalingMode::strict;
      else if (m == "exploratory")
        s.scaling.mode = ScalingMode::exploratory;
      else
        throw ConfigError("scaling.mode must be 'strict' or 'exploratory'");
      if (js.contains("N")) {
        const auto& jn = js.at("N");
        s.scaling.sizes = jn.is_array() ? jn.get<std::vector<std::size_t>>()
                                        : std::vector<std::size_t>{jn.get<std::size_t>()};
      }
      s.scaling.kappa = detail::get_or(js, "kappa", s.scaling.kappa);
      s.scaling.theta = detail::get_or(js, "theta", s.scaling.theta);
      s.scaling.p = detail::get_or(js, "p", s.scaling.p);
      s.scaling.sigma = detail::get_or(js, "sigma", s.scaling.sigma);
      s.scaling.sigma_tilde = detail::get_or(js, "sigma_tilde", s.scaling.sigma_tilde);
      s.scaling.K = detail::get_or<std::size_t>(js, "K", s.scaling.K);
    }
    if (j.contains("schedule")) s.schedule = detail::parse_schedule(j.at("schedule"));
    if (j.contains("initial")) {
      const auto& ji = j.at("initial");
      const auto type = detail::get_or<std::string>(ji, "type", "constant");
      if (type == "constant") {
        s.initial.kind = InitialProfile::Kind::constant;
        s.initial.value = detail::get_or(ji, "value", 0.5);
      } else if (type == "riemann") {
        s.initial.kind = InitialProfile::Kind::riemann;
        s.initial.u_left = ji.at("u_left").get<double>();
        s.initial.u_right = ji.at("u_right").get<double>();
        s.initial.x0 = detail::get_or(ji, "x0", 0.5);
      } else if (type == "file") {
        s.initial.kind = InitialProfile::Kind::file;
        std::filesystem::path p = ji.at("path").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw ConfigError("initial profile file not found: " + p.string());
        s.initial.path = p.string();
      } else {
        throw ConfigError("initial.type must be constant, riemann or file");
      }
    }
    s.horizon = detail::get_or(j, "horizon", s.horizon);
    s.replicas = detail::get_or<std::size_t>(j, "replicas", s.replicas);
    s.seed = detail::get_or<std::uint64_t>(j, "seed", s.seed);
    s.output = detail::get_or<std::string>(j, "output", s.output);
    s.solver_cells = detail::get_or<std::size_t>(j, "solver_cells", s.solver_cells);
    s.quasi_static_exponent = detail::get_or(j, "quasi_static_exponent", s.quasi_static_exponent);
    s.samples = detail::get_or<std::size_t>(j, "samples", s.samples);
    s.event_budget = detail::get_or<std::uint64_t>(j, "event_budget", s.event_budget);
    s.burn_in = detail::get_or(j, "burn_in", s.burn_in);
    s.record_blocks = detail::get_or<std::size_t>(j, "record_blocks", s.record_blocks);
    s.block_sizes = detail::get_or(j, "block_sizes", s.block_sizes);
    if (j.contains("window")) {
      const auto w = j.at("window").get<std::vector<double>>();
      if (w.size() != 2 || !(w[0] >= 0.0 && w[0] < w[1] && w[1] <= 1.0))
        throw ConfigError("window must be [lo, hi] with 0 <= lo < hi <= 1");
      s.window = std::pair{w[0], w[1]};
    }
    s.threads = detail::get_or<std::size_t>(j, "threads", s.threads);
    s.rho_bar = detail::get_or(j, "rho_bar", s.rho_bar);
    s.scan_rho_minus = detail::get_or(j, "scan_rho_minus", s.scan_rho_minus);
    s.scan_rho_plus = detail::get_or(j, "scan_rho_plus", s.scan_rho_plus);
    s.solver_horizon = detail::get_or(j, "solver_horizon", s.solver_horizon);
    s.kruzkov_smoothing = detail::get_or(j, "kruzkov_smoothing", s.kruzkov_smoothing);
    s.entropy_levels = detail::get_or(j, "entropy_levels", s.entropy_levels);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (!(s.horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (s.replicas < 1) throw ConfigError("replicas must be >= 1");
  if (s.samples < 2) throw ConfigError("samples must be >= 2");
  if (s.solver_cells < 1) throw ConfigError("solver_cells must be >= 1");
  if (!(s.burn_in >= 0.0 && s.burn_in < 1.0)) throw ConfigError("burn_in must lie in [0,1)");
  if (!(s.quasi_static_exponent > 0.0)) throw ConfigError("quasi_static_exponent must be > 0");
  if (s.scaling.sizes.empty()) throw ConfigError("scaling.N must not be empty");
  if (!s.schedule.covers(s.horizon)) throw ConfigError("schedule does not cover the horizon");
  for (double r : s.rho_bar)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("rho_bar values must lie in [0,1]");
  for (const auto& v : {s.scan_rho_minus, s.scan_rho_plus})
    for (double r : v)
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("scan densities must lie in [0,1]");
  const bool needs_lattice = s.mode != Mode::solver_only;
  const bool runs_lattice = needs_lattice && s.mode != Mode::diagnostics;
  if (needs_lattice) {
    for (std::size_t n : s.scaling.sizes) {
      try {
        const auto plan = s.scaling.plan(n);
        const auto rep = validate_scaling(plan);
        if (!rep.pass) throw ConfigError("scaling for N = " + std::to_string(n) + ": " + rep.failures.front());
        for (std::size_t k : s.block_sizes)
          if (k < 1 || 2 * k >= n) throw ConfigError("block size " + std::to_string(k) + " invalid for N");
      } catch (const DomainError& e) {
        throw ConfigError(std::string("scaling: ") + e.what());
      }
      if (runs_lattice && s.record_blocks != 0 && n % s.record_blocks != 0)
        throw ConfigError("record_blocks must divide every N");
    }
  }
  if (s.mode == Mode::hydrodynamic || s.mode == Mode::quasi_static) {
    try {
      s.schedule.require_positive(s.horizon);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("schedule: ") + e.what());
    }
  }
  return s;
}

inline ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment(j, path.parent_path());
}

}  // namespace asep
