// Command-line front end for simulations, solver runs, comparisons and diagnostics.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "asep/config.hpp"
#include "asep/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kBudgetExhausted = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

asep::ExperimentSpec load(const Globals& g, std::optional<asep::Mode> force_mode) {
  if (g.config.empty()) throw asep::ConfigError("--config is required");
  auto spec = asep::load_experiment(g.config);
  if (force_mode) {
    spec.mode = *force_mode;
    spec.raw["mode"] = asep::to_string(*force_mode);
  }
  if (g.seed) {
    spec.seed = *g.seed;
    spec.raw["seed"] = *g.seed;
  }
  if (g.out) {
    spec.output = *g.out;
  } else if (!std::filesystem::path(spec.output).is_absolute()) {
    spec.output = (std::filesystem::path(g.config).parent_path() / spec.output).string();
  }
  if (g.threads) spec.threads = *g.threads;
  return spec;
}

int execute(const Globals& g, std::optional<asep::Mode> mode) {
  const auto spec = load(g, mode);
  const auto m = asep::run_experiment(spec);
  std::cout << "mode " << m.mode << ": wrote " << m.files.size() + 1 << " files to " << spec.output << '\n';
  if (!m.complete) {
    std::cerr << "incomplete: " << m.incomplete_reason << '\n';
    return kBudgetExhausted;
  }
  return kOk;
}

int validate(const Globals& g) {
  const auto spec = load(g, std::nullopt);
  std::cout << "mode: " << asep::to_string(spec.mode) << '\n';
  if (spec.mode == asep::Mode::solver_only) return kOk;
  for (std::size_t n : spec.scaling.sizes) {
    const auto plan = spec.scaling.plan(n);
    const auto rep = asep::validate_scaling(plan);
    std::cout << "N = " << n << ": sigma = " << asep::csv::num(plan.sigma)
              << ", sigma_tilde = " << asep::csv::num(plan.sigma_tilde) << ", K = " << plan.K << '\n';
    for (const auto& r : rep.ratios)
      std::cout << "  " << r.name << " = " << asep::csv::num(r.value) << (r.flagged ? "  (not small)" : "") << '\n';
  }
  return kOk;
}

int compare_files(const std::string& a, const std::string& b, const std::optional<std::string>& out, double lo,
                  double hi) {
  const auto fa = asep::read_space_time_csv(a);
  const auto fb = asep::read_space_time_csv(b);
  asep::DistanceTable table;
  try {
    table = asep::compare(fa, fb, lo, hi);
  } catch (const asep::DomainError& e) {
    throw asep::ConfigError(e.what());
  }
  if (out) {
    std::filesystem::path p(*out);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw asep::ConfigError("cannot write " + *out);
    table.write_csv(os);
  } else {
    table.write_csv(std::cout);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open ASEP simulation, Burgers reference solver and entropy diagnostics"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 0;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", g.config, "Experiment configuration (JSON)");
    sub->add_option("--seed", seed, "Master seed, overrides the configuration");
    sub->add_option("--out", out, "Output directory, overrides the configuration");
    sub->add_option("--threads", threads, "Worker threads (0: all cores)");
  };

  auto* simulate = app.add_subcommand("simulate", "Run the experiment described by the configuration");
  auto* solve = app.add_subcommand("solve", "Run the reference solver only");
  auto* phase = app.add_subcommand("phase-scan", "Scan constant reservoir densities");
  auto* diagnose = app.add_subcommand("diagnose", "Entropy and boundary checks on a solver run");
  auto* validate_cmd = app.add_subcommand("validate-config", "Parse a configuration and report its scaling");
  for (auto* s : {simulate, solve, phase, diagnose, validate_cmd}) add_globals(s);

  auto* cmp = app.add_subcommand("compare", "Distances between two space-time CSV files");
  std::string file_a, file_b, cmp_out;
  double lo = 0.0, hi = 1.0;
  cmp->add_option("a", file_a, "First space-time CSV")->required();
  cmp->add_option("b", file_b, "Second space-time CSV")->required();
  cmp->add_option("--out", cmp_out, "Output CSV (default: stdout)");
  cmp->add_option("--lo", lo, "Window start");
  cmp->add_option("--hi", hi, "Window end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  for (auto* s : {simulate, solve, phase, diagnose, validate_cmd}) {
    if (s->parsed()) {
      if (s->count("--seed")) g.seed = seed;
      if (s->count("--out")) g.out = out;
      if (s->count("--threads")) g.threads = threads;
    }
  }

  try {
    if (simulate->parsed()) return execute(g, std::nullopt);
    if (solve->parsed()) return execute(g, asep::Mode::solver_only);
    if (phase->parsed()) return execute(g, asep::Mode::phase_scan);
    if (diagnose->parsed()) return execute(g, asep::Mode::diagnostics);
    if (validate_cmd->parsed()) return validate(g);
    if (cmp->parsed())
      return compare_files(file_a, file_b, cmp->count("--out") ? std::optional(cmp_out) : std::nullopt, lo, hi);
  } catch (const asep::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const asep::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const asep::OutOfRangeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
