#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "asep/config.hpp"
#include "asep/harness.hpp"

using namespace asep;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("asep_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_hydrodynamic(const fs::path& out) {
  return json{{"mode", "hydrodynamic"},
              {"scaling", {{"mode", "exploratory"}, {"N", {32, 64}}, {"sigma", 4.0}, {"sigma_tilde", 32.0}, {"K", 4}}},
              {"schedule", {{"densities", {{{"t_start", 0.0}, {"rho_minus", 0.8}, {"rho_plus", 0.2}}}}}},
              {"initial", {{"type", "riemann"}, {"u_left", 0.8}, {"u_right", 0.2}}},
              {"horizon", 0.2},
              {"replicas", 3},
              {"seed", 5},
              {"samples", 11},
              {"solver_cells", 64},
              {"record_blocks", 8},
              {"block_sizes", {2, 4}},
              {"output", out.string()}};
}

std::map<std::string, std::string> read_tree(const fs::path& root, bool skip_manifest = true) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (skip_manifest && rel == "manifest.json") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[rel] = ss.str();
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ASEP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST(Compare, DistancesAtSharedTimes) {
  SpaceTimeField a, b;
  a.push(0.0, GridField(4, 0.0));
  a.push(0.5, GridField(4, 0.0));
  a.push(1.0, GridField(4, 0.5));
  b.push(0.5, GridField(8, 1.0));
  b.push(1.0, GridField(8, 0.5));
  const auto t = compare(a, b);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(t.rows[0].l1, 1.0);
  EXPECT_DOUBLE_EQ(t.rows[0].l2, 1.0);
  EXPECT_DOUBLE_EQ(t.rows[1].l1, 0.0);
  EXPECT_DOUBLE_EQ(t.mean_l1, 0.5);
  EXPECT_DOUBLE_EQ(compare(a, b, 0.25, 0.75).rows[0].l1, 0.5);
  SpaceTimeField c;
  c.push(0.3, GridField(4, 0.0));
  EXPECT_THROW(compare(a, c), DomainError);
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(), "t,l1,l2\n0.5,1,1\n1,0,0\nmean,0.5,0.5\n");
}

TEST(Config, RejectsInvalidInput) {
  auto base = small_hydrodynamic("out");
  EXPECT_NO_THROW(parse_experiment(base));
  auto bad = [&](const char* key, json value) {
    auto j = base;
    j[key] = std::move(value);
    return j;
  };
  EXPECT_THROW(parse_experiment(bad("mode", "bogus")), ConfigError);
  EXPECT_THROW(parse_experiment(bad("horizon", -1.0)), ConfigError);
  EXPECT_THROW(parse_experiment(bad("replicas", 0)), ConfigError);
  EXPECT_THROW(parse_experiment(bad("samples", 1)), ConfigError);
  EXPECT_THROW(parse_experiment(bad("record_blocks", 5)), ConfigError);
  EXPECT_THROW(parse_experiment(bad("block_sizes", json::array({16}))), ConfigError);
  EXPECT_THROW(parse_experiment(bad("window", json::array({0.6, 0.4}))), ConfigError);
  EXPECT_THROW(parse_experiment(bad("horizon", "long")), ConfigError);
  EXPECT_THROW(parse_experiment(bad("initial", {{"type", "file"}, {"path", "/nonexistent.csv"}})), ConfigError);
  EXPECT_THROW(
      parse_experiment(bad("schedule", {{"densities", {{{"t_start", 0.0}, {"rho_minus", 1.5}, {"rho_plus", 0.2}}}}})),
      ConfigError);
  EXPECT_THROW(parse_experiment(bad("schedule", {{"intervals", {{{"t_start", 0.0}, {"alpha", 0.0}, {"beta", 1.0},
                                                                 {"gamma", 0.0}, {"delta", 1.0}}}}})),
               ConfigError);
  EXPECT_THROW(parse_experiment(bad("schedule", {{"densities", {{{"t_start", 0.0}, {"rho_minus", 0.5},
                                                                 {"rho_plus", 0.5}}}},
                                                 {"t_end", 0.1}})),
               ConfigError);
  auto strict = base;
  strict["scaling"] = {{"mode", "strict"}, {"N", 64}, {"kappa", 0.4}};
  EXPECT_THROW(parse_experiment(strict), ConfigError);
  auto k_large = base;
  k_large["scaling"]["K"] = 16;
  EXPECT_THROW(parse_experiment(k_large), ConfigError);
}

TEST(Config, ShippedConfigurationsParse) {
  const fs::path dir = fs::path(ASEP_SOURCE_DIR) / "configs";
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_experiment(e.path())) << e.path();
    ++count;
  }
  EXPECT_GE(count, 5u);
}

TEST(Ensemble, IndependentOfThreadCountAndReplicaGrouping) {
  EnsembleOptions o;
  o.plan = ScalingPlan::exploratory(64, 4.0, 64.0, 4);
  o.schedule = density_schedule(0.8, 0.2);
  o.u0 = riemann_initial(0.8, 0.2, 64);
  o.horizon = 0.2;
  o.sample_times = uniform_sample_times(0.2, 5);
  o.dilation = 64.0;
  o.replicas = 4;
  o.seed = 17;
  o.threads = 1;
  const auto serial = run_ensemble(o);
  o.threads = 3;
  const auto threaded = run_ensemble(o);
  ASSERT_EQ(serial.mean_field.size(), threaded.mean_field.size());
  for (std::size_t k = 0; k < serial.mean_field.size(); ++k)
    EXPECT_EQ(serial.mean_field.frames[k], threaded.mean_field.frames[k]);

  // replicas 0..3 split into two groups of two give the same replica seeds and sums
  o.replicas = 2;
  const auto first = run_ensemble(o);
  o.seed_offset = 2;
  const auto second = run_ensemble(o);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(first.replicas[r].seed, serial.replicas[r].seed);
    EXPECT_EQ(second.replicas[r].seed, serial.replicas[r + 2].seed);
  }
  for (std::size_t k = 0; k < serial.mean_field.size(); ++k) {
    for (std::size_t i = 0; i < 64; ++i) {
      const std::int64_t total = first.replicas[0].smoothed_num[k][i] + first.replicas[1].smoothed_num[k][i] +
                                 second.replicas[0].smoothed_num[k][i] + second.replicas[1].smoothed_num[k][i];
      EXPECT_EQ(static_cast<double>(total) / (16.0 * 4.0), serial.mean_field.frames[k][i]);
    }
  }
}

TEST(Experiment, HydrodynamicRunIsByteReproducible) {
  const auto root = scratch("repro");
  auto j1 = small_hydrodynamic(root / "a");
  auto j2 = small_hydrodynamic(root / "b");
  j2["threads"] = 2;
  const auto m1 = run_experiment(parse_experiment(j1));
  const auto m2 = run_experiment(parse_experiment(j2));
  EXPECT_TRUE(m1.complete);
  const auto a = read_tree(root / "a"), b = read_tree(root / "b");
  EXPECT_EQ(a, b);
  for (const char* f : {"solver.csv", "ensemble_N32.csv", "ensemble_N64.csv", "distances.csv", "block_residuals.csv",
                        "summary.csv", "replicas/N64_r2.csv"})
    EXPECT_TRUE(a.count(f)) << f;
  std::ifstream in(root / "a" / "manifest.json");
  const auto manifest = json::parse(in);
  EXPECT_EQ(manifest.at("complete"), true);
  EXPECT_EQ(manifest.at("master_seed"), 5);
  EXPECT_EQ(manifest.at("spec_hash"), m1.spec_hash);
  EXPECT_NE(m1.spec_hash, m2.spec_hash);
}

TEST(Experiment, SolverOnlyMatchesRiemannOracle) {
  const auto root = scratch("solver");
  const auto spec = load_experiment(fs::path(ASEP_SOURCE_DIR) / "configs" / "solver_shock.json");
  auto s = spec;
  s.output = (root / "out").string();
  const auto m = run_experiment(s);
  EXPECT_LE(m.summary.at("oracle_l1_final").get<double>(), 0.01);
  EXPECT_EQ(m.summary.at("clamps").get<std::uint64_t>(), 0u);
  EXPECT_TRUE(fs::exists(root / "out" / "oracle_distances.csv"));
}

TEST(Experiment, PhaseScanSolverAgreesWithProfile) {
  const auto root = scratch("phase");
  json j{{"mode", "phase-scan"},
         {"scaling", {{"mode", "exploratory"}, {"N", 32}, {"sigma", 2.0}, {"sigma_tilde", 8.0}, {"K", 2}}},
         {"scan_rho_minus", {0.2, 0.8}},
         {"scan_rho_plus", {0.3, 0.9}},
         {"horizon", 0.2},
         {"replicas", 2},
         {"samples", 5},
         {"solver_cells", 200},
         {"record_blocks", 4},
         {"output", (root / "out").string()}};
  const auto m = run_experiment(parse_experiment(j));
  EXPECT_EQ(m.summary.at("points").get<int>(), 4);
  EXPECT_EQ(m.summary.at("solver_agrees"), m.summary.at("solver_compared"));
  std::ifstream in(root / "out" / "phase_scan.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "rho_minus,rho_plus,phase,u_bar,current,solver_bulk,kmc_bulk,kmc_se");
}

TEST(Cli, ExitCodes) {
  const auto root = scratch("cli");
  write_json(root / "good.json", small_hydrodynamic(root / "out"));
  auto tiny = small_hydrodynamic(root / "partial");
  tiny["event_budget"] = 100;
  write_json(root / "budget.json", tiny);
  auto broken = small_hydrodynamic(root / "x");
  broken["horizon"] = -1;
  write_json(root / "broken.json", broken);
  std::ofstream(root / "garbage.json") << "{ not json";

  EXPECT_EQ(run_cli("validate-config --config " + (root / "good.json").string()), 0);
  EXPECT_EQ(run_cli("simulate --config " + (root / "good.json").string()), 0);
  EXPECT_TRUE(fs::exists(root / "out" / "manifest.json"));
  EXPECT_EQ(run_cli("simulate --config " + (root / "broken.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (root / "garbage.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (root / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (root / "budget.json").string()), 3);
  std::ifstream in(root / "partial" / "manifest.json");
  EXPECT_EQ(json::parse(in).at("complete"), false);
  EXPECT_EQ(run_cli("no-such-command"), 2);

  const auto solver = (root / "out" / "solver.csv").string();
  EXPECT_EQ(run_cli("compare " + solver + " " + solver + " --out " + (root / "cmp.csv").string()), 0);
  std::ifstream cmp(root / "cmp.csv");
  std::string last, line;
  while (std::getline(cmp, line)) last = line;
  EXPECT_EQ(last, "mean,0,0");
}

TEST(Cli, SeedOverrideChangesReplicas) {
  const auto root = scratch("seed");
  write_json(root / "cfg.json", small_hydrodynamic(root / "unused"));
  ASSERT_EQ(run_cli("simulate --config " + (root / "cfg.json").string() + " --seed 5 --out " + (root / "a").string()), 0);
  ASSERT_EQ(run_cli("simulate --config " + (root / "cfg.json").string() + " --seed 6 --out " + (root / "b").string()), 0);
  const auto a = read_tree(root / "a"), b = read_tree(root / "b");
  EXPECT_EQ(a.at("solver.csv"), b.at("solver.csv"));
  EXPECT_NE(a.at("replicas/N32_r0.csv"), b.at("replicas/N32_r0.csv"));
}
