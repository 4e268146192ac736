#pragma once

// Experiment orchestration: replica ensembles, solver references,
// comparisons and the files written for each run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asep/burgers.hpp"
#include "asep/config.hpp"
#include "asep/core_model.hpp"
#include "asep/csv.hpp"
#include "asep/entropy.hpp"
#include "asep/grid_field.hpp"
#include "asep/kmc_engine.hpp"
#include "asep/observables.hpp"
#include "asep/parallel.hpp"
#include "asep/rng.hpp"

namespace asep {

inline constexpr const char* kVersion = "1.0.0";

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Comparison of space-time fields

struct DistanceRow {
  double t = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct DistanceTable {
  std::vector<DistanceRow> rows;
  double mean_l1 = 0.0;  ///< mean over the matched sample times
  double mean_l2 = 0.0;

  void write_csv(std::ostream& os) const {
    os << "t,l1,l2\n";
    for (const auto& r : rows) os << csv::num(r.t) << ',' << csv::num(r.l1) << ',' << csv::num(r.l2) << '\n';
    os << "mean," << csv::num(mean_l1) << ',' << csv::num(mean_l2) << '\n';
  }
};

inline bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

/// Per-time L1 and L2 distances over [lo, hi] at the sample times present
/// in both fields, after restriction onto the coarser grid.
inline DistanceTable compare(const SpaceTimeField& a, const SpaceTimeField& b, double lo = 0.0, double hi = 1.0) {
  DistanceTable out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (j < b.size() && b.times[j] < a.times[i] && !same_time(a.times[i], b.times[j])) ++j;
    if (j < b.size() && same_time(a.times[i], b.times[j])) {
      out.rows.push_back({a.times[i], l1_distance(a.frames[i], b.frames[j], lo, hi),
                          l2_distance(a.frames[i], b.frames[j], lo, hi)});
    }
  }
  if (out.rows.empty()) throw DomainError("compare: the two fields share no sample time");
  for (const auto& r : out.rows) {
    out.mean_l1 += r.l1;
    out.mean_l2 += r.l2;
  }
  out.mean_l1 /= static_cast<double>(out.rows.size());
  out.mean_l2 /= static_cast<double>(out.rows.size());
  return out;
}

// ---------------------------------------------------------------------------
// Replica ensembles

struct EnsembleOptions {
  ScalingPlan plan;
  RateSchedule schedule = density_schedule(0.5, 0.5);
  GridField u0{1, 0.5};
  double horizon = 1.0;
  std::vector<double> sample_times;
  double dilation = 1.0;
  std::size_t replicas = 1;
  std::uint64_t seed = 1;
  std::uint64_t seed_offset = 0;  ///< replica r uses replica_seed(seed, seed_offset + r)
  std::uint64_t event_budget = 2'000'000'000ULL;
  std::size_t threads = 0;
  std::vector<std::size_t> residual_blocks;  ///< block sizes for residual diagnostics
  std::size_t record_blocks = 0;
  const SpaceTimeField* reference = nullptr;  ///< for single-replica distances
  double window_lo = 0.0, window_hi = 1.0;
  double burn_in = 0.2;  ///< fraction of the horizon excluded from time averages of bulk quantities
};

struct ReplicaResult {
  std::uint64_t seed = 0;
  TrajectoryRecord record;
  std::vector<std::vector<std::int64_t>> smoothed_num;  ///< K^2 * smoothed density, per reached sample
  std::vector<BlockResiduals> residuals;                ///< time averages, one per residual block size
  std::vector<double> single_l1;                        ///< per reached sample, against the reference
  double bulk_density = 0.0;                            ///< time average over the middle half of the lattice
  double current = 0.0;                                 ///< net right-boundary flux per unit microscopic time
  bool complete = true;
};

struct EnsembleResult {
  SpaceTimeField mean_field;  ///< ensemble-averaged smoothed density, on N cells
  std::vector<ReplicaResult> replicas;
  std::uint64_t events = 0;
  bool complete = true;
};

namespace detail {

inline double bulk_density(const LatticeConfig& eta) {
  const std::size_t n = eta.size(), lo = n / 4, hi = n - n / 4;
  std::int64_t s = 0;
  for (std::size_t k = lo; k < hi; ++k) s += eta[k];
  return static_cast<double>(s) / static_cast<double>(hi - lo);
}

inline ReplicaResult run_replica(const EnsembleOptions& opt, std::size_t r) {
  ReplicaResult res;
  res.seed = replica_seed(opt.seed, opt.seed_offset + r);
  Rng init(res.seed);
  auto eta = sample_initial(opt.u0, opt.plan.N, init);
  Simulator sim(std::move(eta), opt.schedule, opt.plan, opt.dilation, splitmix64(res.seed ^ 0xA5A5A5A5A5A5A5A5ULL));

  const std::size_t nk = opt.residual_blocks.size();
  std::vector<BlockResiduals> acc(nk);
  std::size_t acc_count = 0, bulk_count = 0;
  double bulk_sum = 0.0;
  double t_first = -1.0;
  std::int64_t h_first = 0;
  const double t_burn = opt.burn_in * opt.horizon;

  Observer obs = [&](const Snapshot& s) {
    const auto& eta_t = s.config;
    auto num = smoothed_density_numerators(eta_t, opt.plan.K);
    if (opt.reference) {
      const double k2 = static_cast<double>(opt.plan.K * opt.plan.K);
      std::vector<double> cells(num.size());
      for (std::size_t i = 0; i < num.size(); ++i) cells[i] = static_cast<double>(num[i]) / k2;
      res.single_l1.push_back(
          l1_distance(GridField(std::move(cells)), opt.reference->frames.at(s.sample_index), opt.window_lo,
                      opt.window_hi));
    }
    res.smoothed_num.push_back(std::move(num));
    if (s.sample_index > 0) {
      const auto rho = reservoir_densities(opt.schedule, s.t);
      for (std::size_t q = 0; q < nk; ++q) {
        const auto b = block_residuals(eta_t, opt.residual_blocks[q], rho);
        acc[q].one_block += b.one_block;
        acc[q].h1 += b.h1;
        acc[q].left += b.left;
        acc[q].right += b.right;
      }
      ++acc_count;
    }
    if (s.t >= t_burn) {
      bulk_sum += bulk_density(eta_t);
      ++bulk_count;
      if (t_first < 0.0) {
        t_first = s.t;
        h_first = s.counting.h(eta_t.size());
      }
      if (s.t > t_first) {
        res.current = static_cast<double>(s.counting.h(eta_t.size()) - h_first) / ((s.t - t_first) * opt.dilation);
      }
    }
  };

  RunOptions ro;
  ro.horizon = opt.horizon;
  ro.sample_times = opt.sample_times;
  ro.event_budget = opt.event_budget;
  ro.record_blocks = opt.record_blocks;
  const Observer observers[] = {obs};
  try {
    res.record = run(sim, ro, observers);
  } catch (const BudgetExceeded& e) {
    res.record = e.partial();
    res.complete = false;
  }
  for (auto& a : acc) {
    const double c = static_cast<double>(std::max<std::size_t>(acc_count, 1));
    a.one_block /= c;
    a.h1 /= c;
    a.left /= c;
    a.right /= c;
  }
  res.residuals = std::move(acc);
  res.bulk_density = bulk_count ? bulk_sum / static_cast<double>(bulk_count) : 0.0;
  return res;
}

}  // namespace detail

/// Runs opt.replicas independent replicas and averages their smoothed
/// densities. Integer accumulation keeps the mean independent of replica order.
inline EnsembleResult run_ensemble(const EnsembleOptions& opt) {
  if (opt.sample_times.empty()) throw DomainError("run_ensemble: sample times required");
  EnsembleResult out;
  out.replicas = parallel_map(opt.replicas, opt.threads, [&](std::size_t r) { return detail::run_replica(opt, r); });
  std::size_t reached = opt.sample_times.size();
  for (const auto& r : out.replicas) {
    out.events += r.record.events;
    out.complete = out.complete && r.complete;
    reached = std::min(reached, r.smoothed_num.size());
  }
  const std::size_t n = opt.plan.N;
  const double denom = static_cast<double>(opt.plan.K * opt.plan.K) * static_cast<double>(opt.replicas);
  for (std::size_t k = 0; k < reached; ++k) {
    std::vector<std::int64_t> sum(n, 0);
    for (const auto& r : out.replicas)
      for (std::size_t i = 0; i < n; ++i) sum[i] += r.smoothed_num[k][i];
    std::vector<double> cells(n);
    for (std::size_t i = 0; i < n; ++i) cells[i] = static_cast<double>(sum[i]) / denom;
    out.mean_field.push(opt.sample_times[k], GridField(std::move(cells)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest and output directory

struct FileEntry {
  std::string path;
  std::uint64_t bytes = 0;
  std::string fnv1a;
};

struct RunManifest {
  std::string spec_hash;
  std::string version = kVersion;
  std::string mode;
  std::string started, finished;
  std::uint64_t master_seed = 0;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::vector<FileEntry> files;
  bool complete = true;
  std::string incomplete_reason;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["mode"] = mode;
    j["spec_hash"] = spec_hash;
    j["started"] = started;
    j["finished"] = finished;
    j["complete"] = complete;
    if (!complete) j["incomplete_reason"] = incomplete_reason;
    j["master_seed"] = master_seed;
    auto& s = j["seeds"] = nlohmann::ordered_json::array();
    for (const auto& [task, seed] : seeds) s.push_back({{"task", task}, {"seed", seed}});
    auto& f = j["files"] = nlohmann::ordered_json::array();
    for (const auto& e : files) f.push_back({{"path", e.path}, {"bytes", e.bytes}, {"fnv1a", e.fnv1a}});
    j["summary"] = summary;
    return j;
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Writes files below a root directory and keeps an inventory of them.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  template <class Writer>
  void write(const std::string& rel, Writer writer) {
    std::ostringstream os;
    writer(os);
    put(rel, os.str());
  }

  void put(const std::string& rel, const std::string& content) {
    const auto path = root_ / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
    files_[rel] = FileEntry{rel, content.size(), fnv1a_hex(content)};
  }

  std::vector<FileEntry> inventory() const {
    std::vector<FileEntry> v;
    for (const auto& [k, e] : files_) v.push_back(e);
    return v;
  }

 private:
  std::filesystem::path root_;
  std::map<std::string, FileEntry> files_;
};

// ---------------------------------------------------------------------------
// Experiment modes

namespace detail {

inline std::vector<double> sample_grid(double horizon, std::size_t samples) {
  return uniform_sample_times(horizon, samples);
}

inline nlohmann::ordered_json scaling_json(const ScalingPlan& plan) {
  const auto rep = validate_scaling(plan);
  nlohmann::ordered_json j;
  j["N"] = plan.N;
  j["mode"] = plan.mode == ScalingMode::strict ? "strict" : "exploratory";
  j["sigma"] = plan.sigma;
  j["sigma_tilde"] = plan.sigma_tilde;
  j["K"] = plan.K;
  j["p"] = plan.p;
  auto& r = j["ratios"] = nlohmann::ordered_json::object();
  for (const auto& q : rep.ratios) r[q.name] = {{"value", q.value}, {"flagged", q.flagged}};
  return j;
}

/// The smallest window [w, 1-w] excluding the boundary blocks at every N.
inline std::pair<double, double> common_window(const ExperimentSpec& spec) {
  if (spec.window) return *spec.window;
  double w = 0.0;
  for (std::size_t n : spec.scaling.sizes) {
    const auto plan = spec.scaling.plan(n);
    w = std::max(w, static_cast<double>(plan.K) / static_cast<double>(n));
  }
  return {w, 1.0 - w};
}

inline void write_replicas(OutputDir& out, const std::string& prefix, const EnsembleResult& e) {
  for (std::size_t r = 0; r < e.replicas.size(); ++r)
    out.write(prefix + "_r" + std::to_string(r) + ".csv", [&](std::ostream& os) { e.replicas[r].record.write_csv(os); });
}

inline EnsembleOptions base_options(const ExperimentSpec& spec, const ScalingPlan& plan) {
  EnsembleOptions o;
  o.plan = plan;
  o.schedule = spec.schedule;
  o.u0 = spec.initial.profile(std::max<std::size_t>(plan.N, spec.solver_cells));
  o.horizon = spec.horizon;
  o.sample_times = sample_grid(spec.horizon, spec.samples);
  o.replicas = spec.replicas;
  o.seed = spec.seed;
  o.event_budget = spec.event_budget;
  o.threads = spec.threads;
  o.record_blocks = spec.record_blocks;
  o.burn_in = spec.burn_in;
  return o;
}

inline void note_incomplete(RunManifest& m, const std::string& what) {
  if (m.complete) m.incomplete_reason = what;
  m.complete = false;
}

inline void run_hydrodynamic(const ExperimentSpec& spec, OutputDir& out, RunManifest& m) {
  const auto ts = sample_grid(spec.horizon, spec.samples);
  const auto u0 = spec.initial.profile(spec.solver_cells);
  const auto reference = solve(u0, spec.schedule, spec.horizon, spec.solver_cells, ts, FluxFn{spec.scaling.p});
  out.write("solver.csv", [&](std::ostream& os) { write_space_time_csv(os, reference, "u"); });
  const auto [lo, hi] = common_window(spec);
  m.summary["window"] = {lo, hi};

  std::ostringstream dist, resid, summ;
  dist << "N,t,l1,l1_window,l2,single_l1_window_mean\n";
  resid << "N,K,replica,one_block,h1,left,right\n";
  summ << "N,K,sigma,sigma_tilde,events,complete,l1_mean,l1_window_mean,single_l1_window_mean\n";
  auto& per_n = m.summary["sizes"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (std::size_t n : spec.scaling.sizes) {
    const auto plan = spec.scaling.plan(n);
    auto opt = base_options(spec, plan);
    opt.dilation = Simulator::hyperbolic_dilation(plan);
    opt.seed_offset = offset;
    opt.reference = &reference;
    opt.window_lo = lo;
    opt.window_hi = hi;
    opt.residual_blocks = spec.block_sizes;
    if (std::find(opt.residual_blocks.begin(), opt.residual_blocks.end(), plan.K) == opt.residual_blocks.end())
      opt.residual_blocks.push_back(plan.K);
    const auto e = run_ensemble(opt);
    for (std::size_t r = 0; r < e.replicas.size(); ++r)
      m.seeds.emplace_back("N" + std::to_string(n) + "/r" + std::to_string(r), e.replicas[r].seed);
    offset += spec.replicas;
    if (!e.complete) note_incomplete(m, "event budget exhausted at N = " + std::to_string(n));

    const std::string tag = "N" + std::to_string(n);
    out.write("ensemble_" + tag + ".csv", [&](std::ostream& os) { write_space_time_csv(os, e.mean_field, "rho"); });
    write_replicas(out, "replicas/" + tag, e);

    double l1_mean = 0.0, l1w_mean = 0.0, single_mean = 0.0;
    const std::size_t reached = e.mean_field.size();
    for (std::size_t k = 0; k < reached; ++k) {
      const double l1 = l1_distance(e.mean_field.frames[k], reference.frames[k]);
      const double l1w = l1_distance(e.mean_field.frames[k], reference.frames[k], lo, hi);
      const double l2 = l2_distance(e.mean_field.frames[k], reference.frames[k]);
      std::vector<double> singles;
      for (const auto& r : e.replicas) singles.push_back(r.single_l1.at(k));
      const double single = ensemble_stat(singles).mean;
      dist << n << ',' << csv::num(ts[k]) << ',' << csv::num(l1) << ',' << csv::num(l1w) << ',' << csv::num(l2)
           << ',' << csv::num(single) << '\n';
      l1_mean += l1;
      l1w_mean += l1w;
      single_mean += single;
    }
    const double dn = static_cast<double>(std::max<std::size_t>(reached, 1));
    l1_mean /= dn;
    l1w_mean /= dn;
    single_mean /= dn;

    nlohmann::ordered_json js = scaling_json(plan);
    js["events"] = e.events;
    js["complete"] = e.complete;
    js["l1_mean"] = l1_mean;
    js["l1_window_mean"] = l1w_mean;
    js["single_l1_window_mean"] = single_mean;
    auto& jr = js["block_residuals"] = nlohmann::ordered_json::array();
    for (std::size_t q = 0; q < opt.residual_blocks.size(); ++q) {
      std::vector<double> ob, h1, lf, rt;
      for (std::size_t r = 0; r < e.replicas.size(); ++r) {
        const auto& b = e.replicas[r].residuals[q];
        resid << n << ',' << opt.residual_blocks[q] << ',' << r << ',' << csv::num(b.one_block) << ','
              << csv::num(b.h1) << ',' << csv::num(b.left) << ',' << csv::num(b.right) << '\n';
        ob.push_back(b.one_block);
        h1.push_back(b.h1);
        lf.push_back(b.left);
        rt.push_back(b.right);
      }
      auto stat = [](std::vector<double> v) {
        const auto s = ensemble_stat(std::move(v));
        return nlohmann::ordered_json{{"mean", s.mean}, {"se", s.se}};
      };
      jr.push_back({{"K", opt.residual_blocks[q]},
                    {"one_block", stat(ob)},
                    {"h1", stat(h1)},
                    {"left", stat(lf)},
                    {"right", stat(rt)}});
    }
    per_n.push_back(js);
    summ << n << ',' << plan.K << ',' << csv::num(plan.sigma) << ',' << csv::num(plan.sigma_tilde) << ',' << e.events
         << ',' << (e.complete ? "true" : "false") << ',' << csv::num(l1_mean) << ',' << csv::num(l1w_mean) << ','
         << csv::num(single_mean) << '\n';
  }
  out.put("distances.csv", dist.str());
  out.put("block_residuals.csv", resid.str());
  out.put("summary.csv", summ.str());
}

inline void run_quasi_static(const ExperimentSpec& spec, OutputDir& out, RunManifest& m) {
  const auto ts = sample_grid(spec.horizon, spec.samples);
  std::ostringstream dist, summ;
  dist << "N,t,rho_minus,rho_plus,phase,u_bar,l1_window\n";
  summ << "N,K,events,complete,l1_window_mean\n";
  const auto [lo, hi] = common_window(spec);
  m.summary["window"] = {lo, hi};
  auto& per_n = m.summary["sizes"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (std::size_t n : spec.scaling.sizes) {
    const auto plan = spec.scaling.plan(n);
    auto opt = base_options(spec, plan);
    opt.dilation = Simulator::quasi_static_dilation(plan, spec.quasi_static_exponent);
    opt.seed_offset = offset;
    const auto e = run_ensemble(opt);
    for (std::size_t r = 0; r < e.replicas.size(); ++r)
      m.seeds.emplace_back("N" + std::to_string(n) + "/r" + std::to_string(r), e.replicas[r].seed);
    offset += spec.replicas;
    if (!e.complete) note_incomplete(m, "event budget exhausted at N = " + std::to_string(n));
    const std::string tag = "N" + std::to_string(n);
    out.write("ensemble_" + tag + ".csv", [&](std::ostream& os) { write_space_time_csv(os, e.mean_field, "rho"); });
    write_replicas(out, "replicas/" + tag, e);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < e.mean_field.size(); ++k) {
      const auto rho = reservoir_densities(spec.schedule, ts[k]);
      const auto pt = quasi_stationary_profile(rho.rho_minus, rho.rho_plus, plan.p);
      dist << n << ',' << csv::num(ts[k]) << ',' << csv::num(rho.rho_minus) << ',' << csv::num(rho.rho_plus) << ','
           << to_string(pt.phase) << ',';
      if (!pt.u_bar) {
        dist << "nan,nan\n";
        continue;
      }
      const double l1 = l1_distance(e.mean_field.frames[k], GridField(n, *pt.u_bar), lo, hi);
      dist << csv::num(*pt.u_bar) << ',' << csv::num(l1) << '\n';
      if (ts[k] >= spec.burn_in * spec.horizon) {
        sum += l1;
        ++count;
      }
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    auto js = scaling_json(plan);
    js["events"] = e.events;
    js["l1_window_mean"] = mean;
    per_n.push_back(js);
    summ << n << ',' << plan.K << ',' << e.events << ',' << (e.complete ? "true" : "false") << ',' << csv::num(mean)
         << '\n';
  }
  out.put("distances.csv", dist.str());
  out.put("summary.csv", summ.str());
}

inline void run_stationary(const ExperimentSpec& spec, OutputDir& out, RunManifest& m) {
  std::ostringstream rows, summ;
  rows << "rho_bar,N,replica,bulk_density,current\n";
  summ << "rho_bar,N,bulk_mean,bulk_se,z,current_mean,current_se,current_expected,events,complete\n";
  auto& stats = m.summary["stationary"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (std::size_t n : spec.scaling.sizes) {
    for (double rb : spec.rho_bar) {
      auto plan = spec.scaling.plan(n);
      plan.sigma_tilde = 1.0;  // product measures are stationary only without reservoir acceleration
      auto opt = base_options(spec, plan);
      opt.schedule = liggett_rates(plan.p, plan.sigma, rb, rb);
      opt.u0 = GridField(1, rb);
      opt.dilation = Simulator::hyperbolic_dilation(plan);
      opt.seed_offset = offset;
      offset += spec.replicas;
      const auto e = run_ensemble(opt);
      if (!e.complete) note_incomplete(m, "event budget exhausted in stationary run");
      std::vector<double> dens, cur;
      for (std::size_t r = 0; r < e.replicas.size(); ++r) {
        const auto& rr = e.replicas[r];
        m.seeds.emplace_back("rho" + csv::num(rb) + "/N" + std::to_string(n) + "/r" + std::to_string(r), rr.seed);
        rows << csv::num(rb) << ',' << n << ',' << r << ',' << csv::num(rr.bulk_density) << ','
             << csv::num(rr.current) << '\n';
        dens.push_back(rr.bulk_density);
        cur.push_back(rr.current);
      }
      const auto sd = ensemble_stat(dens), sc = ensemble_stat(cur);
      const double z = sd.se > 0.0 ? (sd.mean - rb) / sd.se : 0.0;
      const double expected = plan.p * rb * (1.0 - rb);
      summ << csv::num(rb) << ',' << n << ',' << csv::num(sd.mean) << ',' << csv::num(sd.se) << ',' << csv::num(z)
           << ',' << csv::num(sc.mean) << ',' << csv::num(sc.se) << ',' << csv::num(expected) << ',' << e.events
           << ',' << (e.complete ? "true" : "false") << '\n';
      stats.push_back({{"rho_bar", rb},
                       {"N", n},
                       {"bulk_mean", sd.mean},
                       {"bulk_se", sd.se},
                       {"z", z},
                       {"current_mean", sc.mean},
                       {"current_se", sc.se},
                       {"current_expected", expected},
                       {"events", e.events}});
    }
  }
  out.put("stationary.csv", rows.str());
  out.put("summary.csv", summ.str());
}

inline void run_phase_scan(const ExperimentSpec& spec, OutputDir& out, RunManifest& m) {
  const std::size_t n = spec.scaling.sizes.front();
  const auto plan = spec.scaling.plan(n);
  const std::size_t mc = spec.solver_cells;
  std::ostringstream rows;
  rows << "rho_minus,rho_plus,phase,u_bar,current,solver_bulk,kmc_bulk,kmc_se\n";
  std::vector<PhasePoint> pts;
  std::uint64_t offset = 0;
  std::size_t agree = 0, compared = 0;
  for (double rm : spec.scan_rho_minus) {
    for (double rp : spec.scan_rho_plus) {
      const auto pt = quasi_stationary_profile(rm, rp, plan.p);
      pts.push_back(pt);
      const auto sched = density_schedule(rm, rp);
      const auto sol = solve(GridField(mc, 0.5), sched, spec.solver_horizon, mc, {spec.solver_horizon},
                             FluxFn{plan.p});
      const auto& fin = sol.frames.back();
      double solver_bulk = 0.0;
      for (std::size_t j = mc / 4; j < mc - mc / 4; ++j) solver_bulk += fin[j];
      solver_bulk /= static_cast<double>(mc - 2 * (mc / 4));
      auto opt = base_options(spec, plan);
      opt.schedule = sched;
      opt.u0 = GridField(1, 0.5);
      opt.dilation = Simulator::hyperbolic_dilation(plan);
      opt.seed_offset = offset;
      offset += spec.replicas;
      const auto e = run_ensemble(opt);
      if (!e.complete) note_incomplete(m, "event budget exhausted in phase scan");
      std::vector<double> dens;
      for (std::size_t r = 0; r < e.replicas.size(); ++r) {
        dens.push_back(e.replicas[r].bulk_density);
        m.seeds.emplace_back("rm" + csv::num(rm) + "/rp" + csv::num(rp) + "/r" + std::to_string(r),
                             e.replicas[r].seed);
      }
      const auto sd = ensemble_stat(dens);
      if (pt.u_bar) {
        ++compared;
        if (std::abs(solver_bulk - *pt.u_bar) <= 0.02) ++agree;
      }
      rows << csv::num(rm) << ',' << csv::num(rp) << ',' << to_string(pt.phase) << ','
           << (pt.u_bar ? csv::num(*pt.u_bar) : std::string("nan")) << ',' << csv::num(pt.current) << ','
           << csv::num(solver_bulk) << ',' << csv::num(sd.mean) << ',' << csv::num(sd.se) << '\n';
    }
  }
  out.put("phase_scan.csv", rows.str());
  out.write("phase_diagram.csv", [&](std::ostream& os) { write_phase_csv(os, pts); });
  m.summary["points"] = pts.size();
  m.summary["solver_agrees"] = agree;
  m.summary["solver_compared"] = compared;
}

inline void run_solver_only(const ExperimentSpec& spec, OutputDir& out, RunManifest& m) {
  const auto ts = sample_grid(spec.horizon, spec.samples);
  const auto u0 = spec.initial.profile(spec.solver_cells);
  const FluxFn flux{spec.scaling.p};
  const auto res = solve_detailed(u0, spec.schedule, spec.horizon, spec.solver_cells, ts, flux);
  out.write("solver.csv", [&](std::ostream& os) { write_space_time_csv(os, res.field, "u"); });
  m.summary["final_mass"] = res.final_state.u.integral();
  m.summary["left_flux_integral"] = res.final_state.left_flux_integral;
  m.summary["right_flux_integral"] = res.final_state.right_flux_integral;
  m.summary["clamps"] = res.final_state.clamps;
  if (spec.initial.kind == InitialProfile::Kind::riemann && spec.schedule.intervals().size() == 1) {
    SpaceTimeField oracle;
    for (double t : ts)
      oracle.push(t, riemann_exact(spec.initial.u_left, spec.initial.u_right, flux, t, spec.solver_cells,
                                   spec.initial.x0));
    const auto table = compare(res.field, oracle);
    out.write("oracle_distances.csv", [&](std::ostream& os) { table.write_csv(os); });
    m.summary["oracle_l1_final"] = table.rows.back().l1;
    m.summary["oracle_l1_mean"] = table.mean_l1;
  }
}

/// Entropy and boundary checks on a solver output, as report rows.
inline std::vector<DiagnosticRow> entropy_diagnostics(const SpaceTimeField& field, const GridField& u0,
                                                      const RateSchedule& schedule, double p, double smoothing,
                                                      const std::vector<double>& levels, const std::string& label) {
  std::vector<DiagnosticRow> rows;
  const double T = field.times.back();
  const auto pair = smoothed_kruzkov(smoothing);
  const std::vector<TestFunction> psis{gaussian_test_function(0.5, 0.15, T), affine_test_function(1.0, 0.0, T),
                                       affine_test_function(1.0, -1.0, T)};
  constexpr double tol = 1e-3;
  for (const auto& psi : psis) {
    for (double h : levels) {
      const auto o = otto_integral_inequality(field, pair, h, psi, u0, schedule, p);
      rows.push_back({"otto_inequality", label + ";" + psi.name + ";h=" + csv::num(h), o.lhs - o.rhs, tol,
                      o.lhs <= o.rhs + tol});
    }
  }
  const double dx = field.frames.front().dx();
  const auto one = [](double) { return 1.0; };
  for (int cells : {2, 4, 8}) {
    const double r = cells * dx;
    const double left = otto_boundary_check(field, pair, schedule, Side::left, r, one);
    const double right = otto_boundary_check(field, pair, schedule, Side::right, r, one);
    rows.push_back({"otto_boundary_left", label + ";r=" + std::to_string(cells) + "dx", left, tol, left <= tol});
    rows.push_back({"otto_boundary_right", label + ";r=" + std::to_string(cells) + "dx", right, -tol, right >= -tol});
  }
  const auto bump = bump_test_function(0.5, 0.3, 0.5 * T, 0.45 * T, T);
  for (double h : levels) {
    const double x = entropy_production(field, LaxPair::quadratic(h), bump, p);
    rows.push_back({"entropy_production", label + ";f=(u-h)^2;h=" + csv::num(h), x, tol, x <= tol});
  }
  return rows;
}

inline void run_diagnostics(const ExperimentSpec& spec, OutputDir& out, RunManifest& m) {
  const auto ts = sample_grid(spec.horizon, std::max<std::size_t>(spec.samples, 2));
  const auto u0 = spec.initial.profile(spec.solver_cells);
  const auto field = solve(u0, spec.schedule, spec.horizon, spec.solver_cells, ts, FluxFn{spec.scaling.p});
  auto rows = entropy_diagnostics(field, u0, spec.schedule, spec.scaling.p, spec.kruzkov_smoothing,
                                  spec.entropy_levels, "solver");
  for (std::size_t n : spec.scaling.sizes) {
    const auto plan = spec.scaling.plan(n);
    if (!(plan.sigma > 1.0)) continue;
    const AuxiliaryWeight w(static_cast<double>(n), plan.sigma);
    const auto rep = auxiliary_weight_properties(w);
    const std::string par = "N=" + std::to_string(n) + ";sigma=" + csv::num(plan.sigma);
    rows.push_back({"auxiliary_total_variation", par, rep.total_variation, 2.0, rep.variation_ok});
    rows.push_back({"auxiliary_max_derivative", par, rep.max_derivative, w.derivative_bound(), rep.derivative_ok});
    rows.push_back({"auxiliary_range", par, rep.max_value, 1.0, rep.range_ok && rep.endpoints_zero});
  }
  out.write("diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, rows); });
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.pass ? 0 : 1;
  m.summary["checks"] = rows.size();
  m.summary["failed"] = failed;
}

}  // namespace detail

/// Runs one experiment and writes its outputs and manifest.json below
/// spec.output. Budget exhaustion does not throw: partial results are
/// written and the manifest is marked incomplete.
inline RunManifest run_experiment(const ExperimentSpec& spec) {
  RunManifest m;
  m.mode = to_string(spec.mode);
  m.master_seed = spec.seed;
  m.spec_hash = fnv1a_hex(spec.raw.dump());
  m.started = utc_timestamp();
  OutputDir out(spec.output);
  if (spec.mode != Mode::solver_only) {
    auto& sc = m.summary["scaling"] = nlohmann::ordered_json::array();
    for (std::size_t n : spec.scaling.sizes) sc.push_back(detail::scaling_json(spec.scaling.plan(n)));
  }
  switch (spec.mode) {
    case Mode::hydrodynamic: detail::run_hydrodynamic(spec, out, m); break;
    case Mode::quasi_static: detail::run_quasi_static(spec, out, m); break;
    case Mode::stationary: detail::run_stationary(spec, out, m); break;
    case Mode::phase_scan: detail::run_phase_scan(spec, out, m); break;
    case Mode::solver_only: detail::run_solver_only(spec, out, m); break;
    case Mode::diagnostics: detail::run_diagnostics(spec, out, m); break;
  }
  m.files = out.inventory();
  m.finished = utc_timestamp();
  out.put("manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace asep
