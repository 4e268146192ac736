#pragma once

// Exact event-driven simulation of the open ASEP with accelerated reservoirs
// and piecewise-constant boundary rates.
//
// Event slots:
//   0        flip at site 1 (left reservoir)
//   i=1..N-1 exchange across bond (i, i+1)
//   N        flip at site N (right reservoir)
// A bond whose two sites agree has rate 0: exchanging equal occupations is
// the identity, so these events are dropped without changing the law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asep/core_model.hpp"
#include "asep/csv.hpp"
#include "asep/grid_field.hpp"
#include "asep/rng.hpp"

namespace asep {

/// Per-slot event rates of the dilated generator.
///
/// Bond rates only take the values 0, dilation*(sigma+p) on a (1,0) pair and
/// dilation*sigma on a (0,1) pair, so the index keeps the two nonzero classes
/// as unordered lists with position maps. Sampling and single-site updates
/// are O(1) and exact; the total is recomputed from the class sizes after
/// every update, so it carries no accumulated round-off.
class EventRateTable {
 public:
  EventRateTable(const LatticeConfig& eta, const ScalingPlan& plan, const BoundaryRates& boundary,
                 double dilation)
      : n_(eta.size()), kind_(eta.size() + 1, kNone), pos_(eta.size() + 1, 0) {
    if (plan.N != n_) throw DomainError("EventRateTable: plan.N differs from lattice size");
    if (!(dilation > 0.0)) throw DomainError("EventRateTable: time dilation must be > 0");
    forward_ = dilation * (plan.sigma + plan.p);
    backward_ = dilation * plan.sigma;
    boundary_scale_ = dilation * plan.sigma_tilde;
    forward_list_.reserve(n_);
    backward_list_.reserve(n_);
    set_boundary(boundary);
    rebuild(eta);
  }

  std::size_t slots() const noexcept { return n_ + 1; }
  double total() const noexcept { return total_; }
  double left_flip_rate() const noexcept { return left_; }
  double right_flip_rate() const noexcept { return right_; }
  std::size_t forward_bonds() const noexcept { return forward_list_.size(); }
  std::size_t backward_bonds() const noexcept { return backward_list_.size(); }

  /// Rate of bond i (1-based, between sites i and i+1).
  double bond_rate(std::size_t i) const noexcept {
    return kind_[i] == kForward ? forward_ : kind_[i] == kBackward ? backward_ : 0.0;
  }

  double slot_rate(std::size_t slot) const noexcept {
    if (slot == 0) return left_;
    if (slot == n_) return right_;
    return bond_rate(slot);
  }

  /// Sets the reservoir rates; call refresh_boundaries() afterwards.
  void set_boundary(const BoundaryRates& r) noexcept {
    create_left_ = boundary_scale_ * r.alpha;
    annihilate_left_ = boundary_scale_ * r.gamma;
    create_right_ = boundary_scale_ * r.delta;
    annihilate_right_ = boundary_scale_ * r.beta;
  }

  void refresh_boundaries(const LatticeConfig& eta) noexcept {
    left_ = eta[0] ? annihilate_left_ : create_left_;
    right_ = eta[n_ - 1] ? annihilate_right_ : create_right_;
    update_total();
  }

  /// Refreshes every slot that depends on 0-based site k.
  void refresh_site(const LatticeConfig& eta, std::size_t k) noexcept {
    if (k == 0) left_ = eta[0] ? annihilate_left_ : create_left_;
    if (k == n_ - 1) right_ = eta[n_ - 1] ? annihilate_right_ : create_right_;
    if (k >= 1) reclassify(eta, k);
    if (k + 1 <= n_ - 1) reclassify(eta, k + 1);
    update_total();
  }

  /// Refreshes the slots touched by the exchange that was just applied
  /// across bond i (1-based). The bond itself changes class between forward
  /// and backward; each neighbouring bond either enters or leaves a class.
  void refresh_bond(const LatticeConfig& eta, std::size_t i) noexcept {
    if (i == 1) left_ = eta[0] ? annihilate_left_ : create_left_;
    if (i == n_ - 1) right_ = eta[n_ - 1] ? annihilate_right_ : create_right_;
    if (kind_[i] == kForward) {
      erase(forward_list_, i);
      insert(backward_list_, i, kBackward);
    } else {
      erase(backward_list_, i);
      insert(forward_list_, i, kForward);
    }
    if (i >= 2) reclassify(eta, i - 1);
    if (i + 1 <= n_ - 1) reclassify(eta, i + 1);
    update_total();
  }

  void rebuild(const LatticeConfig& eta) {
    forward_list_.clear();
    backward_list_.clear();
    std::fill(kind_.begin(), kind_.end(), kNone);
    for (std::size_t i = 1; i < n_; ++i) reclassify(eta, i);
    refresh_boundaries(eta);
  }

  /// Slot selected with probability proportional to its rate, for u in [0,1).
  std::size_t sample(double u) const noexcept {
    double x = u * total_;
    if (x < left_) return 0;
    x -= left_;
    if (x < right_) return n_;
    x -= right_;
    const double fwd_mass = forward_ * static_cast<double>(forward_list_.size());
    if ((x < fwd_mass && !forward_list_.empty()) || backward_list_.empty()) {
      auto j = static_cast<std::size_t>(x / forward_);
      return forward_list_[std::min(j, forward_list_.size() - 1)];
    }
    auto j = static_cast<std::size_t>((x - fwd_mass) / backward_);
    return backward_list_[std::min(j, backward_list_.size() - 1)];
  }

  /// Plain left-to-right sum of all slot rates.
  double stored_sum() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i <= n_; ++i) s += slot_rate(i);
    return s;
  }

 private:
  static constexpr std::uint8_t kNone = 0, kForward = 1, kBackward = 2;

  void reclassify(const LatticeConfig& eta, std::size_t i) noexcept {
    const auto a = eta[i - 1], b = eta[i];
    const std::uint8_t k = a == b ? kNone : (a ? kForward : kBackward);
    if (k == kind_[i]) return;
    if (kind_[i] != kNone) erase(kind_[i] == kForward ? forward_list_ : backward_list_, i);
    kind_[i] = k;
    if (k != kNone) insert(k == kForward ? forward_list_ : backward_list_, i, k);
  }

  void insert(std::vector<std::uint32_t>& list, std::size_t i, std::uint8_t k) noexcept {
    kind_[i] = k;
    pos_[i] = static_cast<std::uint32_t>(list.size());
    list.push_back(static_cast<std::uint32_t>(i));
  }

  void erase(std::vector<std::uint32_t>& list, std::size_t i) noexcept {
    const std::uint32_t p = pos_[i];
    const std::uint32_t last = list.back();
    list[p] = last;
    pos_[last] = p;
    list.pop_back();
  }

  void update_total() noexcept {
    total_ = left_ + right_ + forward_ * static_cast<double>(forward_list_.size()) +
             backward_ * static_cast<double>(backward_list_.size());
  }

  std::size_t n_;
  double forward_ = 0.0, backward_ = 0.0, boundary_scale_ = 0.0;
  double create_left_ = 0.0, annihilate_left_ = 0.0, create_right_ = 0.0, annihilate_right_ = 0.0;
  double left_ = 0.0, right_ = 0.0, total_ = 0.0;
  std::vector<std::uint8_t> kind_;
  std::vector<std::uint32_t> pos_;
  std::vector<std::uint32_t> forward_list_, backward_list_;
};

/// Counting processes h_+(i,t), h_-(i,t) for i = 0..N.
/// h_+(i): jumps i -> i+1 (i=0: creations at 1, i=N: annihilations at N).
/// h_-(i): jumps i+1 -> i (i=0: annihilations at 1, i=N: creations at N).
struct CountingState {
  std::vector<std::int64_t> h_plus;
  std::vector<std::int64_t> h_minus;

  explicit CountingState(std::size_t n = 0) : h_plus(n + 1, 0), h_minus(n + 1, 0) {}

  std::int64_t h(std::size_t i) const { return h_plus[i] - h_minus[i]; }
};

struct SimClock {
  double t = 0.0;
  double time_dilation = 1.0;
  std::uint64_t rng_seed = 0;
  Rng rng{0};
};

enum class EventKind : std::uint8_t {
  jump_right,        ///< particle i -> i+1
  jump_left,         ///< particle i+1 -> i
  create_left,       ///< creation at site 1
  annihilate_left,   ///< annihilation at site 1
  create_right,      ///< creation at site N
  annihilate_right,  ///< annihilation at site N
  breakpoint,        ///< clock advanced to a schedule breakpoint, rates refreshed
  stopped,           ///< clock advanced to the requested stop time
};

struct Event {
  EventKind kind = EventKind::stopped;
  std::size_t index = 0;  ///< bond i for jumps, site (1 or N) for flips
  double time = 0.0;
};

/// Sampling grid with n uniformly spaced times on [0, horizon], endpoints included.
inline std::vector<double> uniform_sample_times(double horizon, std::size_t n = 200) {
  if (horizon <= 0.0 || n < 2) return {0.0};
  std::vector<double> ts(n);
  for (std::size_t k = 0; k < n; ++k)
    ts[k] = horizon * static_cast<double>(k) / static_cast<double>(n - 1);
  ts.back() = horizon;
  return ts;
}

/// Independent Bernoulli occupations with P(eta_i = 1) = u0 on the cell of site i,
/// i.e. at x = (i - 1/2)/N.
inline LatticeConfig sample_initial(const GridField& u0, std::size_t n, Rng& rng) {
  if (u0.min() < 0.0 || u0.max() > 1.0) throw DomainError("sample_initial: profile outside [0,1]");
  LatticeConfig eta(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    eta.set(k, rng.bernoulli(u0.value_at(x)) ? 1 : 0);
  }
  return eta;
}

/// State machine of one replica: configuration, rate index, clock and counters.
class Simulator {
 public:
  Simulator(LatticeConfig initial, RateSchedule schedule, ScalingPlan plan, double time_dilation,
            std::uint64_t seed, double t0 = 0.0)
      : eta_(std::move(initial)),
        schedule_(std::move(schedule)),
        plan_(plan),
        table_(eta_, plan_, schedule_.rates_at(t0), time_dilation),
        counting_(eta_.size()),
        initial_(eta_) {
    clock_.t = t0;
    clock_.time_dilation = time_dilation;
    clock_.rng_seed = seed;
    clock_.rng = Rng(seed);
    next_breakpoint_ = schedule_.next_breakpoint(t0);
  }

  /// Time dilation N for hydrodynamic runs.
  static double hyperbolic_dilation(const ScalingPlan& plan) { return static_cast<double>(plan.N); }
  /// Time dilation N^(1+a) for quasi-static runs.
  static double quasi_static_dilation(const ScalingPlan& plan, double a) {
    return std::pow(static_cast<double>(plan.N), 1.0 + a);
  }

  /// Advances by one event, or to the next breakpoint / stop time if the
  /// exponential clock rings beyond it. Restarting the clock there is exact
  /// because the waiting time is memoryless.
  Event step(double stop = std::numeric_limits<double>::infinity()) {
    const double total = table_.total();
    const double limit = std::min(next_breakpoint_, stop);
    const double wait = total > 0.0 ? clock_.rng.exponential(total)
                                    : std::numeric_limits<double>::infinity();
    if (clock_.t + wait >= limit) {
      if (!std::isfinite(limit))
        throw AbsorbingStateError("Simulator: zero total rate with no pending breakpoint");
      clock_.t = limit;
      if (limit == next_breakpoint_ && limit < schedule_.t_end()) {
        table_.set_boundary(schedule_.rates_at(limit));
        table_.rebuild(eta_);
        next_breakpoint_ = schedule_.next_breakpoint(limit);
        return {EventKind::breakpoint, 0, clock_.t};
      }
      return {EventKind::stopped, 0, clock_.t};
    }
    clock_.t += wait;
    ++events_;
    return apply(table_.sample(clock_.rng.uniform()));
  }

  const LatticeConfig& config() const noexcept { return eta_; }
  const LatticeConfig& initial_config() const noexcept { return initial_; }
  const CountingState& counting() const noexcept { return counting_; }
  const SimClock& clock() const noexcept { return clock_; }
  const EventRateTable& table() const noexcept { return table_; }
  const ScalingPlan& plan() const noexcept { return plan_; }
  const RateSchedule& schedule() const noexcept { return schedule_; }
  std::uint64_t events() const noexcept { return events_; }

 private:
  Event apply(std::size_t slot) {
    const std::size_t n = eta_.size();
    Event ev;
    ev.time = clock_.t;
    if (slot == 0) {
      if (eta_[0]) {
        ev.kind = EventKind::annihilate_left;
        ++counting_.h_minus[0];
      } else {
        ev.kind = EventKind::create_left;
        ++counting_.h_plus[0];
      }
      ev.index = 1;
      eta_.flip(0);
      table_.refresh_site(eta_, 0);
    } else if (slot == n) {
      if (eta_[n - 1]) {
        ev.kind = EventKind::annihilate_right;
        ++counting_.h_plus[n];
      } else {
        ev.kind = EventKind::create_right;
        ++counting_.h_minus[n];
      }
      ev.index = n;
      eta_.flip(n - 1);
      table_.refresh_site(eta_, n - 1);
    } else {
      if (eta_[slot - 1]) {
        ev.kind = EventKind::jump_right;
        ++counting_.h_plus[slot];
      } else {
        ev.kind = EventKind::jump_left;
        ++counting_.h_minus[slot];
      }
      ev.index = slot;
      eta_.swap_bond(slot - 1);
      table_.refresh_bond(eta_, slot);
    }
    return ev;
  }

  LatticeConfig eta_;
  RateSchedule schedule_;
  ScalingPlan plan_;
  EventRateTable table_;
  CountingState counting_;
  SimClock clock_;
  LatticeConfig initial_;
  double next_breakpoint_ = std::numeric_limits<double>::infinity();
  std::uint64_t events_ = 0;
};

enum class ObservableKind : std::uint8_t { density, h, particles };

inline const char* to_string(ObservableKind k) {
  switch (k) {
    case ObservableKind::density: return "density";
    case ObservableKind::h: return "h";
    case ObservableKind::particles: return "particles";
  }
  return "?";
}

/// Time-stamped observables from one replica.
struct TrajectoryRecord {
  struct Row {
    double t;
    std::int64_t index;
    double value;
    ObservableKind kind;
  };

  std::vector<double> sample_times;
  std::vector<Row> rows;
  std::uint64_t events = 0;
  bool complete = true;

  void write_csv(std::ostream& os) const {
    os << "t,site,value,kind\n";
    for (const auto& r : rows)
      os << csv::num(r.t) << ',' << r.index << ',' << csv::num(r.value) << ',' << to_string(r.kind)
         << '\n';
  }
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, TrajectoryRecord partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const TrajectoryRecord& partial() const noexcept { return partial_; }

 private:
  TrajectoryRecord partial_;
};

/// What an observer sees at a sampling time.
struct Snapshot {
  std::size_t sample_index;
  double t;
  const LatticeConfig& config;
  const CountingState& counting;
  const SimClock& clock;
  const Simulator& sim;
};

using Observer = std::function<void(const Snapshot&)>;

struct RunOptions {
  double horizon = 1.0;
  std::vector<double> sample_times;  ///< empty: 200 uniform samples on [0, horizon]
  std::uint64_t event_budget = 2'000'000'000ULL;
  /// Density rows per sample: 0 records every site, otherwise this many
  /// equal blocks (must divide N).
  std::size_t record_blocks = 0;
  bool record_counting = true;
};

namespace detail {

inline void record_snapshot(TrajectoryRecord& rec, const RunOptions& opt, double t,
                            const Simulator& sim) {
  const auto& eta = sim.config();
  const std::size_t n = eta.size();
  const std::size_t blocks = opt.record_blocks == 0 ? n : opt.record_blocks;
  const std::size_t width = n / blocks;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::int64_t s = 0;
    for (std::size_t k = b * width; k < (b + 1) * width; ++k) s += eta[k];
    const std::int64_t label = opt.record_blocks == 0 ? static_cast<std::int64_t>(b + 1)
                                                      : static_cast<std::int64_t>(b);
    rec.rows.push_back({t, label, static_cast<double>(s) / static_cast<double>(width),
                        ObservableKind::density});
  }
  if (opt.record_counting) {
    const auto& c = sim.counting();
    rec.rows.push_back({t, 0, static_cast<double>(c.h(0)), ObservableKind::h});
    rec.rows.push_back({t, static_cast<std::int64_t>(n), static_cast<double>(c.h(n)),
                        ObservableKind::h});
    rec.rows.push_back({t, 0, static_cast<double>(eta.particle_count()), ObservableKind::particles});
  }
}

}  // namespace detail

/// Runs the chain until the last sampling time, stopping exactly at every
/// sampling time to record observables and call the observers.
inline TrajectoryRecord run(Simulator& sim, const RunOptions& opt,
                            std::span<const Observer> observers = {}) {
  if (!(opt.horizon >= 0.0)) throw DomainError("run: negative horizon");
  if (!sim.schedule().covers(opt.horizon)) {
    throw OutOfRangeError("run: schedule does not cover the horizon " + csv::num(opt.horizon));
  }
  const std::size_t n = sim.config().size();
  if (opt.record_blocks != 0 && n % opt.record_blocks != 0)
    throw DomainError("run: record_blocks must divide N");
  TrajectoryRecord rec;
  rec.sample_times = opt.sample_times.empty() ? uniform_sample_times(opt.horizon) : opt.sample_times;
  for (std::size_t k = 0; k < rec.sample_times.size(); ++k) {
    const double s = rec.sample_times[k];
    if (s < sim.clock().t || s > opt.horizon || (k > 0 && s < rec.sample_times[k - 1]))
      throw DomainError("run: sample times must be sorted within [t, horizon]");
  }
  const std::uint64_t start_events = sim.events();
  for (std::size_t k = 0; k < rec.sample_times.size(); ++k) {
    const double s = rec.sample_times[k];
    while (sim.clock().t < s) {
      sim.step(s);
      if (sim.events() - start_events > opt.event_budget) {
        rec.events = sim.events() - start_events;
        rec.complete = false;
        throw BudgetExceeded("run: event budget exhausted at t = " + csv::num(sim.clock().t),
                             std::move(rec));
      }
    }
    detail::record_snapshot(rec, opt, s, sim);
    const Snapshot snap{k, s, sim.config(), sim.counting(), sim.clock(), sim};
    for (const auto& obs : observers) obs(snap);
  }
  rec.events = sim.events() - start_events;
  return rec;
}

}  // namespace asep
