#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sticky/clocks.hpp"
#include "sticky/models/target.hpp"
#include "sticky/random.hpp"
#include "sticky/samplers/config.hpp"
#include "sticky/samplers/skeleton.hpp"
#include "sticky/samplers/thaw_selector.hpp"
#include "sticky/state.hpp"

namespace sticky {

namespace detail {

// Event-kind priority for ties at equal times.
enum Priority : int { kFreezePrio = 0, kThawPrio = 1, kReflectPrio = 2 };

struct QueueEntry {
  double time;
  std::size_t coord;
  int prio;
  std::uint64_t version;
};

struct QueueLater {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.coord != b.coord) return a.coord > b.coord;
    return a.prio > b.prio;
  }
};

struct ReflectionClock {
  RateBound bound;
  double t_ref = 0.0;
  double residual = 0.0;  // remaining Exp(1) mass of an exact clock
  double time = kInf;     // absolute proposal time
  bool renewal = false;   // proposal is a horizon exhaustion
};

}  // namespace detail

// Sticky Zig-Zag event loop shared by all variants.
//   Global:     scan all coordinates per event, recompute every clock, eager positions.
//   Local:      heap of per-coordinate events, recompute only affected clocks, eager positions.
//   FullyLocal: as Local, positions updated lazily per coordinate.
//   Sparse:     as FullyLocal, frozen coordinates share one aggregate thaw clock.
// Exact clocks carry their residual Exp(1) mass across recomputations, so
// the variants agree event by event on exact-rate targets.
class ZigZagEngine {
 public:
  struct Options {
    bool subsampled = false;
    bool reversible_jump = false;
    double stick_probability = 1.0;
  };

  ZigZagEngine(const Target& target, const SamplerConfig& cfg, Options opt)
      : target_(target), cfg_(cfg), opt_(opt), streams_(cfg.seed, target.dim()) {
    cfg_.validate();
    if (opt_.subsampled && target_.subsampling() == nullptr)
      throw std::invalid_argument("zigzag: target has no subsampling scheme");
    if (opt_.reversible_jump && !(opt_.stick_probability > 0.0 && opt_.stick_probability <= 1.0))
      throw std::invalid_argument("zigzag: stick probability must lie in (0,1]");
  }

  SamplerRun run(const StickyState& init, const EventObserver& observer = {}) {
    setup(init);
    const bool heap = cfg_.variant != ZigZagVariant::Global;
    double last_pop = init.t;
    while (true) {
      Pick next = heap ? pop_heap_event() : scan_event();
      if (next.time > end_time_) break;
      ++stats_.queue_pops;
      if (next.time < last_pop) ++stats_.order_violations;
      last_pop = next.time;
      if (lazy()) {
        now_ = next.time;
      } else {
        advance_all(next.time);
      }
      s_.t = now_;
      bool recorded = handle(next);
      if (recorded && observer && !observer(s_, last_event_)) {
        stats_.stopped_early = true;
        end_time_ = now_;
        break;
      }
    }
    advance_all(end_time_);
    s_.t = end_time_;
    skeleton_.T = end_time_;
    SamplerRun out{std::move(skeleton_), s_, stats_};
    return out;
  }

  const RunStats& stats() const { return stats_; }

 private:
  struct Pick {
    double time = kInf;
    std::size_t coord = kNoCoord;
    int prio = detail::kReflectPrio;
  };

  bool lazy() const {
    return cfg_.variant == ZigZagVariant::FullyLocal || cfg_.variant == ZigZagVariant::Sparse;
  }
  bool sparse() const { return cfg_.variant == ZigZagVariant::Sparse; }

  void setup(const StickyState& init) {
    init.validate();
    if (init.dim() != target_.dim()) throw std::invalid_argument("zigzag: initial state has wrong dimension");
    const std::size_t d = init.dim();
    for (std::size_t i = 0; i < d; ++i)
      if (init.is_frozen(i) && !std::isfinite(target_.kappa(i)))
        throw std::invalid_argument("zigzag: coordinate " + std::to_string(i) + " cannot stick but starts frozen");
    s_ = init;
    now_ = init.t;
    end_time_ = init.t + cfg_.T;
    tx_.assign(d, now_);
    clocks_.assign(d, {});
    hz_.assign(d, kInf);
    thaw_.assign(d, kInf);
    version_.assign(d, 0);
    skeleton_ = Skeleton{};
    skeleton_.initial = init;
    skeleton_.dynamics = LinearDynamics{};
    skeleton_.recorded = cfg_.record;
    stats_ = RunStats{};
    heap_ = {};
    if (sparse()) selector_ = ThawSelector(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (s_.frozen[i]) {
        enable_thaw(i);
      } else {
        fresh_clock(i);
      }
      schedule(i);
    }
    if (sparse()) reschedule_aggregate();
  }

  // -- positions
  void bring(std::size_t i) {
    if (!s_.frozen[i]) s_.x[i] += s_.v[i] * (now_ - tx_[i]);
    tx_[i] = now_;
  }
  void bring_reads(std::size_t i) {
    if (!lazy()) return;
    for (auto j : target_.read_set(i)) bring(j);
  }
  void advance_all(double t) {
    now_ = t;
    for (std::size_t i = 0; i < s_.dim(); ++i) bring(i);
  }

  // -- clocks
  RateBound current_bound(std::size_t i) {
    bring_reads(i);
    return opt_.subsampled ? target_.subsampling()->sub_bound(s_, i) : target_.zigzag_bound(s_, i);
  }

  void draw_proposal(std::size_t i, double u) {
    auto& c = clocks_[i];
    ClockDraw draw = draw_from_residual(c.bound.affine, u);
    double tau = draw.time;
    bool renewal = draw.exhausted;
    if (c.bound.barrier) {
      const auto& b = *c.bound.barrier;
      const double tb = invert_log_barrier_rate(b.x, b.v, b.weight, std_exponential(streams_.coord(i)));
      if (tb < tau) {
        tau = tb;
        renewal = false;
      }
    }
    c.time = now_ + tau;
    c.renewal = renewal;
  }

  void fresh_clock(std::size_t i) {
    ++stats_.clock_recomputations;
    auto& c = clocks_[i];
    c.bound = current_bound(i);
    c.t_ref = now_;
    c.residual = std_exponential(streams_.coord(i));
    draw_proposal(i, c.residual);
  }

  // Re-bound coordinate i after a change elsewhere. Exact clocks keep their
  // residual mass; thinned clocks restart with a fresh draw.
  void update_clock(std::size_t i) {
    auto& c = clocks_[i];
    if (!c.bound.exact) {
      fresh_clock(i);
      return;
    }
    ++stats_.clock_recomputations;
    const double used = integrated_affine_rate(c.bound.affine.a, c.bound.affine.b, now_ - c.t_ref);
    c.residual = std::max(c.residual - used, 0.0);
    c.bound = current_bound(i);
    c.t_ref = now_;
    if (c.residual <= 0.0) c.residual = std::numeric_limits<double>::min();
    draw_proposal(i, c.residual);
  }

  double thaw_rate(std::size_t i) const {
    double r = target_.kappa(i) * std::abs(s_.v[i]);
    if (opt_.reversible_jump) r *= opt_.stick_probability;
    return r;
  }

  void enable_thaw(std::size_t i) {
    const bool ok = target_.may_thaw(i, s_);
    if (sparse()) {
      selector_.set(i, ok ? thaw_rate(i) : 0.0);
      return;
    }
    const double r = thaw_rate(i);
    thaw_[i] = (ok && r > 0.0) ? now_ + exp_time(r, streams_.coord(i)) : kInf;
  }

  void reschedule_aggregate() {
    const double total = selector_.total();
    agg_time_ = total > 0.0 && selector_.count() > 0 ? now_ + exp_time(total, streams_.main()) : kInf;
    if (cfg_.variant != ZigZagVariant::Global) heap_.push({agg_time_, s_.dim(), detail::kThawPrio, ++agg_version_});
  }

  // Next event of coordinate i from the stored clocks.
  Pick candidate(std::size_t i) const {
    if (s_.frozen[i]) {
      if (sparse()) return {};
      return {thaw_[i], i, detail::kThawPrio};
    }
    const auto& c = clocks_[i];
    if (hz_[i] <= c.time) return {hz_[i], i, detail::kFreezePrio};
    return {c.time, i, detail::kReflectPrio};
  }

  void schedule(std::size_t i) {
    if (!s_.frozen[i]) {
      hz_[i] = tx_[i] + linear_hit_time(s_.x[i], s_.v[i]);
      if (hz_[i] < now_) hz_[i] = now_;
    }
    ++version_[i];
    if (cfg_.variant == ZigZagVariant::Global) return;
    Pick p = candidate(i);
    if (p.time == kInf) return;
    if (p.time < now_) p.time = now_;
    heap_.push({p.time, i, p.prio, version_[i]});
  }

  static bool earlier(const Pick& a, const Pick& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.coord != b.coord) return a.coord < b.coord;
    return a.prio < b.prio;
  }

  Pick scan_event() const {
    Pick best;
    for (std::size_t i = 0; i < s_.dim(); ++i) {
      Pick p = candidate(i);
      if (earlier(p, best)) best = p;
    }
    return best;
  }

  Pick pop_heap_event() {
    while (!heap_.empty()) {
      const auto e = heap_.top();
      heap_.pop();
      if (e.coord == s_.dim()) {
        if (e.version != agg_version_) {
          ++stats_.stale_pops;
          continue;
        }
        return {e.time, e.coord, e.prio};
      }
      if (e.version != version_[e.coord]) {
        ++stats_.stale_pops;
        continue;
      }
      return {e.time, e.coord, e.prio};
    }
    return {};
  }

  void record(EventKind kind, std::size_t i) {
    last_event_ = EventRecord{now_, kind, i, s_.x[i], s_.v[i], kNoVector};
    skeleton_.push(last_event_);
  }

  // Recompute clocks of active coordinates whose bounds depend on i.
  void refresh_neighbors(std::size_t i, bool include_self) {
    if (cfg_.variant == ZigZagVariant::Global) {
      for (std::size_t j = 0; j < s_.dim(); ++j)
        if (!s_.frozen[j] && (include_self || j != i)) update_clock(j);
      return;
    }
    for (auto j : target_.neighborhood(i)) {
      if (j == i && !include_self) continue;
      if (s_.frozen[j]) continue;
      update_clock(j);
      schedule(j);
    }
  }

  void update_eligibility(std::size_t i) {
    if (!target_.restricted_models()) return;
    for (auto j : target_.eligibility_dependents(i)) {
      if (!s_.frozen[j]) continue;
      enable_thaw(j);
      schedule(j);
    }
  }

  bool handle(const Pick& p) {
    if (p.coord == s_.dim()) return handle_aggregate_thaw();
    const std::size_t i = p.coord;
    switch (p.prio) {
      case detail::kFreezePrio: return handle_zero(i);
      case detail::kThawPrio: return handle_thaw(i);
      default: return handle_proposal(i);
    }
  }

  bool handle_zero(std::size_t i) {
    bring(i);
    s_.x[i] = 0.0;
    if (!std::isfinite(target_.kappa(i))) {
      std::ostringstream os;
      os << "zigzag: coordinate " << i << " with infinite stickiness reached zero at t=" << now_;
      throw std::domain_error(os.str());
    }
    bool stick = target_.may_freeze(i, s_);
    if (stick && opt_.reversible_jump) stick = bernoulli(streams_.coord(i), opt_.stick_probability);
    if (!stick) {
      ++stats_.crossings;
      schedule(i);
      return false;
    }
    s_.frozen[i] = 1;
    record(EventKind::Freeze, i);
    enable_thaw(i);
    schedule(i);
    if (!target_.bounds_survive_sticky_events()) refresh_neighbors(i, false);
    update_eligibility(i);
    if (sparse()) reschedule_aggregate();
    return true;
  }

  bool handle_thaw(std::size_t i) {
    thaw(i);
    return true;
  }

  void thaw(std::size_t i) {
    s_.frozen[i] = 0;
    tx_[i] = now_;
    if (opt_.reversible_jump && bernoulli(streams_.coord(i), 0.5)) s_.v[i] = -s_.v[i];
    thaw_[i] = kInf;
    if (sparse()) selector_.set(i, 0.0);
    record(EventKind::Thaw, i);
    fresh_clock(i);
    schedule(i);
    if (!target_.bounds_survive_sticky_events()) refresh_neighbors(i, false);
    update_eligibility(i);
  }

  bool handle_aggregate_thaw() {
    const std::size_t i = selector_.sample(uniform_open(streams_.main()));
    thaw(i);
    reschedule_aggregate();
    return true;
  }

  bool handle_proposal(std::size_t i) {
    auto& c = clocks_[i];
    bring(i);
    if (c.renewal) {
      ++stats_.renewals;
      fresh_clock(i);
      schedule(i);
      return false;
    }
    ++stats_.proposals;
    bool accept = true;
    if (!c.bound.exact) {
      bring_reads(i);
      const double vi = s_.v[i];
      double rate;
      if (opt_.subsampled) {
        const auto* sch = target_.subsampling();
        const std::size_t k = uniform_index(streams_.coord(i), sch->term_count(i));
        rate = std::max(vi * sch->estimate(s_.x, i, k), 0.0);
      } else {
        rate = std::max(vi * target_.partial(s_.x, i), 0.0);
      }
      const double bound = c.bound.value(now_ - c.t_ref);
      check_domination(rate, bound, "zigzag reflection");
      accept = bound > 0.0 && uniform_open(streams_.coord(i)) * bound < rate;
    }
    if (!accept) {
      record(EventKind::Shadow, i);
      fresh_clock(i);
      schedule(i);
      return true;
    }
    s_.v[i] = -s_.v[i];
    record(EventKind::Reflect, i);
    fresh_clock(i);
    schedule(i);
    refresh_neighbors(i, false);
    return true;
  }

  const Target& target_;
  SamplerConfig cfg_;
  Options opt_;
  RandomStreams streams_;

  StickyState s_;
  double now_ = 0.0;
  double end_time_ = 0.0;
  std::vector<double> tx_;
  std::vector<detail::ReflectionClock> clocks_;
  std::vector<double> hz_;
  std::vector<double> thaw_;
  std::vector<std::uint64_t> version_;
  std::priority_queue<detail::QueueEntry, std::vector<detail::QueueEntry>, detail::QueueLater> heap_;
  ThawSelector selector_;
  double agg_time_ = kInf;
  std::uint64_t agg_version_ = 0;

  Skeleton skeleton_;
  RunStats stats_;
  EventRecord last_event_;
};

inline SamplerRun run_sticky_zigzag(const Target& target, const StickyState& init, const SamplerConfig& cfg,
                                    const EventObserver& observer = {}) {
  ZigZagEngine eng(target, cfg, {});
  return eng.run(init, observer);
}

inline SamplerRun run_sticky_zigzag_subsampled(const Target& target, const StickyState& init, const SamplerConfig& cfg,
                                               const EventObserver& observer = {}) {
  ZigZagEngine eng(target, cfg, {true, false, 1.0});
  return eng.run(init, observer);
}

inline SamplerRun run_rj_zigzag(const Target& target, const StickyState& init, const SamplerConfig& cfg,
                                const EventObserver& observer = {}) {
  ZigZagEngine eng(target, cfg, {cfg.subsampling, true, cfg.rj_p});
  return eng.run(init, observer);
}

// Total time stuck over `hits` zero-hits when each hit sticks with
// probability p for an Exp(p kappa) duration, as in the reversible-jump
// sampler. The mean hits / kappa does not depend on p.
struct StuckTimeMoments {
  double mean = 0.0;
  double variance = 0.0;
};

template <class G>
double total_stuck_time(std::size_t hits, double p, double kappa, G& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("total_stuck_time: p must lie in (0,1]");
  if (!(kappa > 0.0)) throw std::invalid_argument("total_stuck_time: kappa must be positive");
  double total = 0.0;
  for (std::size_t k = 0; k < hits; ++k)
    if (bernoulli(rng, p)) total += std_exponential(rng) / (p * kappa);
  return total;
}

inline StuckTimeMoments stuck_time_moments(std::size_t hits, double p, double kappa, std::size_t replicates,
                                           std::uint64_t seed) {
  if (replicates < 2) throw std::invalid_argument("stuck_time_moments: need at least two replicates");
  Rng rng(seed);
  std::vector<double> t(replicates);
  StuckTimeMoments m;
  for (auto& v : t) {
    v = total_stuck_time(hits, p, kappa, rng);
    m.mean += v / static_cast<double>(replicates);
  }
  for (double v : t) m.variance += (v - m.mean) * (v - m.mean) / static_cast<double>(replicates - 1);
  return m;
}

}  // namespace sticky
