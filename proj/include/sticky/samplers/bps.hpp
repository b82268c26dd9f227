#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sticky/clocks.hpp"
#include "sticky/models/target.hpp"
#include "sticky/random.hpp"
#include "sticky/samplers/config.hpp"
#include "sticky/samplers/skeleton.hpp"
#include "sticky/state.hpp"

namespace sticky {

// Contour reflection of the active velocities: <g, Rv>_a = -<g, v>_a, |Rv| = |v|.
inline std::vector<double> bps_reflect(std::span<const double> grad, std::span<const double> v,
                                       std::span<const std::uint8_t> frozen) {
  double gv = 0.0, gg = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (frozen[i]) continue;
    gv += grad[i] * v[i];
    gg += grad[i] * grad[i];
  }
  std::vector<double> out(v.begin(), v.end());
  if (gg == 0.0) return out;
  const double f = 2.0 * gv / gg;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!frozen[i]) out[i] -= f * grad[i];
  return out;
}

// Fresh normals for active coordinates; frozen ones keep their side.
template <class G>
void refresh_velocity(StickyState& s, std::span<const double> scale, G& rng) {
  for (std::size_t i = 0; i < s.dim(); ++i) {
    const double z = std_normal(rng) * (scale.empty() ? 1.0 : scale[i]);
    if (s.frozen[i]) {
      s.v[i] = std::copysign(std::abs(z), s.v[i]);
      if (s.v[i] == 0.0) s.v[i] = std::copysign(std::numeric_limits<double>::min(), s.v[i]);
    } else {
      s.v[i] = z;
    }
  }
}

class BpsEngine {
 public:
  BpsEngine(const Target& target, const SamplerConfig& cfg) : target_(target), cfg_(cfg), rng_(derive_seed(cfg.seed, 0)) {
    cfg_.validate();
    if (!(cfg_.refresh_rate > 0.0)) throw std::invalid_argument("bps: refresh rate must be positive");
  }

  SamplerRun run(const StickyState& init, const EventObserver& observer = {}) {
    init.validate();
    if (init.dim() != target_.dim()) throw std::invalid_argument("bps: initial state has wrong dimension");
    const std::size_t d = init.dim();
    s_ = init;
    const double end = init.t + cfg_.T;
    Skeleton sk;
    sk.initial = init;
    sk.dynamics = LinearDynamics{};
    sk.recorded = cfg_.record;
    RunStats stats;
    std::vector<double> thaw(d, kInf);
    auto draw_thaw = [&](std::size_t i) {
      const double r = target_.kappa(i) * std::abs(s_.v[i]);
      thaw[i] = r > 0.0 ? s_.t + exp_time(r, rng_) : kInf;
    };
    for (std::size_t i = 0; i < d; ++i) {
      if (!s_.frozen[i]) continue;
      if (!std::isfinite(target_.kappa(i))) throw std::invalid_argument("bps: coordinate cannot stick but starts frozen");
      draw_thaw(i);
    }
    std::vector<double> grad(d);
    EventRecord last;
    while (true) {
      auto bound_opt = target_.directional_bound(s_);
      if (!bound_opt) throw std::logic_error("bps: target provides no directional rate bound");
      const RateBound bound = *bound_opt;
      ++stats.clock_recomputations;
      const ClockDraw refl = quadratic_or_thinned_time(bound.affine, rng_);
      const double t_refl = s_.t + refl.time;
      const double t_ref = s_.t + exp_time(cfg_.refresh_rate, rng_);
      double t_hit = kInf, t_thaw = kInf;
      std::size_t i_hit = kNoCoord, i_thaw = kNoCoord;
      for (std::size_t i = 0; i < d; ++i) {
        if (s_.frozen[i]) {
          if (thaw[i] < t_thaw) t_thaw = thaw[i], i_thaw = i;
        } else {
          const double h = s_.t + linear_hit_time(s_.x[i], s_.v[i]);
          if (h < t_hit) t_hit = h, i_hit = i;
        }
      }
      // Ties: freeze, thaw, reflection, refresh.
      double tn = t_hit;
      int which = 0;
      if (t_thaw < tn) tn = t_thaw, which = 1;
      if (t_refl < tn) tn = t_refl, which = refl.exhausted ? 4 : 2;
      if (t_ref < tn) tn = t_ref, which = 3;
      if (tn > end) break;
      flow_in_place(s_, tn - s_.t, LinearDynamics{});
      s_.t = tn;
      if (which == 0) {
        const std::size_t i = i_hit;
        s_.x[i] = 0.0;
        if (!std::isfinite(target_.kappa(i))) {
          std::ostringstream os;
          os << "bps: coordinate " << i << " with infinite stickiness reached zero at t=" << tn;
          throw std::domain_error(os.str());
        }
        s_.frozen[i] = 1;
        draw_thaw(i);
        last = {tn, EventKind::Freeze, i, 0.0, s_.v[i], kNoVector};
        sk.push(last);
      } else if (which == 1) {
        const std::size_t i = i_thaw;
        s_.frozen[i] = 0;
        thaw[i] = kInf;
        last = {tn, EventKind::Thaw, i, 0.0, s_.v[i], kNoVector};
        sk.push(last);
      } else if (which == 2) {
        ++stats.proposals;
        target_.gradient(s_.x, grad);
        double gv = 0.0;
        for (std::size_t i = 0; i < d; ++i)
          if (!s_.frozen[i]) gv += grad[i] * s_.v[i];
        const double rate = std::max(gv, 0.0);
        bool accept = true;
        if (!bound.exact) {
          const double b = bound.value(refl.time);
          check_domination(rate, b, "bps reflection");
          accept = b > 0.0 && uniform_open(rng_) * b < rate;
        }
        if (accept) s_.v = bps_reflect(grad, s_.v, s_.frozen);
        sk.push_full(tn, accept ? EventKind::Reflect : EventKind::Shadow, s_.x, s_.v);
        last = {tn, accept ? EventKind::Reflect : EventKind::Shadow, kNoCoord, 0.0, 0.0, kNoVector};
      } else if (which == 3) {
        refresh_velocity(s_, {}, rng_);
        for (std::size_t i = 0; i < d; ++i)
          if (s_.frozen[i]) draw_thaw(i);
        sk.push_full(tn, EventKind::Refresh, s_.x, s_.v);
        last = {tn, EventKind::Refresh, kNoCoord, 0.0, 0.0, kNoVector};
      } else {
        ++stats.renewals;
        continue;
      }
      if (observer && !observer(s_, last)) {
        stats.stopped_early = true;
        break;
      }
    }
    const double stop = stats.stopped_early ? s_.t : end;
    flow_in_place(s_, stop - s_.t, LinearDynamics{});
    s_.t = stop;
    sk.T = stop;
    return SamplerRun{std::move(sk), s_, stats};
  }

 private:
  const Target& target_;
  SamplerConfig cfg_;
  Rng rng_;
  StickyState s_;
};

inline SamplerRun run_sticky_bps(const Target& target, const StickyState& init, const SamplerConfig& cfg,
                                 const EventObserver& observer = {}) {
  BpsEngine eng(target, cfg);
  return eng.run(init, observer);
}

}  // namespace sticky
