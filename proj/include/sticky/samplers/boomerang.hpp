#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sticky/clocks.hpp"
#include "sticky/models/target.hpp"
#include "sticky/random.hpp"
#include "sticky/samplers/bps.hpp"
#include "sticky/samplers/config.hpp"
#include "sticky/samplers/skeleton.hpp"
#include "sticky/state.hpp"

namespace sticky {

struct BoomerangOptions {
  std::vector<double> sigma;  // reference standard deviations, default all ones
  bool factorised = false;
};

// Gradient of U = Psi - sum x_i^2 / (2 sigma_i^2).
inline void boomerang_gradient(const Target& target, std::span<const double> x, std::span<const double> sigma,
                               std::span<double> out) {
  target.gradient(x, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] -= x[i] / (sigma[i] * sigma[i]);
}

// v - 2 <g, v>_a / |Sigma^{1/2} g|_a^2 * Sigma g on the active coordinates.
inline std::vector<double> boomerang_reflect(std::span<const double> g, std::span<const double> v,
                                             std::span<const double> sigma, std::span<const std::uint8_t> frozen) {
  double gv = 0.0, gsg = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (frozen[i]) continue;
    gv += g[i] * v[i];
    gsg += sigma[i] * sigma[i] * g[i] * g[i];
  }
  std::vector<double> out(v.begin(), v.end());
  if (gsg == 0.0) return out;
  const double f = 2.0 * gv / gsg;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!frozen[i]) out[i] -= f * sigma[i] * sigma[i] * g[i];
  return out;
}

class BoomerangEngine {
 public:
  BoomerangEngine(const Target& target, const SamplerConfig& cfg, BoomerangOptions opt = {})
      : target_(target), cfg_(cfg), opt_(std::move(opt)), rng_(derive_seed(cfg.seed, 0)) {
    cfg_.validate();
    if (!(cfg_.refresh_rate > 0.0)) throw std::invalid_argument("boomerang: refresh rate must be positive");
    if (opt_.sigma.empty()) opt_.sigma.assign(target_.dim(), 1.0);
    if (opt_.sigma.size() != target_.dim()) throw std::invalid_argument("boomerang: sigma has wrong length");
    for (double s : opt_.sigma)
      if (!(s > 0.0)) throw std::invalid_argument("boomerang: sigma must be positive");
    std::vector<double> prec(target_.dim());
    for (std::size_t i = 0; i < prec.size(); ++i) prec[i] = 1.0 / (opt_.sigma[i] * opt_.sigma[i]);
    auto gb = target_.growth_bound(prec);
    if (!gb) throw std::logic_error("boomerang: target provides no gradient growth bound");
    growth_ = *gb;
  }

  SamplerRun run(const StickyState& init, const EventObserver& observer = {}) {
    init.validate();
    const std::size_t d = target_.dim();
    if (init.dim() != d) throw std::invalid_argument("boomerang: initial state has wrong dimension");
    s_ = init;
    const HamiltonianDynamics dyn{opt_.sigma};
    const double end = init.t + cfg_.T;
    Skeleton sk;
    sk.initial = init;
    sk.dynamics = dyn;
    sk.recorded = cfg_.record;
    RunStats stats;
    std::vector<double> thaw(d, kInf), grad(d), radius(d);
    auto draw_thaw = [&](std::size_t i) {
      const double r = target_.kappa(i) * std::abs(s_.v[i]);
      thaw[i] = r > 0.0 ? s_.t + exp_time(r, rng_) : kInf;
    };
    for (std::size_t i = 0; i < d; ++i) {
      if (!s_.frozen[i]) continue;
      if (!std::isfinite(target_.kappa(i)))
        throw std::invalid_argument("boomerang: coordinate cannot stick but starts frozen");
      draw_thaw(i);
    }
    EventRecord last;
    while (true) {
      // Each active pair (x_i, v_i) keeps its radius along the flow.
      double r2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        radius[i] = s_.frozen[i] ? 0.0 : std::hypot(s_.x[i], s_.v[i]);
        r2 += radius[i] * radius[i];
      }
      const double R = std::sqrt(r2);
      ++stats.clock_recomputations;
      double t_refl = kInf, bound = 0.0;
      std::size_t i_refl = kNoCoord;
      if (!opt_.factorised) {
        bound = growth_.A * r2 / 2.0 + growth_.B * R;
        if (bound > 0.0) t_refl = s_.t + exp_time(bound, rng_);
      } else {
        const double gmax = growth_.A * R + growth_.B;
        for (std::size_t i = 0; i < d; ++i) {
          const double b = radius[i] * gmax;
          if (!(b > 0.0)) continue;
          const double t = s_.t + exp_time(b, rng_);
          if (t < t_refl) t_refl = t, i_refl = i, bound = b;
        }
      }
      const double t_ref = s_.t + exp_time(cfg_.refresh_rate, rng_);
      double t_hit = kInf, t_thaw = kInf;
      std::size_t i_hit = kNoCoord, i_thaw = kNoCoord;
      for (std::size_t i = 0; i < d; ++i) {
        if (s_.frozen[i]) {
          if (thaw[i] < t_thaw) t_thaw = thaw[i], i_thaw = i;
        } else {
          const double h = s_.t + hamiltonian_hit_time(s_.x[i], s_.v[i]);
          if (h < t_hit) t_hit = h, i_hit = i;
        }
      }
      double tn = t_hit;
      int which = 0;
      if (t_thaw < tn) tn = t_thaw, which = 1;
      if (t_refl < tn) tn = t_refl, which = 2;
      if (t_ref < tn) tn = t_ref, which = 3;
      if (tn > end) break;
      flow_in_place(s_, tn - s_.t, dyn);
      s_.t = tn;
      if (which == 0) {
        const std::size_t i = i_hit;
        if (!std::isfinite(target_.kappa(i))) {
          std::ostringstream os;
          os << "boomerang: coordinate " << i << " with infinite stickiness reached zero at t=" << tn;
          throw std::domain_error(os.str());
        }
        s_.x[i] = 0.0;
        s_.v[i] = std::copysign(radius[i], s_.v[i]);
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
        boomerang_gradient(target_, s_.x, opt_.sigma, grad);
        bool accept = false;
        if (!opt_.factorised) {
          double gv = 0.0;
          for (std::size_t i = 0; i < d; ++i)
            if (!s_.frozen[i]) gv += grad[i] * s_.v[i];
          const double rate = std::max(gv, 0.0);
          check_domination(rate, bound, "boomerang reflection");
          accept = uniform_open(rng_) * bound < rate;
          if (accept) s_.v = boomerang_reflect(grad, s_.v, opt_.sigma, s_.frozen);
          sk.push_full(tn, accept ? EventKind::Reflect : EventKind::Shadow, s_.x, s_.v);
          last = {tn, accept ? EventKind::Reflect : EventKind::Shadow, kNoCoord, 0.0, 0.0, kNoVector};
        } else {
          const std::size_t i = i_refl;
          const double rate = std::max(s_.v[i] * grad[i], 0.0);
          check_domination(rate, bound, "factorised boomerang reflection");
          accept = uniform_open(rng_) * bound < rate;
          if (accept) s_.v[i] = -s_.v[i];
          last = {tn, accept ? EventKind::Reflect : EventKind::Shadow, i, s_.x[i], s_.v[i], kNoVector};
          sk.push(last);
        }
      } else {
        refresh_velocity(s_, opt_.sigma, rng_);
        for (std::size_t i = 0; i < d; ++i)
          if (s_.frozen[i]) draw_thaw(i);
        sk.push_full(tn, EventKind::Refresh, s_.x, s_.v);
        last = {tn, EventKind::Refresh, kNoCoord, 0.0, 0.0, kNoVector};
      }
      if (observer && !observer(s_, last)) {
        stats.stopped_early = true;
        break;
      }
    }
    const double stop = stats.stopped_early ? s_.t : end;
    flow_in_place(s_, stop - s_.t, dyn);
    s_.t = stop;
    sk.T = stop;
    return SamplerRun{std::move(sk), s_, stats};
  }

 private:
  const Target& target_;
  SamplerConfig cfg_;
  BoomerangOptions opt_;
  Rng rng_;
  GrowthBound growth_;
  StickyState s_;
};

inline SamplerRun run_sticky_boomerang(const Target& target, const StickyState& init, const SamplerConfig& cfg,
                                       BoomerangOptions opt = {}, const EventObserver& observer = {}) {
  BoomerangEngine eng(target, cfg, std::move(opt));
  return eng.run(init, observer);
}

}  // namespace sticky
