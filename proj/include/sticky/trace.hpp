#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sticky/gibbs.hpp"
#include "sticky/samplers/config.hpp"
#include "sticky/samplers/skeleton.hpp"
#include "sticky/state.hpp"

namespace sticky {

using Interval = std::pair<double, double>;

struct InclusionSummary {
  std::vector<double> p;  // fraction of time (or iterations) each coordinate is nonzero
  double T = 0.0;
};

struct ErrorCurve {
  std::vector<double> budget;
  std::vector<double> value;
};

inline void apply_event(StickyState& s, const Skeleton& sk, const EventRecord& e) {
  if (e.full != kNoVector) {
    s.x = sk.full_x[e.full];
    s.v = sk.full_v[e.full];
    return;
  }
  const std::size_t i = e.coord;
  switch (e.kind) {
    case EventKind::Freeze:
      s.x[i] = 0.0;
      s.v[i] = e.v;
      s.frozen[i] = 1;
      break;
    case EventKind::Thaw:
      s.frozen[i] = 0;
      s.v[i] = e.v;
      break;
    default:
      s.x[i] = e.x;
      s.v[i] = e.v;
  }
}

// Walks the piecewise constant frozen set: f(start, end, state at start).
template <class F>
void for_each_segment(const Skeleton& sk, F&& f) {
  if (!sk.recorded) throw std::invalid_argument("trace: skeleton was run without recording events");
  StickyState s = sk.initial;
  double prev = s.t;
  for (const auto& e : sk.events) {
    if (e.t > prev) f(prev, e.t, s);
    flow_in_place(s, e.t - s.t, sk.dynamics);
    s.t = e.t;
    apply_event(s, sk, e);
    prev = e.t;
  }
  if (sk.T > prev) f(prev, sk.T, s);
}

inline double skeleton_length(const Skeleton& sk) { return sk.T - sk.initial.t; }

inline StickyState interpolate(const Skeleton& sk, double t) {
  if (!(t >= sk.initial.t && t <= sk.T)) throw std::out_of_range("interpolate: time outside the skeleton");
  StickyState s = sk.initial;
  for (const auto& e : sk.events) {
    if (e.t > t) break;
    flow_in_place(s, e.t - s.t, sk.dynamics);
    s.t = e.t;
    apply_event(s, sk, e);
  }
  flow_in_place(s, t - s.t, sk.dynamics);
  s.t = t;
  return s;
}

// Maximal intervals on which every listed coordinate is frozen.
inline std::vector<Interval> all_frozen_intervals(const Skeleton& sk, const std::vector<std::size_t>& coords) {
  if (coords.empty()) throw std::invalid_argument("occupation: empty coordinate set");
  std::vector<Interval> out;
  for_each_segment(sk, [&](double a, double b, const StickyState& s) {
    for (auto i : coords)
      if (!s.frozen[i]) return;
    if (!out.empty() && out.back().second == a)
      out.back().second = b;
    else
      out.emplace_back(a, b);
  });
  return out;
}

inline double occupation_zero(const Skeleton& sk, const std::vector<std::size_t>& coords) {
  const double len = skeleton_length(sk);
  if (!(len > 0.0)) return 0.0;
  double z = 0.0;
  for (const auto& [a, b] : all_frozen_intervals(sk, coords)) z += b - a;
  return z / len;
}

inline std::vector<std::size_t> all_coords(std::size_t d) {
  std::vector<std::size_t> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = i;
  return c;
}

inline InclusionSummary inclusion_probs(const Skeleton& sk) {
  const std::size_t d = sk.initial.dim();
  std::vector<double> zero(d, 0.0);
  for_each_segment(sk, [&](double a, double b, const StickyState& s) {
    for (std::size_t i = 0; i < d; ++i)
      if (s.frozen[i]) zero[i] += b - a;
  });
  const double len = skeleton_length(sk);
  InclusionSummary out{std::vector<double>(d, 1.0), sk.T};
  if (len > 0.0)
    for (std::size_t i = 0; i < d; ++i) out.p[i] = 1.0 - zero[i] / len;
  return out;
}

// Fraction of time the active set equals alpha exactly.
inline double model_posterior(const Skeleton& sk, const Membership& alpha) {
  if (alpha.size() != sk.initial.dim()) throw std::invalid_argument("model_posterior: alpha has wrong length");
  double z = 0.0;
  for_each_segment(sk, [&](double a, double b, const StickyState& s) {
    for (std::size_t i = 0; i < alpha.size(); ++i)
      if ((alpha[i] != 0) == (s.frozen[i] != 0)) return;
    z += b - a;
  });
  const double len = skeleton_length(sk);
  return len > 0.0 ? z / len : 0.0;
}

// Time fraction of every visited model, keyed by active membership.
inline std::map<Membership, double> model_histogram(const Skeleton& sk) {
  std::map<Membership, double> h;
  for_each_segment(sk, [&](double a, double b, const StickyState& s) {
    Membership m(s.frozen.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = s.frozen[i] ? 0 : 1;
    h[m] += b - a;
  });
  const double len = skeleton_length(sk);
  for (auto& [k, v] : h) v /= len;
  return h;
}

inline std::vector<double> sample_path(const Skeleton& sk, std::size_t i, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_path: step must be positive");
  if (i >= sk.initial.dim()) throw std::out_of_range("sample_path: coordinate out of range");
  std::vector<double> out;
  StickyState s = sk.initial;
  std::size_t next = 0;
  const double t0 = sk.initial.t;
  for (std::uint64_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    if (t > sk.T * (1.0 + 1e-14)) break;
    while (next < sk.events.size() && sk.events[next].t <= t) {
      const auto& e = sk.events[next++];
      flow_in_place(s, e.t - s.t, sk.dynamics);
      s.t = e.t;
      apply_event(s, sk, e);
    }
    flow_in_place(s, t - s.t, sk.dynamics);
    s.t = t;
    out.push_back(s.frozen[i] ? 0.0 : s.x[i]);
  }
  return out;
}

// Order statistic at rank floor(q (n - 1) + 1/2), so the median of an odd grid is its middle value.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: no samples");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile: level must lie in (0,1)");
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1) + 0.5));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

inline double path_quantile(const Skeleton& sk, std::size_t i, double dt, double q) {
  return quantile(sample_path(sk, i, dt), q);
}

inline double path_mean(const Skeleton& sk, std::size_t i, double dt) {
  const auto v = sample_path(sk, i, dt);
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

inline ErrorCurve squared_error_curve(const std::vector<std::pair<double, InclusionSummary>>& snapshots,
                                      const InclusionSummary& reference) {
  ErrorCurve c;
  for (const auto& [budget, s] : snapshots) {
    if (s.p.size() != reference.p.size()) throw std::invalid_argument("squared_error_curve: dimension mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < s.p.size(); ++i) e += (s.p[i] - reference.p[i]) * (s.p[i] - reference.p[i]);
    c.budget.push_back(budget);
    c.value.push_back(e);
  }
  return c;
}

struct RecurrenceStats {
  double mean_sojourn = 0.0;  // time spent in the null model per visit
  double mean_return = 0.0;   // time from leaving the null model until the next visit
  std::size_t visits = 0;
};

inline RecurrenceStats recurrence_stats(const Skeleton& sk) {
  const auto iv = all_frozen_intervals(sk, all_coords(sk.initial.dim()));
  if (iv.size() < 2) throw std::runtime_error("recurrence_stats: the null model was visited fewer than twice");
  RecurrenceStats r;
  r.visits = iv.size();
  // The last visit may be cut off at T, so only closed visits count towards the sojourn.
  std::size_t closed = 0;
  for (std::size_t k = 0; k < iv.size(); ++k) {
    if (iv[k].second >= sk.T && k + 1 == iv.size()) continue;
    if (k == 0 && iv[k].first <= sk.initial.t) continue;
    r.mean_sojourn += iv[k].second - iv[k].first;
    ++closed;
  }
  r.mean_sojourn = closed ? r.mean_sojourn / static_cast<double>(closed) : std::nan("");
  for (std::size_t k = 1; k < iv.size(); ++k) r.mean_return += iv[k].first - iv[k - 1].second;
  r.mean_return /= static_cast<double>(iv.size() - 1);
  return r;
}

// Expected return time to the null model for unit speeds, given its mass mu0.
inline double expected_return_time(std::size_t d, double kappa, double mu0) {
  return (1.0 - mu0) / (static_cast<double>(d) * kappa * mu0);
}

inline double expected_null_sojourn(std::size_t d, double kappa) { return 1.0 / (kappa * static_cast<double>(d)); }

// Occupation of a union of intervals inside [a, b).
inline double covered(const std::vector<Interval>& iv, double a, double b) {
  double z = 0.0;
  for (const auto& [lo, hi] : iv) z += std::max(0.0, std::min(hi, b) - std::max(lo, a));
  return z;
}

struct BatchEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Batch-means estimate of an occupation fraction and its Monte Carlo standard error.
inline BatchEstimate batch_occupation(const std::vector<Interval>& iv, double t0, double T, std::size_t batches = 50) {
  if (batches < 2) throw std::invalid_argument("batch_occupation: need at least two batches");
  const double w = (T - t0) / static_cast<double>(batches);
  std::vector<double> f(batches);
  double m = 0.0;
  for (std::size_t k = 0; k < batches; ++k) {
    const double a = t0 + static_cast<double>(k) * w;
    f[k] = covered(iv, a, a + w) / w;
    m += f[k];
  }
  m /= static_cast<double>(batches);
  double var = 0.0;
  for (double x : f) var += (x - m) * (x - m);
  var /= static_cast<double>(batches - 1);
  return {m, std::sqrt(var / static_cast<double>(batches))};
}

inline BatchEstimate batch_means(const std::vector<double>& x, std::size_t batches = 50) {
  if (x.size() < batches || batches < 2) throw std::invalid_argument("batch_means: too few samples");
  const std::size_t len = x.size() / batches;
  std::vector<double> f(batches, 0.0);
  double m = 0.0;
  for (std::size_t k = 0; k < batches; ++k) {
    for (std::size_t j = 0; j < len; ++j) f[k] += x[k * len + j];
    f[k] /= static_cast<double>(len);
    m += f[k];
  }
  m /= static_cast<double>(batches);
  double var = 0.0;
  for (double v : f) var += (v - m) * (v - m);
  var /= static_cast<double>(batches - 1);
  return {m, std::sqrt(var / static_cast<double>(batches))};
}

// Running occupation of zero per coordinate and of the null model, fed from
// sampler observers so that long runs need not keep their events.
class OccupationAccumulator {
 public:
  explicit OccupationAccumulator(const StickyState& init)
      : t0_(init.t), since_(init.dim(), init.t), zero_(init.dim(), 0.0), frozen_(init.frozen) {
    for (auto f : frozen_) nfrozen_ += f;
    if (nfrozen_ == frozen_.size()) null_since_ = t0_;
  }

  void observe(const StickyState& s, const EventRecord& e) {
    if (e.full != kNoVector || e.coord == kNoCoord) return;
    const std::size_t i = e.coord;
    if (e.kind == EventKind::Freeze && !frozen_[i]) {
      frozen_[i] = 1;
      since_[i] = e.t;
      if (++nfrozen_ == frozen_.size()) {
        null_since_ = e.t;
        ++null_visits_;
      }
    } else if (e.kind == EventKind::Thaw && frozen_[i]) {
      if (nfrozen_ == frozen_.size()) null_time_ += e.t - null_since_;
      frozen_[i] = 0;
      --nfrozen_;
      zero_[i] += e.t - since_[i];
    }
    (void)s;
  }

  EventObserver observer() {
    return [this](const StickyState& s, const EventRecord& e) {
      observe(s, e);
      return true;
    };
  }

  InclusionSummary inclusion(double t) const {
    InclusionSummary out{std::vector<double>(zero_.size(), 1.0), t};
    const double len = t - t0_;
    if (!(len > 0.0)) return out;
    for (std::size_t i = 0; i < zero_.size(); ++i) {
      const double z = zero_[i] + (frozen_[i] ? t - since_[i] : 0.0);
      out.p[i] = 1.0 - z / len;
    }
    return out;
  }

  double null_occupation(double t) const {
    const double len = t - t0_;
    if (!(len > 0.0)) return 0.0;
    return (null_time_ + (nfrozen_ == frozen_.size() ? t - null_since_ : 0.0)) / len;
  }

  std::uint64_t null_visits() const { return null_visits_; }

 private:
  double t0_;
  std::vector<double> since_, zero_;
  std::vector<std::uint8_t> frozen_;
  std::size_t nfrozen_ = 0;
  double null_since_ = 0.0, null_time_ = 0.0;
  std::uint64_t null_visits_ = 0;
};

inline InclusionSummary gibbs_inclusion(const GibbsChain& chain, double budget_fraction = 1.0) {
  if (!(budget_fraction >= 0.0 && budget_fraction <= 1.0))
    throw std::invalid_argument("gibbs_inclusion: budget fraction must lie in [0,1]");
  const std::size_t d = chain.inclusion_counts.size();
  InclusionSummary out{std::vector<double>(d, 0.0), 0.0};
  if (chain.states.empty()) {
    if (budget_fraction < 1.0) throw std::invalid_argument("gibbs_inclusion: chain kept no states");
    if (chain.iterations == 0) return out;
    for (std::size_t i = 0; i < d; ++i)
      out.p[i] = static_cast<double>(chain.inclusion_counts[i]) / static_cast<double>(chain.iterations);
    out.T = static_cast<double>(chain.iterations);
    return out;
  }
  const auto n = static_cast<std::size_t>(std::ceil(budget_fraction * static_cast<double>(chain.states.size() - 1)));
  // With no iterations in the budget the initial state is the estimate.
  const std::size_t lo = n == 0 ? 0 : 1, hi = n == 0 ? 0 : n;
  for (std::size_t k = lo; k <= hi; ++k)
    for (std::size_t i = 0; i < d; ++i) out.p[i] += chain.states[k].alpha[i];
  for (auto& p : out.p) p /= static_cast<double>(hi - lo + 1);
  out.T = static_cast<double>(n);
  return out;
}

inline nlohmann::json summary_json(const Skeleton& sk, const RunStats& stats) {
  const auto inc = inclusion_probs(sk);
  nlohmann::json j;
  j["T"] = sk.T;
  j["inclusion"] = inc.p;
  j["occupation_null"] = occupation_zero(sk, all_coords(sk.initial.dim()));
  j["event_counts"] = {{"reflect", sk.counts.reflect}, {"freeze", sk.counts.freeze}, {"thaw", sk.counts.thaw},
                       {"shadow", sk.counts.shadow}, {"refresh", sk.counts.refresh}};
  j["acceptance_ratio"] = stats.acceptance_ratio(sk.counts);
  return j;
}

inline nlohmann::json summary_json(const InclusionSummary& inc, double occupation_null, const EventCounts& counts,
                                   double acceptance_ratio) {
  nlohmann::json j;
  j["T"] = inc.T;
  j["inclusion"] = inc.p;
  j["occupation_null"] = occupation_null;
  j["event_counts"] = {{"reflect", counts.reflect}, {"freeze", counts.freeze}, {"thaw", counts.thaw},
                       {"shadow", counts.shadow}, {"refresh", counts.refresh}};
  j["acceptance_ratio"] = acceptance_ratio;
  return j;
}

}  // namespace sticky
