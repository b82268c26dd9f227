#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "sticky/random.hpp"
#include "sticky/state.hpp"

namespace sticky {

// Rate t -> (a + b t)^+ on [0, horizon].
struct AffineBound {
  double a = 0.0;
  double b = 0.0;
  double horizon = kInf;

  double value(double t) const { return std::max(a + b * t, 0.0); }
};

struct ClockDraw {
  double time = kInf;
  double bound_value = 0.0;
  bool exhausted = false;
};

class BoundViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integral of (a + b s)^+ over [0, t].
inline double integrated_affine_rate(double a, double b, double t) {
  if (t <= 0.0) return 0.0;
  if (b == 0.0) return a > 0.0 ? a * t : 0.0;
  const double root = -a / b;
  auto prim = [&](double s) { return a * s + 0.5 * b * s * s; };
  if (b > 0.0) {
    if (root >= t) return 0.0;
    const double lo = std::max(root, 0.0);
    return prim(t) - prim(lo);
  }
  // b < 0: positive before the root
  if (root <= 0.0) return 0.0;
  const double hi = std::min(root, t);
  return prim(hi);
}

// Smallest tau with integral_0^tau (a + b s)^+ ds = u, or +inf.
inline double invert_affine_rate(double a, double b, double u) {
  if (!(u > 0.0)) return 0.0;
  if (b == 0.0) return a > 0.0 ? u / a : kInf;
  if (b > 0.0) {
    if (a >= 0.0) return 2.0 * u / (a + std::sqrt(a * a + 2.0 * b * u));
    return -a / b + std::sqrt(2.0 * u / b);
  }
  if (a <= 0.0) return kInf;
  const double mass = a * a / (2.0 * -b);
  if (u > mass) return kInf;
  const double disc = std::max(a * a + 2.0 * b * u, 0.0);
  return 2.0 * u / (a + std::sqrt(disc));
}

inline ClockDraw draw_from_residual(const AffineBound& bound, double u) {
  const double tau = invert_affine_rate(bound.a, bound.b, u);
  if (tau > bound.horizon) return {bound.horizon, bound.value(bound.horizon), true};
  return {tau, std::isfinite(tau) ? bound.value(tau) : 0.0, false};
}

template <class G>
ClockDraw quadratic_or_thinned_time(const AffineBound& bound, G& rng) {
  return draw_from_residual(bound, std_exponential(rng));
}

inline double exp_time_from_uniform(double rate, double u) {
  if (!(rate > 0.0)) throw std::invalid_argument("exp_time: rate must be positive");
  return -std::log(u) / rate;
}

template <class G>
double exp_time(double rate, G& rng) {
  if (!(rate > 0.0)) throw std::invalid_argument("exp_time: rate must be positive");
  return std_exponential(rng) / rate;
}

inline std::pair<double, std::size_t> superposition(std::span<const std::pair<double, std::size_t>> times) {
  if (times.empty()) throw std::invalid_argument("superposition: no clocks");
  auto best = times.front();
  for (const auto& c : times)
    if (c.first < best.first || (c.first == best.first && c.second < best.second)) best = c;
  return best;
}

// Rate t -> (-v w / (x + v t))^+, the gradient of -w log(x) along the ray.
// Positive only when heading towards zero; its integral diverges at the wall.
struct LogBarrier {
  double x = 1.0;
  double v = 0.0;
  double weight = 0.0;

  double value(double t) const {
    if (v >= 0.0) return 0.0;
    return -v * weight / (x + v * t);
  }
};

inline double invert_log_barrier_rate(double x, double v, double weight, double u) {
  if (v >= 0.0 || weight <= 0.0) return kInf;
  return x * -std::expm1(-u / weight) / -v;
}

// Bound on a reflection rate: an affine part, optionally superposed with a
// log barrier. `exact` marks bounds that equal the true rate.
struct RateBound {
  AffineBound affine;
  std::optional<LogBarrier> barrier;
  bool exact = false;

  double value(double t) const { return affine.value(t) + (barrier ? barrier->value(t) : 0.0); }
};

inline void check_domination(double rate, double bound, const char* where) {
  if (rate > bound * (1.0 + 1e-9) + 1e-300) {
    std::ostringstream os;
    os.precision(17);
    os << "rate bound violated in " << where << ": rate " << rate << " exceeds bound " << bound;
    throw BoundViolation(os.str());
  }
}

}  // namespace sticky
