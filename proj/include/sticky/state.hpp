#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Coordinates are zero-based throughout the library.
namespace sticky {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using ActiveSet = std::vector<std::size_t>;

struct StickyState {
  std::vector<double> x;
  std::vector<double> v;
  std::vector<std::uint8_t> frozen;  // membership flags, one per coordinate
  double t = 0.0;

  StickyState() = default;
  StickyState(std::vector<double> x0, std::vector<double> v0)
      : x(std::move(x0)), v(std::move(v0)), frozen(x.size(), 0) {
    if (x.size() != v.size()) throw std::invalid_argument("StickyState: x and v differ in length");
  }

  std::size_t dim() const { return x.size(); }
  bool is_frozen(std::size_t i) const { return frozen[i] != 0; }

  std::size_t frozen_count() const {
    std::size_t n = 0;
    for (auto f : frozen) n += f;
    return n;
  }

  void validate() const {
    if (v.size() != x.size() || frozen.size() != x.size())
      throw std::invalid_argument("StickyState: inconsistent lengths");
    if (!(t >= 0.0)) throw std::invalid_argument("StickyState: negative clock");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!frozen[i]) continue;
      if (x[i] != 0.0)
        throw std::invalid_argument("StickyState: frozen coordinate " + std::to_string(i) + " is not at zero");
      if (v[i] == 0.0)
        throw std::invalid_argument("StickyState: frozen coordinate " + std::to_string(i) + " has zero velocity");
    }
  }
};

struct LinearDynamics {};

// Boomerang flow around the origin. Only the diagonal of the reference
// covariance is kept; it enters velocity refreshment, not the flow itself,
// since the rotation is the same in whitened and original coordinates.
struct HamiltonianDynamics {
  std::vector<double> sigma_diag;
};

using DynamicsKind = std::variant<LinearDynamics, HamiltonianDynamics>;

inline ActiveSet active_set(const StickyState& s) {
  ActiveSet a;
  a.reserve(s.dim());
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (!s.frozen[i]) a.push_back(i);
  return a;
}

inline StickyState transfer(StickyState s, std::size_t i) {
  if (i >= s.dim() || !s.frozen[i])
    throw std::logic_error("transfer: coordinate " + std::to_string(i) + " is not frozen");
  s.frozen[i] = 0;
  return s;
}

inline StickyState freeze(StickyState s, std::size_t i) {
  if (i >= s.dim()) throw std::out_of_range("freeze: coordinate out of range");
  if (s.frozen[i]) throw std::logic_error("freeze: coordinate " + std::to_string(i) + " already frozen");
  if (s.x[i] != 0.0) throw std::logic_error("freeze: coordinate " + std::to_string(i) + " is not at zero");
  if (s.v[i] == 0.0) throw std::logic_error("freeze: coordinate " + std::to_string(i) + " has zero velocity");
  s.frozen[i] = 1;
  return s;
}

// First strictly positive time at which x*cos(t) + v*sin(t) vanishes.
inline double hamiltonian_hit_time(double x, double v) {
  if (x == 0.0 && v == 0.0) return kInf;
  if (x == 0.0) return std::numbers::pi;
  double t = std::atan2(x, -v);  // root of the form atan(-x/v) on (-pi, pi]
  while (t <= 0.0) t += std::numbers::pi;
  while (t > std::numbers::pi) t -= std::numbers::pi;
  return t;
}

inline double linear_hit_time(double x, double v) {
  if (x * v < 0.0) return -x / v;
  return kInf;
}

inline double hit_zero_time(const StickyState& s, std::size_t i, const DynamicsKind& kind) {
  if (std::holds_alternative<LinearDynamics>(kind)) return linear_hit_time(s.x[i], s.v[i]);
  return hamiltonian_hit_time(s.x[i], s.v[i]);
}

namespace detail {
inline constexpr double kCrossTol = 1e-12;
}

// In-place flow used by the samplers; the caller guarantees no interior crossing.
inline void flow_in_place(StickyState& s, double dt, const DynamicsKind& kind) {
  if (std::holds_alternative<LinearDynamics>(kind)) {
    for (std::size_t i = 0; i < s.dim(); ++i)
      if (!s.frozen[i]) s.x[i] += s.v[i] * dt;
  } else {
    const double c = std::cos(dt), sn = std::sin(dt);
    for (std::size_t i = 0; i < s.dim(); ++i) {
      if (s.frozen[i]) continue;
      const double x = s.x[i], v = s.v[i];
      s.x[i] = x * c + v * sn;
      s.v[i] = -x * sn + v * c;
    }
  }
  s.t += dt;
}

inline StickyState flow(StickyState s, double dt, const DynamicsKind& kind) {
  if (!(dt >= 0.0)) throw std::invalid_argument("flow: negative time step");
  for (std::size_t i = 0; i < s.dim(); ++i) {
    if (s.frozen[i] || s.x[i] == 0.0) continue;
    const double th = hit_zero_time(s, i, kind);
    if (th < dt * (1.0 - detail::kCrossTol))
      throw std::domain_error("flow: coordinate " + std::to_string(i) + " crosses zero at " + std::to_string(th) +
                              " inside the step");
  }
  flow_in_place(s, dt, kind);
  return s;
}

}  // namespace sticky
