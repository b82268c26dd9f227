#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sticky/clocks.hpp"
#include "sticky/state.hpp"

namespace sticky {

enum class Constraint { Unconstrained, StrictlyPositive };

inline double kappa_from_prior(double w, double slab_density_at_zero) {
  if (!(w > 0.0 && w < 1.0)) throw std::invalid_argument("kappa_from_prior: w must lie in (0,1)");
  if (!(slab_density_at_zero > 0.0)) throw std::invalid_argument("kappa_from_prior: slab density must be positive");
  return w / (1.0 - w) * slab_density_at_zero;
}

inline double normal_density(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Unbiased single-term estimators of the partial derivatives, anchored at x*:
//   N_i (S(x,i,k) - S(x*,i,k)) + anchor_partial(i) + prior_partial(x,i).
class SubsamplingScheme {
 public:
  virtual ~SubsamplingScheme() = default;
  virtual std::size_t term_count(std::size_t i) const = 0;
  virtual double term(std::span<const double> x, std::size_t i, std::size_t k) const = 0;
  virtual double anchor_term(std::size_t i, std::size_t k) const = 0;
  virtual double anchor_partial(std::size_t i) const = 0;
  virtual double prior_partial(std::span<const double> x, std::size_t i) const = 0;
  virtual const std::vector<double>& anchor() const = 0;
  // Bound valid for every term estimator along the ray from s.
  virtual RateBound sub_bound(const StickyState& s, std::size_t i) const = 0;

  double estimate(std::span<const double> x, std::size_t i, std::size_t k) const {
    const double n = static_cast<double>(term_count(i));
    return n * (term(x, i, k) - anchor_term(i, k)) + anchor_partial(i) + prior_partial(x, i);
  }
};

// Growth constants with |grad U(x)| <= A |x| + B, U = Psi - x' Sigma^{-1} x / 2.
struct GrowthBound {
  double A = 0.0;
  double B = 0.0;
};

class Target {
 public:
  virtual ~Target() = default;

  std::size_t dim() const { return kappa_.size(); }
  const std::vector<double>& kappa() const { return kappa_; }
  double kappa(std::size_t i) const { return kappa_[i]; }
  Constraint constraint(std::size_t i) const {
    return constraints_.empty() ? Constraint::Unconstrained : constraints_[i];
  }
  // Coordinates whose events invalidate the bound of i; always contains i.
  const std::vector<std::size_t>& neighborhood(std::size_t i) const { return neighbors_[i]; }
  // Coordinates read by partial(x, i) and zigzag_bound(s, i).
  virtual const std::vector<std::size_t>& read_set(std::size_t i) const { return neighbors_[i]; }
  // Whether bounds stay valid after other coordinates freeze or thaw.
  virtual bool bounds_survive_sticky_events() const { return false; }

  virtual double partial(std::span<const double> x, std::size_t i) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < dim(); ++i) out[i] = partial(x, i);
  }
  virtual std::optional<double> potential(std::span<const double>) const { return std::nullopt; }

  // Bound on t -> (v_i d_i Psi(x + v_alpha t))^+ for an active coordinate.
  virtual RateBound zigzag_bound(const StickyState& s, std::size_t i) const = 0;
  // Bound on t -> <v_alpha, grad Psi(x + v_alpha t)>^+ for linear flows.
  virtual std::optional<RateBound> directional_bound(const StickyState&) const { return std::nullopt; }
  // Growth constants for Boomerang rates around a diagonal reference precision.
  virtual std::optional<GrowthBound> growth_bound(std::span<const double> /*ref_precision_diag*/) const {
    return std::nullopt;
  }

  virtual const SubsamplingScheme* subsampling() const { return nullptr; }

  // Eligibility for sticking and thawing given the current frozen set; used
  // by targets whose atoms are restricted to particular sub-models.
  virtual bool may_freeze(std::size_t, const StickyState&) const { return true; }
  virtual bool may_thaw(std::size_t, const StickyState&) const { return true; }
  virtual bool restricted_models() const { return false; }
  // Coordinates whose eligibility can change when i freezes or thaws.
  virtual std::vector<std::size_t> eligibility_dependents(std::size_t) const { return {}; }

  virtual std::string name() const = 0;

 protected:
  void set_kappa(std::vector<double> k) {
    for (double x : k)
      if (!(x >= 0.0)) throw std::invalid_argument("Target: stickiness weights must be nonnegative");
    kappa_ = std::move(k);
  }
  void set_neighbors(std::vector<std::vector<std::size_t>> nb) {
    for (std::size_t i = 0; i < nb.size(); ++i) {
      bool has_self = false;
      for (auto j : nb[i]) has_self |= (j == i);
      if (!has_self) nb[i].insert(nb[i].begin(), i);
    }
    neighbors_ = std::move(nb);
  }
  void set_constraints(std::vector<Constraint> c) { constraints_ = std::move(c); }

  std::vector<double> kappa_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<Constraint> constraints_;
};

// Central differences of the potential.
inline std::vector<double> finite_diff_grad(const Target& target, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = xp[i];
    xp[i] = xi + h;
    auto up = target.potential(xp);
    xp[i] = xi - h;
    auto dn = target.potential(xp);
    xp[i] = xi;
    if (!up || !dn) throw std::logic_error("finite_diff_grad: target has no potential");
    g[i] = (*up - *dn) / (2.0 * h);
  }
  return g;
}

}  // namespace sticky
