#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "sticky/gibbs.hpp"
#include "sticky/models/gaussian.hpp"

namespace sticky::bench {

// Hitting-time scenarios: independent N(0, 1/gamma) coordinates with a small
// stickiness kappa, so every smaller model carries more mass than any larger one.
struct ScenarioParams {
  double gamma = 25.0;
  double kappa = 1e-4;
};

inline GaussianSpec independent_spec(std::size_t d, const ScenarioParams& sp) {
  const auto n = static_cast<Eigen::Index>(d);
  return make_gaussian_spec(sp.gamma * Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n),
                            std::vector<double>(d, sp.kappa));
}

// Scenario 1: supported on every sub-model.
inline std::unique_ptr<GaussianTarget> every_model_target(std::size_t d, const ScenarioParams& sp) {
  return gaussian_target(independent_spec(d, sp));
}

// Scenario 2: supported on the nested chain {0..k-1}, k = d, ..., 0. Coordinate
// i may stick only when every later coordinate is frozen, and may thaw only
// when every earlier coordinate is active.
class NestedChainTarget : public GaussianTarget {
 public:
  NestedChainTarget(std::size_t d, const ScenarioParams& sp) : GaussianTarget(independent_spec(d, sp)) {}

  bool may_freeze(std::size_t i, const StickyState& s) const override {
    for (std::size_t j = i + 1; j < s.dim(); ++j)
      if (!s.frozen[j]) return false;
    return true;
  }
  bool may_thaw(std::size_t i, const StickyState& s) const override { return i == 0 || !s.frozen[i - 1]; }
  bool restricted_models() const override { return true; }
  std::vector<std::size_t> eligibility_dependents(std::size_t i) const override {
    std::vector<std::size_t> out;
    if (i > 0) out.push_back(i - 1);
    if (i + 1 < dim()) out.push_back(i + 1);
    return out;
  }
  std::string name() const override { return "nested_chain"; }
};

inline bool nested_support(const Membership& alpha) {
  bool seen_out = false;
  for (auto a : alpha) {
    if (a && seen_out) return false;
    seen_out |= !a;
  }
  return true;
}

}  // namespace sticky::bench
