#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "sticky/state.hpp"

using namespace sticky;

namespace {
StickyState flow_in_place_copy(StickyState s, double dt, const DynamicsKind& kind) {
  flow_in_place(s, dt, kind);
  return s;
}
}  // namespace

TEST(State, ActiveSet) {
  StickyState s({1, 0, 2}, {1, 1, 1});
  EXPECT_EQ(active_set(s), (ActiveSet{0, 1, 2}));
  s.frozen[1] = 1;
  s.validate();
  EXPECT_EQ(active_set(s), (ActiveSet{0, 2}));
  StickyState z({0, 0, 0}, {1, -1, 1});
  z.frozen = {1, 1, 1};
  EXPECT_TRUE(active_set(z).empty());
}

TEST(State, ValidateRejectsBrokenFrozenCoordinates) {
  StickyState s({0.5}, {1.0});
  s.frozen[0] = 1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  StickyState z({0.0}, {0.0});
  z.frozen[0] = 1;
  EXPECT_THROW(z.validate(), std::invalid_argument);
  EXPECT_THROW(StickyState({1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST(State, Transfer) {
  StickyState s({0, 3}, {1, -1});
  s.frozen[0] = 1;
  const auto t = transfer(s, 0);
  EXPECT_EQ(t.frozen, (std::vector<std::uint8_t>{0, 0}));
  EXPECT_EQ(t.x, s.x);
  EXPECT_EQ(t.v, s.v);
  StickyState two({0, 0}, {1, 1});
  two.frozen = {1, 1};
  EXPECT_EQ(transfer(two, 1).frozen, (std::vector<std::uint8_t>{1, 0}));
  EXPECT_THROW(transfer(t, 0), std::logic_error);
}

TEST(State, Freeze) {
  StickyState s({0, 1}, {-1, 1});
  const auto f = freeze(s, 0);
  EXPECT_TRUE(f.is_frozen(0));
  EXPECT_THROW(freeze(f, 0), std::logic_error);
  StickyState off({0.5}, {1});
  EXPECT_THROW(freeze(off, 0), std::logic_error);
}

TEST(State, LinearFlow) {
  StickyState s({1, 0}, {1, 2});
  s.frozen[1] = 1;
  const auto f = flow(s, 2.0, LinearDynamics{});
  EXPECT_DOUBLE_EQ(f.x[0], 3.0);
  EXPECT_DOUBLE_EQ(f.x[1], 0.0);
  EXPECT_THROW(flow(StickyState({1}, {-1}), 2.0, LinearDynamics{}), std::domain_error);
}

TEST(State, HamiltonianQuarterTurn) {
  const auto f = flow(StickyState({1}, {0}), std::numbers::pi / 2, HamiltonianDynamics{{1.0}});
  EXPECT_NEAR(f.x[0], 0.0, 1e-15);
  EXPECT_NEAR(f.v[0], -1.0, 1e-15);
}

TEST(State, HitZeroTimes) {
  StickyState s({2, -1}, {-1, -1});
  EXPECT_DOUBLE_EQ(hit_zero_time(s, 0, LinearDynamics{}), 2.0);
  EXPECT_EQ(hit_zero_time(s, 1, LinearDynamics{}), kInf);
  EXPECT_NEAR(hit_zero_time(StickyState({1}, {0}), 0, HamiltonianDynamics{{1.0}}), std::numbers::pi / 2, 1e-15);
}

TEST(State, FlowSemigroup) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0, 0.7);
  for (int rep = 0; rep < 200; ++rep) {
    StickyState s({n(rng), n(rng)}, {n(rng), n(rng)});
    const double a = u(rng), b = u(rng);
    const HamiltonianDynamics h{{1.0, 1.0}};
    const auto ab = flow_in_place_copy(s, a + b, h);
    auto two = s;
    flow_in_place(two, a, h);
    flow_in_place(two, b, h);
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(two.x[i], ab.x[i], 1e-12 * (1 + std::abs(ab.x[i])));
      EXPECT_NEAR(two.v[i], ab.v[i], 1e-12 * (1 + std::abs(ab.v[i])));
    }
    // Linear flow: exact when the step sum is representable.
    StickyState l({10.0, 20.0}, {0.5, 0.25});
    auto l2 = l;
    flow_in_place(l2, 1.0, LinearDynamics{});
    flow_in_place(l2, 2.0, LinearDynamics{});
    EXPECT_EQ(l2.x, flow(l, 3.0, LinearDynamics{}).x);
  }
}

TEST(State, EnergyConservation) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 200; ++rep) {
    StickyState s({n(rng)}, {n(rng)});
    const double e = s.x[0] * s.x[0] + s.v[0] * s.v[0];
    flow_in_place(s, 10.0 * std::abs(n(rng)), HamiltonianDynamics{{1.0}});
    EXPECT_NEAR(s.x[0] * s.x[0] + s.v[0] * s.v[0], e, 1e-12 * e);
  }
}

TEST(State, FrozenCoordinatesAreFixed) {
  StickyState s({0, 1}, {-2, 1});
  s.frozen[0] = 1;
  for (double dt : {0.1, 1.0, 100.0}) {
    EXPECT_EQ(flow_in_place_copy(s, dt, LinearDynamics{}).x[0], 0.0);
    EXPECT_EQ(flow_in_place_copy(s, dt, HamiltonianDynamics{{1.0, 1.0}}).x[0], 0.0);
    EXPECT_EQ(flow_in_place_copy(s, dt, HamiltonianDynamics{{1.0, 1.0}}).v[0], -2.0);
  }
}

TEST(State, FlowToHitTimeLandsOnZero) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 500; ++rep) {
    StickyState s({n(rng)}, {n(rng)});
    for (const DynamicsKind& kind : {DynamicsKind{LinearDynamics{}}, DynamicsKind{HamiltonianDynamics{{1.0}}}}) {
      const double t = hit_zero_time(s, 0, kind);
      if (!std::isfinite(t)) continue;
      EXPECT_NEAR(flow(s, t, kind).x[0], 0.0, 1e-12);
    }
  }
}
