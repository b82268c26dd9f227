#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sticky/sticky.hpp"

using namespace sticky;

namespace {

std::unique_ptr<GaussianTarget> standard_1d(double kappa) {
  return gaussian_target(make_gaussian_spec(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), {kappa}));
}

std::unique_ptr<GaussianTarget> correlated_2d() {
  Eigen::MatrixXd G(2, 2);
  G << 2, 1, 1, 2;
  Eigen::VectorXd mu(2);
  mu << 1, -1;
  return gaussian_target(make_gaussian_spec(G, mu, {1.0, 1.0}));
}

std::unique_ptr<GaussianTarget> tridiagonal(std::size_t d, double off, double mu, double kappa) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    G(i, i) = 1.0;
    if (i + 1 < G.rows()) G(i, i + 1) = G(i + 1, i) = off;
  }
  return gaussian_target(make_gaussian_spec(G, Eigen::VectorXd::Constant(G.rows(), mu), std::vector<double>(d, kappa)));
}

double atom_fraction(double kappa) { return 1.0 / (1.0 + kappa * std::sqrt(2.0 * std::numbers::pi)); }

bool same_events(const Skeleton& a, const Skeleton& b, double tol) {
  if (a.events.size() != b.events.size()) return false;
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    const auto &e = a.events[k], &f = b.events[k];
    if (e.kind != f.kind || e.coord != f.coord) return false;
    if (std::abs(e.t - f.t) > tol * (1.0 + e.t)) return false;
    if (std::abs(e.x - f.x) > tol * (1.0 + std::abs(e.x)) || e.v != f.v) return false;
  }
  return true;
}

}  // namespace

TEST(ZigZag, FirstFreezeFromKinematics) {
  // mu beyond the start keeps every reflection rate at zero until the first hit.
  auto t = gaussian_target(make_gaussian_spec(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Constant(2, 1.0), {1.0, 1.0}));
  SamplerConfig cfg;
  cfg.T = 0.5;
  {
    StickyState s({-0.75, -0.4}, {1.0, 1.0});
    auto run = run_sticky_zigzag(*t, s, cfg);
    ASSERT_FALSE(run.skeleton.events.empty());
    const auto& e = run.skeleton.events.front();
    EXPECT_EQ(e.kind, EventKind::Freeze);
    EXPECT_EQ(e.coord, 1u);
    EXPECT_NEAR(e.t, 0.4, 1e-12);
  }
  {
    cfg.T = 1.0;
    StickyState s({-0.75, -0.4}, {1.0, -1.0});
    auto run = run_sticky_zigzag(*t, s, cfg);
    std::size_t k = 0;
    while (run.skeleton.events[k].kind != EventKind::Freeze) ++k;
    EXPECT_EQ(run.skeleton.events[k].coord, 0u);
    EXPECT_NEAR(run.skeleton.events[k].t, 0.75, 1e-12);
  }
}

TEST(ZigZag, StationaryAtomOneDimension) {
  auto t = standard_1d(1.0);
  SamplerConfig cfg;
  cfg.T = 1e5;
  cfg.seed = 11;
  auto run = run_sticky_zigzag(*t, StickyState({0.5}, {1.0}), cfg);
  EXPECT_TRUE(replay_check(run.skeleton).ok);
  EXPECT_NEAR(occupation_zero(run.skeleton, {0}), atom_fraction(1.0), 0.02);
}

TEST(ZigZag, LargeKappaRarelySticks) {
  auto t = standard_1d(1e6);
  SamplerConfig cfg;
  cfg.T = 1e3;
  auto run = run_sticky_zigzag(*t, StickyState({0.5}, {1.0}), cfg);
  EXPECT_LT(occupation_zero(run.skeleton, {0}), 1e-3);
}

TEST(ZigZag, InfiniteKappaAtZeroAborts) {
  auto t = standard_1d(kInf);
  SamplerConfig cfg;
  cfg.T = 10.0;
  EXPECT_THROW(run_sticky_zigzag(*t, StickyState({0.5}, {-1.0}), cfg), std::domain_error);
}

TEST(ZigZag, FrozenStartWithInfiniteKappaRejected) {
  auto t = standard_1d(kInf);
  StickyState s({0.0}, {1.0});
  s.frozen[0] = 1;
  SamplerConfig cfg;
  EXPECT_THROW(run_sticky_zigzag(*t, s, cfg), std::invalid_argument);
}

TEST(ZigZag, VariantsProduceIdenticalEvents) {
  auto t = correlated_2d();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SamplerConfig cfg;
    cfg.T = 2000.0;
    cfg.seed = seed;
    StickyState s({0.3, -0.2}, {1.0, -1.0});
    cfg.variant = ZigZagVariant::Global;
    auto g = run_sticky_zigzag(*t, s, cfg);
    cfg.variant = ZigZagVariant::Local;
    auto l = run_sticky_zigzag(*t, s, cfg);
    cfg.variant = ZigZagVariant::FullyLocal;
    auto f = run_sticky_zigzag(*t, s, cfg);
    EXPECT_GT(g.skeleton.events.size(), 100u);
    EXPECT_TRUE(same_events(g.skeleton, l.skeleton, 1e-9));
    EXPECT_TRUE(same_events(g.skeleton, f.skeleton, 1e-9));
  }
}

TEST(ZigZag, VariantsAgreeOnBandedTarget) {
  auto t = tridiagonal(12, 0.4, 0.3, 0.7);
  std::vector<double> x0(12), v0(12);
  for (std::size_t i = 0; i < 12; ++i) {
    x0[i] = 0.1 * static_cast<double>(i) - 0.5;
    v0[i] = i % 3 == 0 ? -1.0 : 1.0;
  }
  SamplerConfig cfg;
  cfg.T = 300.0;
  cfg.seed = 5;
  cfg.variant = ZigZagVariant::Global;
  auto g = run_sticky_zigzag(*t, StickyState(x0, v0), cfg);
  cfg.variant = ZigZagVariant::Local;
  auto l = run_sticky_zigzag(*t, StickyState(x0, v0), cfg);
  cfg.variant = ZigZagVariant::FullyLocal;
  auto f = run_sticky_zigzag(*t, StickyState(x0, v0), cfg);
  EXPECT_TRUE(same_events(g.skeleton, l.skeleton, 1e-9));
  EXPECT_TRUE(same_events(g.skeleton, f.skeleton, 1e-9));
}

TEST(ZigZag, LocalRecomputationsPerReflection) {
  auto t = tridiagonal(100, 0.3, 5.0, 1.0);
  std::vector<double> x0(100, 5.0), v0(100, 1.0);
  SamplerConfig cfg;
  cfg.T = 50.0;
  cfg.variant = ZigZagVariant::FullyLocal;
  std::uint64_t last = 0, reflections = 0;
  bool ok = true;
  ZigZagEngine eng(*t, cfg, {});
  StickyState s0(x0, v0);
  // Count recomputations between consecutive reflections through the engine counters.
  auto run = eng.run(s0, [&](const StickyState&, const EventRecord& e) {
    if (e.kind == EventKind::Reflect) {
      const auto now = eng.stats().clock_recomputations;
      if (reflections > 0 && now - last > 3) ok = false;
      last = now;
      ++reflections;
    }
    return true;
  });
  EXPECT_GT(reflections, 100u);
  EXPECT_TRUE(ok);
  EXPECT_EQ(run.stats.order_violations, 0u);
}

TEST(ZigZag, QueuePopsAreOrdered) {
  auto t = tridiagonal(30, 0.3, 0.0, 0.5);
  std::vector<double> x0(30, 0.7), v0(30, -1.0);
  for (auto variant : {ZigZagVariant::Local, ZigZagVariant::FullyLocal, ZigZagVariant::Sparse}) {
    SamplerConfig cfg;
    cfg.T = 200.0;
    cfg.variant = variant;
    auto run = run_sticky_zigzag(*t, StickyState(x0, v0), cfg);
    EXPECT_EQ(run.stats.order_violations, 0u);
    EXPECT_GT(run.stats.queue_pops, 0u);
    EXPECT_TRUE(replay_check(run.skeleton).ok) << replay_check(run.skeleton).message;
  }
}

TEST(ZigZag, SparseVariantMatchesOccupation) {
  auto t = tridiagonal(20, 0.2, 0.0, 1.0);
  std::vector<double> x0(20, 0.5), v0(20, 1.0);
  SamplerConfig cfg;
  cfg.T = 2e4;
  cfg.variant = ZigZagVariant::Sparse;
  auto sp = run_sticky_zigzag(*t, StickyState(x0, v0), cfg);
  cfg.variant = ZigZagVariant::FullyLocal;
  auto fl = run_sticky_zigzag(*t, StickyState(x0, v0), cfg);
  const auto a = inclusion_probs(sp.skeleton), b = inclusion_probs(fl.skeleton);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < 20; ++i) ma += a.p[i] / 20, mb += b.p[i] / 20;
  EXPECT_NEAR(ma, mb, 0.02);
  EXPECT_TRUE(replay_check(sp.skeleton).ok);
}

TEST(ZigZag, RateIdentity) {
  auto t = correlated_2d();
  Rng rng(3);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> x{3 * std_normal(rng), 3 * std_normal(rng)};
    std::vector<double> v{bernoulli(rng, 0.5) ? 1.0 : -1.0, bernoulli(rng, 0.5) ? 1.0 : -1.0};
    for (std::size_t i = 0; i < 2; ++i) {
      const double g = t->partial(x, i);
      const double lam = std::max(v[i] * g, 0.0);
      const double lam_f = std::max(-v[i] * g, 0.0);
      EXPECT_NEAR(lam - lam_f, v[i] * g, 1e-10);
    }
  }
}

TEST(ZigZag, SubsampledDegenerateCaseMatchesLaw) {
  // One observation per coordinate: the estimator equals the gradient.
  Eigen::MatrixXd A(2, 2);
  A << 1, 0, 0, 1;
  auto t = logistic_target(A.sparseView(), {1.0, 0.0}, 4.0, 0.5);
  SamplerConfig cfg;
  cfg.T = 2e4;
  auto ex = run_sticky_zigzag(*t, StickyState({0.1, 0.1}, {1, 1}), cfg);
  auto sub = run_sticky_zigzag_subsampled(*t, StickyState({0.1, 0.1}, {1, 1}), cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto ie = all_frozen_intervals(ex.skeleton, {i});
    const auto is = all_frozen_intervals(sub.skeleton, {i});
    const auto be = batch_occupation(ie, 0, cfg.T), bs = batch_occupation(is, 0, cfg.T);
    EXPECT_NEAR(be.mean, bs.mean, 3.0 * std::hypot(be.stderr_, bs.stderr_) + 1e-3);
  }
}

TEST(ZigZag, RjHalfCrossesWithoutSticking) {
  auto t = standard_1d(1.0);
  SamplerConfig cfg;
  cfg.T = 2e4;
  cfg.rj_p = 0.5;
  auto run = run_rj_zigzag(*t, StickyState({0.5}, {1.0}), cfg);
  EXPECT_GT(run.stats.crossings, 100u);
  EXPECT_TRUE(replay_check(run.skeleton).ok);
  EXPECT_NEAR(occupation_zero(run.skeleton, {0}), atom_fraction(1.0), 0.03);
}

TEST(ZigZag, RjStuckTimeVarianceFallsWithStickProbability) {
  // Var = hits (2 / p - 1) / kappa^2 for the Bernoulli-exponential construction.
  double prev = kInf;
  for (double p : {0.1, 0.5, 1.0}) {
    const auto m = stuck_time_moments(1000, p, 1.0, 10000, 21);
    EXPECT_NEAR(m.mean, 1000.0, 0.03 * 1000.0);
    EXPECT_NEAR(m.variance, 1000.0 * (2.0 / p - 1.0), 0.05 * 1000.0 * (2.0 / p - 1.0));
    EXPECT_LT(m.variance, prev);
    prev = m.variance;
  }
  Rng rng(1);
  EXPECT_THROW(total_stuck_time(10, 0.0, 1.0, rng), std::invalid_argument);
}

TEST(ZigZag, Deterministic) {
  auto t = correlated_2d();
  SamplerConfig cfg;
  cfg.T = 500;
  cfg.seed = 99;
  auto a = run_sticky_zigzag(*t, StickyState({0.1, 0.1}, {1, 1}), cfg);
  auto b = run_sticky_zigzag(*t, StickyState({0.1, 0.1}, {1, 1}), cfg);
  EXPECT_TRUE(same_events(a.skeleton, b.skeleton, 0.0));
}
