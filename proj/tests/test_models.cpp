#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sticky/sticky.hpp"

using namespace sticky;

namespace {

double max_rel_fd_error(const Target& t, const std::vector<double>& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  t.gradient(x, g);
  const auto fd = finite_diff_grad(t, x, h);
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(g[i] - fd[i]) / (1.0 + std::abs(g[i])));
  return err;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> random_design(std::size_t n, std::size_t d, Rng& rng) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < A.rows(); ++r)
    for (Eigen::Index c = 0; c < A.cols(); ++c) A(r, c) = bernoulli(rng, 0.6) ? std_normal(rng) : 0.0;
  for (Eigen::Index c = 0; c < A.cols(); ++c) A(0, c) = 1.0;
  return A.sparseView();
}

std::vector<double> binary_responses(std::size_t n, Rng& rng) {
  std::vector<double> y(n);
  for (auto& v : y) v = bernoulli(rng, 0.4) ? 1.0 : 0.0;
  return y;
}

BoidsPath small_path(std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(p * (p - 1), 0.0);
  BoidsIndex ix{p};
  for (std::size_t i = 0; i < p; ++i) x[ix.index(i, (i + 1) % p)] = 0.3;
  return simulate_boids(p, 0.2, 0.1, 20.0, 0.1, x, rng);
}

}  // namespace

TEST(Models, KappaFromPrior) {
  EXPECT_NEAR(kappa_from_prior(0.5, 1.0 / std::sqrt(2 * std::numbers::pi)), 0.398942, 1e-6);
  EXPECT_NEAR(kappa_from_prior(0.1, normal_density(0.0, 0.0, 100.0)), 0.0044327, 1e-7);
  EXPECT_LT(kappa_from_prior(1e-12, 1.0), 1e-11);
  EXPECT_THROW(kappa_from_prior(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(kappa_from_prior(1.0, 1.0), std::invalid_argument);
}

TEST(Models, GaussianBasics) {
  auto id = gaussian_target(make_gaussian_spec(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), {1, 1}));
  const std::vector<double> x{2, 0};
  EXPECT_DOUBLE_EQ(id->partial(x, 0), 2.0);
  Eigen::MatrixXd G(2, 2);
  G << 2, 1, 1, 2;
  auto t = gaussian_target(make_gaussian_spec(G, Eigen::VectorXd::Zero(2), {1, 1}));
  auto nb = t->neighborhood(0);
  std::sort(nb.begin(), nb.end());
  EXPECT_EQ(nb, (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(make_gaussian_spec(-G, Eigen::VectorXd::Zero(2), {1, 1}).validate(), std::invalid_argument);
}

TEST(Models, GaussianFiniteDifferences) {
  Rng rng(1);
  Eigen::MatrixXd B = Eigen::MatrixXd::Random(4, 4);
  Eigen::MatrixXd G = B * B.transpose() + Eigen::MatrixXd::Identity(4, 4);
  auto t = gaussian_target(make_gaussian_spec(G, Eigen::VectorXd::Random(4), {1, 1, 1, 1}));
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(4);
    for (auto& v : x) v = std_normal(rng);
    EXPECT_LT(max_rel_fd_error(*t, x), 1e-6);
  }
  // Identity precision: gradient is x - mu; zero at the mode.
  Eigen::VectorXd mu(2);
  mu << 0.5, -1.0;
  auto id = gaussian_target(make_gaussian_spec(Eigen::MatrixXd::Identity(2, 2), mu, {1, 1}));
  const std::vector<double> m{0.5, -1.0};
  const auto fd = finite_diff_grad(*id, m, 1e-5);
  EXPECT_NEAR(fd[0], 0.0, 1e-9);
  EXPECT_NEAR(fd[1], 0.0, 1e-9);
  const std::vector<double> y{1.5, 1.0};
  EXPECT_NEAR(finite_diff_grad(*id, y, 1e-5)[1], 2.0, 1e-8);
}

TEST(Models, GaussianExactRateAlongRays) {
  Eigen::MatrixXd G(3, 3);
  G << 2, 0.5, 0, 0.5, 1.5, -0.4, 0, -0.4, 1;
  Eigen::VectorXd mu(3);
  mu << 0.3, -0.2, 0.8;
  auto t = gaussian_target(make_gaussian_spec(G, mu, {1, 1, 1}));
  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    StickyState s({std_normal(rng), std_normal(rng), 0.0}, {1, -1, 1});
    s.frozen[2] = 1;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto b = t->zigzag_bound(s, i);
      ASSERT_TRUE(b.exact);
      const double tt = 2 * uniform_open(rng);
      auto moved = s;
      flow_in_place(moved, tt, LinearDynamics{});
      EXPECT_NEAR(std::max(s.v[i] * t->partial(moved.x, i), 0.0), b.value(tt), 1e-12);
    }
  }
}

TEST(Models, LogisticLipschitzExample) {
  Eigen::MatrixXd A(2, 2);
  A << 1, 2, 0, 1;
  auto t = logistic_target(A.sparseView(), {1.0, 0.0}, 100.0, 0.1);
  EXPECT_NEAR(t->lipschitz_constants()[0], 0.25 * std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(t->lipschitz_constants()[0], 0.559017, 1e-6);
}

TEST(Models, LogisticEstimatorUnbiased) {
  Rng rng(3);
  auto A = random_design(20, 2, rng);
  auto t = logistic_target(A, binary_responses(20, rng), 10.0, 0.3);
  const SubsamplingScheme& sub = *t->subsampling();
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x{2 * std_normal(rng), 2 * std_normal(rng)};
    if (rep == 0) x = sub.anchor();
    for (std::size_t i = 0; i < 2; ++i) {
      double avg = 0.0;
      const std::size_t n = sub.term_count(i);
      for (std::size_t k = 0; k < n; ++k) avg += sub.estimate(x, i, k);
      avg /= static_cast<double>(n);
      const double g = t->partial(x, i);
      EXPECT_NEAR(avg, g, 1e-10 * (1.0 + std::abs(g)));
    }
  }
}

TEST(Models, LogisticDegenerateDesignHasNoGradient) {
  // A column of zeros is rejected, so the degenerate case is checked on a tiny design with a flat prior.
  Eigen::MatrixXd A(1, 1);
  A << 1e-300;
  auto t = logistic_target(A.sparseView(), {0.0}, 1e300, 0.5);
  const std::vector<double> x{1.0};
  EXPECT_NEAR(t->partial(x, 0), 0.0, 1e-250);
}

TEST(Models, LogisticFiniteDifferences) {
  Rng rng(4);
  auto A = random_design(30, 4, rng);
  auto t = logistic_target(A, binary_responses(30, rng), 4.0, 0.2);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(4);
    for (auto& v : x) v = std_normal(rng);
    EXPECT_LT(max_rel_fd_error(*t, x), 1e-6);
  }
  const std::vector<double> zero(4, 0.0);
  EXPECT_NEAR(*t->potential(zero), 0.0, 1e-12);
}

TEST(Models, LogisticBoundsDominate) {
  Rng rng(5);
  auto A = random_design(25, 3, rng);
  auto t = logistic_target(A, binary_responses(25, rng), 4.0, 0.2);
  const SubsamplingScheme& sub = *t->subsampling();
  for (int rep = 0; rep < 300; ++rep) {
    StickyState s({std_normal(rng), std_normal(rng), std_normal(rng)},
                  {bernoulli(rng, 0.5) ? 1.0 : -1.0, bernoulli(rng, 0.5) ? 1.0 : -1.0, 1.0});
    for (std::size_t i = 0; i < 3; ++i) {
      const auto full = t->zigzag_bound(s, i);
      const auto sb = sub.sub_bound(s, i);
      for (int k = 0; k < 5; ++k) {
        const double tt = 3.0 * uniform_open(rng);
        auto moved = s;
        flow_in_place(moved, tt, LinearDynamics{});
        const double rate = std::max(s.v[i] * t->partial(moved.x, i), 0.0);
        EXPECT_LE(rate, full.value(tt) * (1 + 1e-9) + 1e-12);
        for (std::size_t j = 0; j < sub.term_count(i); ++j) {
          const double est = std::max(s.v[i] * sub.estimate(moved.x, i, j), 0.0);
          EXPECT_LE(est, sb.value(tt) * (1 + 1e-9) + 1e-12);
        }
        // A bound built after freezing another coordinate still dominates along the new flow.
        auto stuck = s;
        const std::size_t other = (i + 1) % 3;
        stuck.frozen[other] = 1;
        stuck.x[other] = 0.0;
        auto stuck_moved = stuck;
        flow_in_place(stuck_moved, tt, LinearDynamics{});
        const auto stuck_bound = sub.sub_bound(stuck, i);
        // The bound computed just before the freeze, when the coordinate sat at zero, stays valid.
        auto hitting = stuck;
        hitting.frozen[other] = 0;
        const auto before = sub.sub_bound(hitting, i);
        for (std::size_t j = 0; j < sub.term_count(i); ++j) {
          const double est = std::max(s.v[i] * sub.estimate(stuck_moved.x, i, j), 0.0);
          EXPECT_LE(est, stuck_bound.value(tt) * (1 + 1e-9) + 1e-12);
          EXPECT_LE(est, before.value(tt) * (1 + 1e-9) + 1e-12);
        }
      }
    }
  }
}

TEST(Models, LogisticDirectionalBoundDominates) {
  Rng rng(8);
  auto A = random_design(30, 4, rng);
  auto t = logistic_target(A, binary_responses(30, rng), 4.0, 0.2);
  for (int rep = 0; rep < 200; ++rep) {
    StickyState s({std_normal(rng), std_normal(rng), std_normal(rng), 0.0},
                  {std_normal(rng), std_normal(rng), std_normal(rng), std_normal(rng)});
    s.frozen[3] = static_cast<std::uint8_t>(rep % 2);
    const auto bound = t->directional_bound(s);
    ASSERT_TRUE(bound.has_value());
    for (int k = 0; k < 5; ++k) {
      const double tt = 3.0 * uniform_open(rng);
      auto moved = s;
      flow_in_place(moved, tt, LinearDynamics{});
      double rate = 0.0;
      for (std::size_t i = 0; i < 4; ++i)
        if (!s.frozen[i]) rate += s.v[i] * t->partial(moved.x, i);
      EXPECT_LE(std::max(rate, 0.0), bound->value(tt) * (1 + 1e-9) + 1e-12);
    }
  }
}

TEST(Models, GraphLaplacian) {
  const Eigen::MatrixXd L = Eigen::MatrixXd(graph_laplacian(2));
  Eigen::MatrixXd expect(4, 4);
  expect << 2, -1, -1, 0, -1, 2, 0, -1, -1, 0, 2, -1, 0, -1, -1, 2;
  EXPECT_EQ(L, expect);
  const Eigen::MatrixXd L5 = Eigen::MatrixXd(graph_laplacian(5));
  EXPECT_NEAR(L5.rowwise().sum().cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR((L5 - L5.transpose()).norm(), 0.0, 1e-15);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(L5).eigenvalues().minCoeff(), -1e-12);
}

TEST(Models, StructuredSparsityConstants) {
  auto t = structured_sparsity_target(3, std::vector<double>(9, 0.5), 0.5, 2.0, 0.1, 0.15);
  EXPECT_NEAR(t->lipschitz(), 18.1, 1e-12);
  EXPECT_NEAR(t->offset(), 4.2544, 1e-4);
  EXPECT_NEAR(t->horizon(), 0.23505, 1e-5);
}

TEST(Models, StructuredSparsityBoundDominates) {
  Rng rng(6);
  std::vector<double> img(16);
  for (auto& v : img) v = std_normal(rng);
  auto t = structured_sparsity_target(4, img, 0.5, 2.0, 0.1, 0.15);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> x(16), v(16);
    for (std::size_t k = 0; k < 16; ++k) {
      x[k] = 2 * std_normal(rng);
      v[k] = bernoulli(rng, 0.5) ? 1.0 : -1.0;
    }
    StickyState s(x, v);
    const std::size_t i = uniform_index(rng, 16);
    const double tt = t->horizon() * uniform_open(rng);
    const auto b = t->zigzag_bound(s, i);
    auto moved = s;
    flow_in_place(moved, tt, LinearDynamics{});
    EXPECT_GE(b.value(tt), std::max(v[i] * t->partial(moved.x, i), 0.0));
  }
  std::vector<double> x(16);
  for (auto& v : x) v = std_normal(rng);
  EXPECT_LT(max_rel_fd_error(*t, x), 1e-6);
}

TEST(Models, PrecisionGradientExample) {
  Eigen::MatrixXd Y(1, 2);
  Y << 1, 1;
  auto t = precision_target(Y, 10.0, Eigen::MatrixXd::Ones(1, 1), 0.2);
  const std::vector<double> x{1.0};
  EXPECT_NEAR(t->partial(x, 0), 0.0, 1e-15);
  EXPECT_EQ(t->kappa(0), kInf);
}

TEST(Models, PrecisionFiniteDifferencesAndBarrier) {
  Rng rng(7);
  Eigen::MatrixXd Y(3, 15);
  for (Eigen::Index r = 0; r < Y.rows(); ++r)
    for (Eigen::Index c = 0; c < Y.cols(); ++c) Y(r, c) = std_normal(rng);
  auto t = precision_target(Y, 10.0, 0.2);
  ASSERT_EQ(t->dim(), 6u);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(6);
    for (std::size_t k = 0; k < 6; ++k) x[k] = t->is_diagonal(k) ? 0.5 + std::abs(std_normal(rng)) : std_normal(rng);
    EXPECT_LT(max_rel_fd_error(*t, x, 1e-6), 1e-6);
  }
  std::vector<double> x{1.0, 0.1, 1.0, 0.0, 0.2, 1.0};
  double prev = *t->potential(x);
  for (double eps : {1e-1, 1e-3, 1e-6, 1e-10}) {
    x[t->index(1, 1)] = eps;
    const double cur = *t->potential(x);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
  EXPECT_GT(prev, 100.0);
  x[t->index(1, 1)] = 0.0;
  EXPECT_THROW(t->partial(x, t->index(1, 1)), std::domain_error);
}

TEST(Models, PrecisionBoundDominates) {
  Rng rng(8);
  Eigen::MatrixXd Y(3, 10);
  for (Eigen::Index r = 0; r < Y.rows(); ++r)
    for (Eigen::Index c = 0; c < Y.cols(); ++c) Y(r, c) = std_normal(rng);
  auto t = precision_target(Y, 10.0, 0.2);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> x(6), v(6);
    for (std::size_t k = 0; k < 6; ++k) {
      x[k] = t->is_diagonal(k) ? 0.2 + std::abs(std_normal(rng)) : std_normal(rng);
      v[k] = bernoulli(rng, 0.5) ? 1.0 : -1.0;
    }
    StickyState s(x, v);
    const std::size_t k = uniform_index(rng, 6);
    const auto b = t->zigzag_bound(s, k);
    double limit = 2.0;
    for (std::size_t m = 0; m < 6; ++m)
      if (t->is_diagonal(m) && v[m] < 0) limit = std::min(limit, x[m] / -v[m]);
    const double tt = 0.99 * limit * uniform_open(rng);
    auto moved = s;
    flow_in_place(moved, tt, LinearDynamics{});
    EXPECT_LE(std::max(v[k] * t->partial(moved.x, k), 0.0), b.value(tt) * (1 + 1e-9) + 1e-12);
  }
}

TEST(Models, BoidsDriftMatrix) {
  const std::vector<double> x{0.5, -0.3};
  const auto A = boids_drift_matrix(2, 0.2, x);
  Eigen::MatrixXd expect(2, 2);
  expect << -0.7, 0.5, -0.3, 0.1;
  EXPECT_NEAR((A - expect).norm(), 0.0, 1e-15);
}

TEST(Models, BoidsDeterministicDecay) {
  Rng rng(1);
  const auto path = simulate_boids(2, 0.2, 0.0, 10.0, 0.1, std::vector<double>(2, 0.0), rng);
  EXPECT_EQ(path.states.rows(), 101);
  for (Eigen::Index k = 1; k < path.states.rows(); ++k)
    for (Eigen::Index c = 0; c < 4; ++c)
      EXPECT_NEAR(path.states(k, c), path.states(k - 1, c) * (1.0 - 0.2 * 0.1), 1e-14);
  const auto odd = simulate_boids(2, 0.2, 0.0, 1.05, 0.1, std::vector<double>(2, 0.0), rng);
  EXPECT_EQ(odd.states.rows(), 11);
}

TEST(Models, BoidsGradient) {
  const auto path = small_path(3, 2);
  auto t = boids_target(path, 0.2, 0.1, 0.3, 50.0);
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(6);
    for (auto& v : x) v = 0.3 * std_normal(rng);
    EXPECT_LT(max_rel_fd_error(*t, x), 1e-6);
  }
  const std::vector<double> zero(6, 0.0);
  EXPECT_NEAR(*t->potential(zero), 0.0, 1e-12);
  for (std::size_t k = 0; k < 6; ++k)
    EXPECT_NEAR(t->partial(zero, k), -t->linear_term()[static_cast<Eigen::Index>(k)], 1e-12);
}

TEST(Models, BoidsQuadraticFormMatchesLikelihood) {
  // Direct left-point Girsanov sum with a Gaussian slab.
  const auto path = small_path(3, 5);
  const double lambda = 0.2, sigma = 0.1, s0 = 50.0;
  auto t = boids_target(path, lambda, sigma, 0.3, s0);
  auto direct = [&](const std::vector<double>& x) {
    const auto A = boids_drift_matrix(3, lambda, x);
    double ll = 0.0;
    for (Eigen::Index k = 0; k + 1 < path.states.rows(); ++k)
      for (int c = 0; c < 2; ++c) {
        const Eigen::VectorXd y = path.states.row(k).segment(3 * c, 3).transpose();
        const Eigen::VectorXd dy = (path.states.row(k + 1) - path.states.row(k)).segment(3 * c, 3).transpose();
        const Eigen::VectorXd b = A * y;
        ll += (b.dot(dy) - 0.5 * b.squaredNorm() * path.dt) / (sigma * sigma);
      }
    double prior = 0.0;
    for (double v : x) prior += v * v / (2 * s0);
    return -ll + prior;
  };
  Rng rng(9);
  const std::vector<double> zero(6, 0.0);
  const double base = direct(zero);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x(6);
    for (auto& v : x) v = 0.3 * std_normal(rng);
    EXPECT_NEAR(*t->potential(x), direct(x) - base, 1e-8 * (1.0 + std::abs(direct(x) - base)));
  }
}

TEST(Models, BoidsPermutationSymmetry) {
  const auto path = small_path(3, 4);
  // Relabel agents with pi = (1 2 0): new agent pi[i] is old agent i.
  const std::size_t pi[3] = {1, 2, 0};
  BoidsPath perm = path;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      perm.states.col(static_cast<Eigen::Index>(3 * c + pi[i])) = path.states.col(static_cast<Eigen::Index>(3 * c + i));
  auto t = boids_target(path, 0.2, 0.1, 0.3, 50.0);
  auto tp = boids_target(perm, 0.2, 0.1, 0.3, 50.0);
  BoidsIndex ix{3};
  Rng rng(1);
  std::vector<double> x(6), xp(6);
  for (auto& v : x) v = 0.3 * std_normal(rng);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) xp[ix.index(pi[i], pi[j])] = x[ix.index(i, j)];
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_NEAR(tp->partial(xp, ix.index(pi[i], pi[j])), t->partial(x, ix.index(i, j)), 1e-9);
      }
}

TEST(Models, MixtureGradientAndBounds) {
  Eigen::VectorXd m1(2), m2(2);
  m1 << 1.0, 0.5;
  m2 << -1.0, -0.5;
  Eigen::MatrixXd P(2, 2);
  P << 1.5, 0.3, 0.3, 1.0;
  MixtureTarget t({m1, m2}, {0.6, 0.4}, P, {0.8, 0.8});
  Rng rng(10);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> x{2 * std_normal(rng), 2 * std_normal(rng)};
    if (rep < 20) {
      EXPECT_LT(max_rel_fd_error(t, x), 1e-6);
    }
    StickyState s(x, {bernoulli(rng, 0.5) ? 1.0 : -1.0, bernoulli(rng, 0.5) ? 1.0 : -1.0});
    const double tt = 3 * uniform_open(rng);
    auto moved = s;
    flow_in_place(moved, tt, LinearDynamics{});
    for (std::size_t i = 0; i < 2; ++i)
      EXPECT_LE(std::max(s.v[i] * t.partial(moved.x, i), 0.0), t.zigzag_bound(s, i).value(tt) * (1 + 1e-9));
    const auto g = t.gradient_vec(moved.x);
    const double dir = std::max(s.v[0] * g[0] + s.v[1] * g[1], 0.0);
    EXPECT_LE(dir, t.directional_bound(s)->value(tt) * (1 + 1e-9) + 1e-12);
  }
}
