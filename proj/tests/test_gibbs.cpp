#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "quadrature_oracle.hpp"
#include "sticky/sticky.hpp"

using namespace sticky;

namespace {

const double kAtom1d = 1.0 / (1.0 + std::sqrt(2.0 * std::numbers::pi));

GaussianSpec spec_of(const Eigen::MatrixXd& G, const Eigen::VectorXd& mu, std::vector<double> kappa) {
  return make_gaussian_spec(G, mu, std::move(kappa));
}

GaussianSpec standard(std::size_t d, double kappa) {
  const auto n = static_cast<Eigen::Index>(d);
  return spec_of(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), std::vector<double>(d, kappa));
}

Membership mask_membership(unsigned mask, std::size_t d) {
  Membership a(d, 0);
  for (std::size_t i = 0; i < d; ++i) a[i] = (mask >> i) & 1u;
  return a;
}

unsigned membership_mask(const Membership& a) {
  unsigned m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m |= static_cast<unsigned>(a[i] != 0) << i;
  return m;
}

}  // namespace

TEST(Gibbs, ConditionalGaussianExamples) {
  Eigen::MatrixXd G(2, 2);
  G << 2, 1, 1, 2;
  auto c = conditional_gaussian(spec_of(G, Eigen::VectorXd::Zero(2), {1, 1}), {1, 0});
  EXPECT_NEAR(c.mean[0], 0.0, 1e-15);
  EXPECT_NEAR(c.precision(0, 0), 2.0, 1e-15);

  Eigen::VectorXd mu(2);
  mu << 0.7, -3.0;
  c = conditional_gaussian(spec_of(Eigen::MatrixXd::Identity(2, 2), mu, {1, 1}), {1, 0});
  EXPECT_NEAR(c.mean[0], 0.7, 1e-15);
  EXPECT_NEAR(c.precision(0, 0), 1.0, 1e-15);

  c = conditional_gaussian(spec_of(G, Eigen::VectorXd::Ones(2), {1, 1}), {1, 0});
  EXPECT_NEAR(c.mean[0], 1.5, 1e-14);
  EXPECT_NEAR(c.precision(0, 0), 2.0, 1e-15);

  EXPECT_THROW(conditional_gaussian(spec_of(G, Eigen::VectorXd::Zero(2), {1, 1}), {0, 0}), std::invalid_argument);
}

TEST(Gibbs, BayesFactorExamples) {
  const double s2pi = std::sqrt(2.0 * std::numbers::pi);
  EXPECT_NEAR(bayes_factor(standard(1, 2.0), {0}, 0), 2.0 * s2pi, 1e-12);
  EXPECT_NEAR(bayes_factor(standard(1, 2.0), {0}, 0), 5.01326, 1e-5);
  EXPECT_NEAR(bayes_factor(standard(2, 1.0), {0, 0}, 0), s2pi, 1e-12);
  EXPECT_NEAR(bayes_factor(standard(2, 1.0), {0, 0}, 0), 2.50663, 1e-5);
  // Re-inclusion of a coordinate already in the model uses the same neighbour pair.
  EXPECT_NEAR(bayes_factor(standard(2, 1.0), {1, 0}, 0), s2pi, 1e-12);
}

TEST(Gibbs, BayesFactorZeroMeanDeterminantRatio) {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd B(3, 3);
    for (Eigen::Index r = 0; r < 3; ++r)
      for (Eigen::Index c = 0; c < 3; ++c) B(r, c) = std_normal(rng);
    const Eigen::MatrixXd G = B * B.transpose() + Eigen::MatrixXd::Identity(3, 3);
    const double kappa = 0.3 + uniform_open(rng);
    const auto spec = spec_of(G, Eigen::VectorXd::Zero(3), {kappa, kappa, kappa});
    const unsigned mask = static_cast<unsigned>(uniform_index(rng, 8));
    const std::size_t j = uniform_index(rng, 3);
    const auto alpha = mask_membership(mask, 3);
    auto block_det = [&](const Membership& a) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < 3; ++i)
        if (a[static_cast<std::size_t>(i)]) idx.push_back(i);
      Eigen::MatrixXd M(idx.size(), idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < idx.size(); ++c) M(r, c) = G(idx[r], idx[c]);
      return idx.empty() ? 1.0 : M.determinant();
    };
    const double expect = kappa * std::sqrt(2.0 * std::numbers::pi) *
                          std::sqrt(block_det(with_coord(alpha, j, false)) / block_det(with_coord(alpha, j, true)));
    EXPECT_NEAR(bayes_factor(spec, alpha, j), expect, 1e-10 * expect);
  }
}

TEST(Gibbs, BayesFactorMatchesQuadrature) {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + static_cast<int>(uniform_index(rng, 3));
    Eigen::MatrixXd B(d, d);
    Eigen::VectorXd mu(d);
    for (int r = 0; r < d; ++r) {
      mu[r] = std_normal(rng);
      for (int c = 0; c < d; ++c) B(r, c) = 0.6 * std_normal(rng);
    }
    const Eigen::MatrixXd G = B * B.transpose() + Eigen::MatrixXd::Identity(d, d);
    const double kappa = 0.2 + uniform_open(rng);
    const auto spec = spec_of(G, mu, std::vector<double>(static_cast<std::size_t>(d), kappa));
    const unsigned mask = static_cast<unsigned>(uniform_index(rng, 1u << d));
    const std::size_t j = uniform_index(rng, static_cast<std::size_t>(d));
    const auto alpha = mask_membership(mask, static_cast<std::size_t>(d));
    const unsigned with = mask | (1u << j), without = mask & ~(1u << j);
    const double expect = kappa * oracle::integrate_model(G, mu, oracle::members(with, d)) /
                          oracle::integrate_model(G, mu, oracle::members(without, d));
    const double got = bayes_factor(spec, alpha, j);
    EXPECT_NEAR(got, expect, 1e-6 * expect) << "d=" << d << " mask=" << mask << " j=" << j;
  }
}

TEST(Gibbs, HalfInclusionWhenBayesFactorIsOne) {
  const auto spec = standard(1, 1.0 / std::sqrt(2.0 * std::numbers::pi));
  EXPECT_NEAR(bayes_factor(spec, {0}, 0), 1.0, 1e-14);
  GibbsOptions opt;
  opt.iterations = 40000;
  opt.seed = 3;
  auto chain = run_gibbs(GibbsModel::from_spec(spec), null_model_state(1), opt);
  const double p = static_cast<double>(chain.inclusion_counts[0]) / 40000.0;
  EXPECT_NEAR(p, 0.5, 3.0 * std::sqrt(0.25 / 40000.0) + 1e-3);
}

TEST(Gibbs, EmptyModelKeepsZeroVector) {
  // kappa = 0 forbids inclusion, so every state is the null model.
  GibbsOptions opt;
  opt.iterations = 100;
  auto chain = run_gibbs(GibbsModel::from_spec(standard(3, 0.0)), null_model_state(3), opt);
  for (const auto& s : chain.states) {
    EXPECT_EQ(s.model_size(), 0u);
    EXPECT_EQ(s.x.squaredNorm(), 0.0);
  }
  EXPECT_EQ(chain.null_count, 100u);
}

TEST(Gibbs, LongRunOneDimension) {
  auto chain = run_gibbs(standard(1, 1.0), null_model_state(1), 100000, 5);
  EXPECT_NEAR(static_cast<double>(chain.null_count) / 1e5, kAtom1d, 0.02);
  EXPECT_NEAR(kAtom1d, 0.2852, 1e-4);
}

TEST(Gibbs, TwoDimensionalInclusion) {
  auto chain = run_gibbs(standard(2, 1.0), null_model_state(2), 100000, 6);
  for (std::size_t i = 0; i < 2; ++i)
    EXPECT_NEAR(static_cast<double>(chain.inclusion_counts[i]) / 1e5, 1.0 - kAtom1d, 0.02);
}

TEST(Gibbs, CorrelatedModelPosteriorsMatchQuadrature) {
  Eigen::MatrixXd G(2, 2);
  G << 2, 1, 1, 2;
  Eigen::VectorXd mu(2);
  mu << 1, -1;
  const auto truth = oracle::model_posteriors(G, mu, {1, 1});
  auto chain = run_gibbs(spec_of(G, mu, {1, 1}), null_model_state(2), 100000, 7);
  std::vector<double> freq(4, 0.0);
  for (std::size_t k = 1; k < chain.states.size(); ++k) freq[membership_mask(chain.states[k].alpha)] += 1e-5;
  for (unsigned m = 0; m < 4; ++m) EXPECT_NEAR(freq[m], truth[m], 0.02) << "model " << m;
}

TEST(Gibbs, ChainCoefficientsMatchConditional) {
  Eigen::MatrixXd G(2, 2);
  G << 2, 1, 1, 2;
  auto chain = run_gibbs(spec_of(G, Eigen::VectorXd::Ones(2), {1, 1}), null_model_state(2), 50000, 8);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : chain.states) {
    for (std::size_t i = 0; i < 2; ++i)
      if (!s.alpha[i]) {
        EXPECT_EQ(s.x[static_cast<Eigen::Index>(i)], 0.0);
      }
    if (s.alpha == Membership{1, 0}) {
      sum += s.x[0];
      sq += s.x[0] * s.x[0];
      ++n;
    }
  }
  ASSERT_GT(n, 1000u);
  const double mean = sum / static_cast<double>(n);
  EXPECT_NEAR(mean, 1.5, 4.0 * std::sqrt(0.5 / static_cast<double>(n)));
  EXPECT_NEAR(sq / static_cast<double>(n) - mean * mean, 0.5, 0.05);
}

TEST(Gibbs, DetailedBalanceOneDimension) {
  Eigen::MatrixXd G(1, 1);
  G << 2.0;
  Eigen::VectorXd mu(1);
  mu << 0.5;
  const auto spec = spec_of(G, mu, {0.3});
  const double B = 0.3 * oracle::integrate_model(G, mu, {0}) / oracle::integrate_model(G, mu, {});
  EXPECT_NEAR(bayes_factor(spec, {0}, 0), B, 1e-8 * B);
  const std::uint64_t n = 50000;
  auto chain = run_gibbs(spec, null_model_state(1), n, 9);
  const double p = B / (1.0 + B);
  const double freq = static_cast<double>(chain.inclusion_counts[0]) / static_cast<double>(n);
  EXPECT_NEAR(freq, p, 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)));
}

TEST(Gibbs, SparseAndDenseAgree) {
  const auto L = graph_laplacian(4);
  Eigen::MatrixXd G = Eigen::MatrixXd(L) + 0.5 * Eigen::MatrixXd::Identity(16, 16);
  Rng rng(13);
  Eigen::VectorXd mu(16);
  for (auto& v : mu) v = std_normal(rng);
  const auto model = GibbsModel::from_spec(spec_of(G, mu, std::vector<double>(16, 0.4)));
  for (int rep = 0; rep < 50; ++rep) {
    Membership a(16);
    for (auto& v : a) v = bernoulli(rng, 0.5);
    const std::size_t j = uniform_index(rng, 16);
    const double dense = log_bayes_factor(model, a, j, false), sparse = log_bayes_factor(model, a, j, true);
    EXPECT_NEAR(dense, sparse, 1e-10 * (1.0 + std::abs(dense)));
    if (std::none_of(a.begin(), a.end(), [](auto v) { return v != 0; })) continue;
    const BlockFactor fd(model, a, false), fs(model, a, true);
    EXPECT_NEAR((fd.mean() - fs.mean()).norm(), 0.0, 1e-10 * (1.0 + fd.mean().norm()));
  }
  // Sparse chains sample the same law.
  GibbsOptions opt;
  opt.iterations = 20000;
  opt.sparse = true;
  auto cs = run_gibbs(model, null_model_state(16), opt);
  opt.sparse = false;
  auto cd = run_gibbs(model, null_model_state(16), opt);
  for (std::size_t i = 0; i < 16; ++i) {
    // Membership moves draw the same uniforms, so inclusion paths coincide exactly.
    EXPECT_EQ(cs.inclusion_counts[i], cd.inclusion_counts[i]);
  }
}

TEST(Gibbs, ChainLengthAndDeterminism) {
  GibbsOptions opt;
  opt.iterations = 0;
  auto empty = run_gibbs(GibbsModel::from_spec(standard(2, 1.0)), null_model_state(2), opt);
  EXPECT_EQ(empty.states.size(), 1u);
  EXPECT_EQ(empty.iterations, 0u);
  auto a = run_gibbs(standard(3, 0.5), null_model_state(3), 500, 21);
  auto b = run_gibbs(standard(3, 0.5), null_model_state(3), 500, 21);
  ASSERT_EQ(a.states.size(), 501u);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    EXPECT_EQ(a.states[k].alpha, b.states[k].alpha);
    EXPECT_EQ(a.states[k].x, b.states[k].x);
  }
}

TEST(Gibbs, SupportPredicateIsRespected) {
  GibbsOptions opt;
  opt.iterations = 5000;
  opt.support = [](const Membership& a) { return !(a[0] && a[1]); };
  auto chain = run_gibbs(GibbsModel::from_spec(standard(2, 2.0)), null_model_state(2), opt);
  for (const auto& s : chain.states) EXPECT_FALSE(s.alpha[0] && s.alpha[1]);
}

TEST(Gibbs, ObserverStopsChain) {
  GibbsOptions opt;
  opt.iterations = 1000;
  auto chain = run_gibbs(GibbsModel::from_spec(standard(2, 1.0)), null_model_state(2), opt,
                         [](std::uint64_t it, const GibbsState&) { return it < 10; });
  EXPECT_EQ(chain.iterations, 10u);
  EXPECT_EQ(chain.states.size(), 11u);
}

TEST(Gibbs, ChainCsv) {
  GibbsChain chain;
  chain.inclusion_counts.assign(2, 0);
  chain.states.push_back(null_model_state(2));
  GibbsState s{{1, 0}, Eigen::VectorXd::Zero(2)};
  s.x[0] = 0.5;
  chain.states.push_back(s);
  std::ostringstream os;
  write_chain_csv(os, chain);
  EXPECT_EQ(os.str(), "iter,alpha,x0,x1\n0,0,0,0\n1,1,0.5,0\n");
  Membership big(70, 0);
  big[3] = big[65] = 1;
  EXPECT_EQ(alpha_string(big), "3;65");
}

TEST(Gibbs, InvalidInputs) {
  EXPECT_THROW(bayes_factor(standard(2, 1.0), {0, 0}, 5), std::out_of_range);
  GibbsState bad{{0, 0}, Eigen::VectorXd::Ones(2)};
  EXPECT_THROW(run_gibbs(standard(2, 1.0), bad, 10, 1), std::invalid_argument);
}
