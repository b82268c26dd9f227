#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sticky/models/boids.hpp"
#include "sticky/random.hpp"

namespace sticky::bench {

// Heart-shaped intensity on an n x n grid: x = 5 max(1 - h, 0) with
// h(u) = u1^2 + (5 u2 / 4 - sqrt|u1|)^2, pixel (r, c) centred at u0 + (r, c) * 9 / n.
inline std::vector<double> heart_truth(std::size_t n) {
  if (n < 2) throw std::invalid_argument("heart_truth: need n >= 2");
  const double step = 9.0 / static_cast<double>(n);
  std::vector<double> x(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double u1 = -4.5 + static_cast<double>(r) * step;
      const double u2 = -4.1 + static_cast<double>(c) * step;
      const double a = 1.25 * u2 - std::sqrt(std::abs(u1));
      const double h = u1 * u1 + a * a;
      x[r * n + c] = 5.0 * std::max(1.0 - h, 0.0);
    }
  return x;
}

struct ImageData {
  std::size_t n = 0;
  std::vector<double> truth, observed;
};

template <class G>
ImageData simulate_heart(std::size_t n, double sigma_sq, G& rng) {
  ImageData d{n, heart_truth(n), {}};
  const double sd = std::sqrt(sigma_sq);
  d.observed.resize(d.truth.size());
  for (std::size_t k = 0; k < d.truth.size(); ++k) d.observed[k] = d.truth[k] + sd * std_normal(rng);
  return d;
}

struct LogisticDesign {
  std::size_t levels = 30;      // levels of each of the two categorical features
  std::size_t continuous = 5;   // N(0, 0.1^2) features
  // Intercept plus treatment-coded main effects and interactions (full rank).
  // Without it every level and every cell gets a dummy.
  bool reference_coding = false;
  double interaction_scale = 0.3;
  double nonzero_fraction = 0.1;
  double effect_sd = 5.0;

  std::size_t main_columns() const { return reference_coding ? levels - 1 : levels; }
  std::size_t dim() const {
    return (reference_coding ? 1 : 0) + 2 * main_columns() + main_columns() * main_columns() + continuous;
  }
};

struct LogisticData {
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  std::vector<double> y;
  std::vector<double> truth;
};

// Rows: optional intercept, dummies of both categorical features, their
// interaction dummy scaled by interaction_scale, then the continuous features.
template <class G>
LogisticData simulate_logistic(const LogisticDesign& des, std::size_t N, G& rng) {
  if (des.levels < 2) throw std::invalid_argument("simulate_logistic: need at least two levels");
  const std::size_t d = des.dim(), m = des.main_columns();
  LogisticData out;
  out.truth.assign(d, 0.0);
  for (auto& x : out.truth)
    if (bernoulli(rng, des.nonzero_fraction)) x = des.effect_sd * std_normal(rng);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(N * (3 + des.continuous));
  out.y.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    const std::size_t l1 = uniform_index(rng, des.levels), l2 = uniform_index(rng, des.levels);
    double eta = 0.0;
    auto put = [&](std::size_t col, double v) {
      trip.emplace_back(row, static_cast<Eigen::Index>(col), v);
      eta += v * out.truth[col];
    };
    const std::size_t off = des.reference_coding ? 1 : 0;
    const std::size_t base = off;
    if (off) put(0, 1.0);
    if (l1 >= off) put(base + l1 - off, 1.0);
    if (l2 >= off) put(base + m + l2 - off, 1.0);
    if (l1 >= off && l2 >= off) put(base + 2 * m + (l1 - off) * m + (l2 - off), des.interaction_scale);
    for (std::size_t c = 0; c < des.continuous; ++c) put(base + 2 * m + m * m + c, 0.1 * std_normal(rng));
    out.y[j] = bernoulli(rng, 1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
  }
  out.A.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d));
  out.A.setFromTriplets(trip.begin(), trip.end());
  out.A.makeCompressed();
  return out;
}

// Tridiagonal precision with diagonal (0.5, 1, ..., 1, 0.5) and off-diagonal -0.3.
inline Eigen::MatrixXd tridiagonal_precision(std::size_t p) {
  if (p < 2) throw std::invalid_argument("tridiagonal_precision: need p >= 2");
  const auto P = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd O = Eigen::MatrixXd::Zero(P, P);
  for (Eigen::Index i = 0; i < P; ++i) {
    O(i, i) = (i == 0 || i == P - 1) ? 0.5 : 1.0;
    if (i + 1 < P) O(i, i + 1) = O(i + 1, i) = -0.3;
  }
  return O;
}

struct PrecisionData {
  Eigen::MatrixXd Y;      // p x N, one observation per column
  Eigen::MatrixXd truth;  // lower-triangular X with XX' the precision
};

template <class G>
PrecisionData simulate_precision(std::size_t p, std::size_t N, G& rng) {
  const Eigen::MatrixXd O = tridiagonal_precision(p);
  Eigen::LLT<Eigen::MatrixXd> llt(O);
  if (llt.info() != Eigen::Success) throw std::runtime_error("simulate_precision: truth is not positive definite");
  PrecisionData d;
  d.truth = llt.matrixL();
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(N));
  for (Eigen::Index c = 0; c < Z.cols(); ++c)
    for (Eigen::Index r = 0; r < Z.rows(); ++r) Z(r, c) = std_normal(rng);
  // Y = X'^{-1} Z has covariance (XX')^{-1}.
  d.Y = llt.matrixU().solve(Z);
  return d;
}

// Each agent follows one other agent and avoids another; the drift is
// redrawn until it is stable.
template <class G>
std::vector<double> boids_truth(std::size_t p, double lambda, G& rng) {
  if (p < 3) throw std::invalid_argument("boids_truth: need at least three agents");
  BoidsIndex ix{p};
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> x(ix.dim(), 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      std::size_t a = uniform_index(rng, p - 1), b = uniform_index(rng, p - 2);
      a = a >= i ? a + 1 : a;
      // b ranges over agents other than i and a.
      std::size_t lo = std::min(i, a), hi = std::max(i, a);
      if (b >= lo) ++b;
      if (b >= hi) ++b;
      x[ix.index(i, a)] = 0.3 + 0.4 * uniform_open(rng);
      x[ix.index(i, b)] = -(0.02 + 0.06 * uniform_open(rng));
    }
    const Eigen::MatrixXd A = boids_drift_matrix(p, lambda, x);
    if (A.eigenvalues().real().maxCoeff() < 0.0) return x;
  }
  throw std::runtime_error("boids_truth: could not draw a stable interaction matrix");
}

inline double nonzero_fraction(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  std::size_t n = 0;
  for (double v : x) n += v != 0.0;
  return static_cast<double>(n) / static_cast<double>(x.size());
}

}  // namespace sticky::bench
