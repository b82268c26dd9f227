#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sticky/models/gaussian.hpp"
#include "sticky/random.hpp"

namespace sticky {

// Interaction parameters x_ij (i != j) of p agents, row-major with the
// diagonal skipped: k = i (p - 1) + (j < i ? j : j - 1).
struct BoidsIndex {
  std::size_t p;
  std::size_t dim() const { return p * (p - 1); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * (p - 1) + (j < i ? j : j - 1); }
  std::size_t agent(std::size_t k) const { return k / (p - 1); }
  std::size_t other(std::size_t k) const {
    const std::size_t i = agent(k), r = k % (p - 1);
    return r < i ? r : r + 1;
  }
};

// A_ii = -lambda - sum_{j != i} x_ij, A_ij = x_ij.
inline Eigen::MatrixXd boids_drift_matrix(std::size_t p, double lambda, std::span<const double> x) {
  BoidsIndex ix{p};
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      const double xij = x[ix.index(i, j)];
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xij;
      row += xij;
    }
    A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = -lambda - row;
  }
  return A;
}

// Path: one row per grid point, columns (first coordinates of all agents, second coordinates of all agents).
struct BoidsPath {
  std::size_t agents = 0;
  double dt = 0.0;
  Eigen::MatrixXd states;
};

// Euler-Maruyama for dY = C(x) Y dt + sigma dW with C = diag(A, A).
template <class G>
BoidsPath simulate_boids(std::size_t p, double lambda, double sigma, double T, double dt, std::span<const double> x_true,
                         G& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_boids: dt must be positive");
  if (p < 2) throw std::invalid_argument("simulate_boids: need at least two agents");
  if (x_true.size() != p * (p - 1)) throw std::invalid_argument("simulate_boids: interaction vector has wrong length");
  const auto steps = static_cast<Eigen::Index>(std::floor(T / dt + 1e-9));
  const auto P = static_cast<Eigen::Index>(p);
  const Eigen::MatrixXd A = boids_drift_matrix(p, lambda, x_true);
  BoidsPath path{p, dt, Eigen::MatrixXd(steps + 1, 2 * P)};
  Eigen::VectorXd y(2 * P);
  for (Eigen::Index k = 0; k < 2 * P; ++k) y[k] = std_normal(rng);
  path.states.row(0) = y.transpose();
  const double sd = sigma * std::sqrt(dt);
  for (Eigen::Index s = 0; s < steps; ++s) {
    Eigen::VectorXd drift(2 * P);
    drift.head(P) = A * y.head(P);
    drift.tail(P) = A * y.tail(P);
    y += drift * dt;
    if (sd > 0.0)
      for (Eigen::Index k = 0; k < 2 * P; ++k) y[k] += sd * std_normal(rng);
    path.states.row(s + 1) = y.transpose();
  }
  return path;
}

// Negative Girsanov log-likelihood (left-point sums) plus a Gaussian slab;
// quadratic in x, so it is handled as a canonical-form Gaussian with Psi(0) = 0.
class BoidsTarget : public GaussianTarget {
 public:
  BoidsTarget(const BoidsPath& path, double lambda, double sigma, double w, double sigma0_sq)
      : BoidsTarget(assemble(path, lambda, sigma, w, sigma0_sq)) {}

  std::optional<double> potential(std::span<const double> x) const override {
    double q = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      double row = 0.0;
      for (SparseMatrix::InnerIterator it(spec_.Gamma, static_cast<Eigen::Index>(i)); it; ++it)
        row += it.value() * x[static_cast<std::size_t>(it.col())];
      q += x[i] * (0.5 * row - h_[static_cast<Eigen::Index>(i)]);
    }
    return q;
  }

  std::string name() const override { return "boids"; }

 private:
  struct Assembled {
    GaussianSpec spec;
    Eigen::VectorXd h;
  };

  explicit BoidsTarget(Assembled a) : GaussianTarget(std::move(a.spec), std::move(a.h)) {}

  static Assembled assemble(const BoidsPath& path, double lambda, double sigma, double w, double sigma0_sq) {
    const std::size_t p = path.agents;
    if (p < 2) throw std::invalid_argument("boids_target: need at least two agents");
    if (path.states.cols() != static_cast<Eigen::Index>(2 * p)) throw std::invalid_argument("boids_target: path width");
    if (path.states.rows() < 2) throw std::invalid_argument("boids_target: path needs at least two states");
    if (!(sigma > 0.0) || !(path.dt > 0.0)) throw std::invalid_argument("boids_target: sigma and dt must be positive");
    BoidsIndex ix{p};
    const std::size_t d = ix.dim();
    const std::size_t m = p - 1;
    const double dt = path.dt;
    const double inv_s2 = 1.0 / (sigma * sigma);
    const auto P = static_cast<Eigen::Index>(p);

    // Per-agent blocks of Phi' Phi and Phi' (dY - c0 dt).
    std::vector<Eigen::MatrixXd> blocks(p, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)));
    Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    Eigen::VectorXd delta(static_cast<Eigen::Index>(m));
    for (Eigen::Index s = 0; s + 1 < path.states.rows(); ++s) {
      const auto y = path.states.row(s);
      const auto dy = path.states.row(s + 1) - y;
      for (std::size_t i = 0; i < p; ++i) {
        auto& B = blocks[i];
        for (Eigen::Index c = 0; c < 2; ++c) {
          const Eigen::Index off = c * P;
          const double ui = y[off + static_cast<Eigen::Index>(i)];
          const double resid = dy[off + static_cast<Eigen::Index>(i)] + lambda * ui * dt;
          for (std::size_t r = 0; r < m; ++r) {
            const std::size_t j = r < i ? r : r + 1;
            delta[static_cast<Eigen::Index>(r)] = y[off + static_cast<Eigen::Index>(j)] - ui;
          }
          B.noalias() += dt * delta * delta.transpose();
          h.segment(static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(m)) += resid * delta;
        }
      }
    }
    h *= inv_s2;
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
          double val = inv_s2 * blocks[i](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
          if (a == b) val += 1.0 / sigma0_sq;
          trip.emplace_back(static_cast<Eigen::Index>(i * m + a), static_cast<Eigen::Index>(i * m + b), val);
        }
    SparseMatrix Q(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Q.setFromTriplets(trip.begin(), trip.end());
    Q.makeCompressed();
    Eigen::SparseMatrix<double> Qc = Q;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Qc);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("boids_target: quadratic form is not positive definite");
    Eigen::VectorXd mu = llt.solve(h);
    const double kappa = kappa_from_prior(w, normal_density(0.0, 0.0, sigma0_sq));
    return Assembled{GaussianSpec{mu, Q, std::vector<double>(d, kappa)}, h};
  }
};

inline std::unique_ptr<BoidsTarget> boids_target(const BoidsPath& path, double lambda, double sigma, double w,
                                                 double sigma0_sq) {
  return std::make_unique<BoidsTarget>(path, lambda, sigma, w, sigma0_sq);
}

}  // namespace sticky
