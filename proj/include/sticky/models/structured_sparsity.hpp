#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sticky/models/gaussian.hpp"

namespace sticky {

// Graph Laplacian of the 4-neighbour n x n lattice, pixels in row-major order.
inline SparseMatrix graph_laplacian(std::size_t n) {
  if (n < 1) throw std::invalid_argument("graph_laplacian: empty lattice");
  const auto N = static_cast<Eigen::Index>(n * n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N) * 5);
  auto idx = [n](std::size_t r, std::size_t c) { return static_cast<Eigen::Index>(r * n + c); };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double deg = 0.0;
      auto link = [&](std::size_t r2, std::size_t c2) {
        trip.emplace_back(idx(r, c), idx(r2, c2), -1.0);
        deg += 1.0;
      };
      if (r > 0) link(r - 1, c);
      if (c > 0) link(r, c - 1);
      if (c + 1 < n) link(r, c + 1);
      if (r + 1 < n) link(r + 1, c);
      trip.emplace_back(idx(r, c), idx(r, c), deg);
    }
  }
  SparseMatrix L(N, N);
  L.setFromTriplets(trip.begin(), trip.end());
  L.makeCompressed();
  return L;
}

// Gaussian denoising with a lattice smoothness prior:
//   Psi(x) = |x - Y|^2 / (2 sigma^2) + x' (c1 L + c2 I) x / 2
class StructuredSparsityTarget : public GaussianTarget {
 public:
  StructuredSparsityTarget(std::size_t n, std::vector<double> image, double sigma_sq, double c1, double c2, double kappa)
      : GaussianTarget(build_spec(n, image, sigma_sq, c1, c2, kappa), linear_term_of(image, sigma_sq)),
        n_(n),
        image_(std::move(image)),
        sigma_sq_(sigma_sq),
        c1_(c1),
        c2_(c2) {
    lipschitz_ = c2 + 8.0 * c1 + 1.0 / sigma_sq;
    c_ = std::sqrt(lipschitz_);
  }

  std::size_t side() const { return n_; }
  double lipschitz() const { return lipschitz_; }
  double offset() const { return c_; }
  double horizon() const { return 1.0 / c_; }

  std::optional<double> potential(std::span<const double> x) const override {
    double lik = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - image_[i];
      lik += r * r;
    }
    lik *= 0.5 / sigma_sq_;
    const double diag = c2_;
    double prior = 0.0;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t c = 0; c < n_; ++c) {
        const double xi = x[r * n_ + c];
        prior += diag * xi * xi;
        if (c + 1 < n_) prior += c1_ * (xi - x[r * n_ + c + 1]) * (xi - x[r * n_ + c + 1]);
        if (r + 1 < n_) prior += c1_ * (xi - x[(r + 1) * n_ + c]) * (xi - x[(r + 1) * n_ + c]);
      }
    return lik + 0.5 * prior;
  }

  // Constant-slope bound: |v_i (Q v)_i| <= L for unit speeds, valid on [0, 1/c].
  RateBound zigzag_bound(const StickyState& s, std::size_t i) const override {
    RateBound r;
    r.affine = {c_ + s.v[i] * partial(s.x, i), 0.0, 1.0 / c_};
    return r;
  }

  std::string name() const override { return "structured_sparsity"; }

 private:
  static Eigen::VectorXd linear_term_of(const std::vector<double>& image, double sigma_sq) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(image.size()));
    for (std::size_t k = 0; k < image.size(); ++k) h[static_cast<Eigen::Index>(k)] = image[k] / sigma_sq;
    return h;
  }

  static GaussianSpec build_spec(std::size_t n, const std::vector<double>& image, double sigma_sq, double c1, double c2,
                                 double kappa) {
    if (n < 2) throw std::invalid_argument("structured_sparsity_target: lattice side must be at least 2");
    if (image.size() != n * n) throw std::invalid_argument("structured_sparsity_target: image has wrong size");
    if (!(sigma_sq > 0.0) || c1 < 0.0 || c2 < 0.0)
      throw std::invalid_argument("structured_sparsity_target: invalid noise or prior parameters");
    SparseMatrix Q = c1 * graph_laplacian(n);
    for (Eigen::Index k = 0; k < Q.rows(); ++k) Q.coeffRef(k, k) += c2 + 1.0 / sigma_sq;
    Q.makeCompressed();
    Eigen::VectorXd h = linear_term_of(image, sigma_sq);
    Eigen::SparseMatrix<double> Qc = Q;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Qc);
    Eigen::VectorXd mu = llt.solve(h);
    return GaussianSpec{mu, Q, std::vector<double>(n * n, kappa)};
  }

  std::size_t n_;
  std::vector<double> image_;
  double sigma_sq_, c1_, c2_;
  double lipschitz_ = 0.0;
  double c_ = 0.0;
};

inline std::unique_ptr<StructuredSparsityTarget> structured_sparsity_target(std::size_t n, std::vector<double> image,
                                                                            double sigma_sq, double c1, double c2,
                                                                            double kappa) {
  return std::make_unique<StructuredSparsityTarget>(n, std::move(image), sigma_sq, c1, c2, kappa);
}

}  // namespace sticky
