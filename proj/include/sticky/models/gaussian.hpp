#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sticky/models/target.hpp"

namespace sticky {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct GaussianSpec {
  Eigen::VectorXd mu;
  SparseMatrix Gamma;
  std::vector<double> kappa;

  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }

  void validate() const {
    const auto d = mu.size();
    if (Gamma.rows() != d || Gamma.cols() != d) throw std::invalid_argument("GaussianSpec: precision has wrong shape");
    if (kappa.size() != static_cast<std::size_t>(d)) throw std::invalid_argument("GaussianSpec: kappa has wrong length");
    SparseMatrix gt = Gamma.transpose();
    if ((gt - Gamma).norm() > 1e-12 * std::max(1.0, Gamma.norm()))
      throw std::invalid_argument("GaussianSpec: precision is not symmetric");
    Eigen::SparseMatrix<double> col = Gamma;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(col);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("GaussianSpec: precision is not positive definite");
  }
};

inline SparseMatrix to_sparse(const Eigen::MatrixXd& m) {
  SparseMatrix s = m.sparseView();
  s.makeCompressed();
  return s;
}

inline GaussianSpec make_gaussian_spec(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& mu, std::vector<double> kappa) {
  return GaussianSpec{mu, to_sparse(gamma), std::move(kappa)};
}

// Psi(x) = (x - mu)' Gamma (x - mu) / 2; rates along rays are affine and exact.
class GaussianTarget : public Target {
 public:
  explicit GaussianTarget(GaussianSpec spec) : spec_(std::move(spec)) {
    h_ = spec_.Gamma * spec_.mu;
    init();
  }

  const GaussianSpec& spec() const { return spec_; }
  const Eigen::VectorXd& linear_term() const { return h_; }


 protected:
  // Canonical form: Psi(x) = x' Gamma x / 2 - h' x + const, with mu = Gamma^{-1} h.
  GaussianTarget(GaussianSpec spec, Eigen::VectorXd h) : spec_(std::move(spec)), h_(std::move(h)) { init(); }

 private:
  void init() {
    spec_.validate();
    spec_.Gamma.makeCompressed();
    set_kappa(spec_.kappa);
    const auto d = dim();
    std::vector<std::vector<std::size_t>> nb(d);
    for (std::size_t i = 0; i < d; ++i)
      for (SparseMatrix::InnerIterator it(spec_.Gamma, static_cast<Eigen::Index>(i)); it; ++it)
        if (it.value() != 0.0) nb[i].push_back(static_cast<std::size_t>(it.col()));
    set_neighbors(std::move(nb));
  }

 public:
  double partial(std::span<const double> x, std::size_t i) const override {
    double g = -h_[static_cast<Eigen::Index>(i)];
    for (SparseMatrix::InnerIterator it(spec_.Gamma, static_cast<Eigen::Index>(i)); it; ++it)
      g += it.value() * x[static_cast<std::size_t>(it.col())];
    return g;
  }

  std::optional<double> potential(std::span<const double> x) const override {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = x[static_cast<std::size_t>(i)] - spec_.mu[i];
    return 0.5 * z.dot(spec_.Gamma * z);
  }

  RateBound zigzag_bound(const StickyState& s, std::size_t i) const override {
    double slope = 0.0;
    for (SparseMatrix::InnerIterator it(spec_.Gamma, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto j = static_cast<std::size_t>(it.col());
      if (!s.frozen[j]) slope += it.value() * s.v[j];
    }
    RateBound r;
    r.affine = {s.v[i] * partial(s.x, i), s.v[i] * slope, kInf};
    r.exact = true;
    return r;
  }

  std::optional<RateBound> directional_bound(const StickyState& s) const override {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (s.frozen[i]) continue;
      double gi = -h_[static_cast<Eigen::Index>(i)], si = 0.0;
      for (SparseMatrix::InnerIterator it(spec_.Gamma, static_cast<Eigen::Index>(i)); it; ++it) {
        const auto j = static_cast<std::size_t>(it.col());
        gi += it.value() * s.x[j];
        if (!s.frozen[j]) si += it.value() * s.v[j];
      }
      a += s.v[i] * gi;
      b += s.v[i] * si;
    }
    RateBound r;
    r.affine = {a, b, kInf};
    r.exact = true;
    return r;
  }

  std::optional<GrowthBound> growth_bound(std::span<const double> ref_precision_diag) const override {
    // Row-sum and Frobenius norms both dominate the spectral norm of a symmetric matrix.
    double frob = 0.0, rowmax = 0.0;
    for (Eigen::Index i = 0; i < spec_.Gamma.outerSize(); ++i) {
      double row = 0.0;
      bool diag_seen = false;
      for (SparseMatrix::InnerIterator it(spec_.Gamma, i); it; ++it) {
        double val = it.value();
        if (it.col() == i) {
          val -= ref_precision_diag[static_cast<std::size_t>(i)];
          diag_seen = true;
        }
        row += std::abs(val);
        frob += val * val;
      }
      if (!diag_seen) {
        const double val = ref_precision_diag[static_cast<std::size_t>(i)];
        row += std::abs(val);
        frob += val * val;
      }
      rowmax = std::max(rowmax, row);
    }
    return GrowthBound{std::min(std::sqrt(frob), rowmax), h_.norm()};
  }

  std::string name() const override { return "gaussian"; }

 protected:
  GaussianSpec spec_;
  Eigen::VectorXd h_;
};

inline std::unique_ptr<GaussianTarget> gaussian_target(GaussianSpec spec) {
  return std::make_unique<GaussianTarget>(std::move(spec));
}

}  // namespace sticky
