#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sticky/models/target.hpp"

namespace sticky {

// Lower-triangular factor X of a precision matrix XX', parametrised by the
// p(p+1)/2 entries {x_ij : j <= i} in row-major order.
//   Psi(X) = tr(X' S X)/2 - N sum_i log x_ii + sum_{j<=i} (x_ij - c_ij)^2 / (2 sigma0_sq),  S = YY'
class PrecisionTarget : public Target {
 public:
  PrecisionTarget(const Eigen::MatrixXd& Y, double sigma0_sq, const Eigen::MatrixXd& prior_mean, double w)
      : p_(static_cast<std::size_t>(Y.rows())),
        nobs_(static_cast<double>(Y.cols())),
        S_(Y * Y.transpose()),
        gamma_(1.0 / sigma0_sq),
        prior_mean_(prior_mean) {
    if (Y.cols() < 1) throw std::invalid_argument("precision_target: need at least one observation");
    if (!(sigma0_sq > 0.0)) throw std::invalid_argument("precision_target: slab variance must be positive");
    if (prior_mean.rows() != Y.rows() || prior_mean.cols() != Y.rows())
      throw std::invalid_argument("precision_target: prior mean has wrong shape");
    const std::size_t d = p_ * (p_ + 1) / 2;
    std::vector<double> kappa(d);
    std::vector<Constraint> cons(d);
    rows_.resize(d);
    cols_.resize(d);
    for (std::size_t i = 0, k = 0; i < p_; ++i)
      for (std::size_t j = 0; j <= i; ++j, ++k) {
        rows_[k] = i;
        cols_[k] = j;
        if (i == j) {
          kappa[k] = kInf;
          cons[k] = Constraint::StrictlyPositive;
        } else {
          kappa[k] = kappa_from_prior(w, normal_density(0.0, prior_mean(i, j), sigma0_sq));
          cons[k] = Constraint::Unconstrained;
        }
      }
    set_kappa(std::move(kappa));
    set_constraints(std::move(cons));
    std::vector<std::vector<std::size_t>> nb(d);
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t m = cols_[k]; m < p_; ++m) nb[k].push_back(index(m, cols_[k]));
    set_neighbors(std::move(nb));
  }

  std::size_t side() const { return p_; }
  std::size_t index(std::size_t i, std::size_t j) const { return i * (i + 1) / 2 + j; }
  std::size_t row_of(std::size_t k) const { return rows_[k]; }
  std::size_t col_of(std::size_t k) const { return cols_[k]; }
  bool is_diagonal(std::size_t k) const { return rows_[k] == cols_[k]; }

  double partial(std::span<const double> x, std::size_t k) const override {
    const std::size_t i = rows_[k], j = cols_[k];
    double g = sx(x, i, j) + gamma_ * (x[k] - prior_mean_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    if (i == j) {
      if (!(x[k] > 0.0))
        throw std::domain_error("precision_target: diagonal entry " + std::to_string(i) + " is not positive");
      g -= nobs_ / x[k];
    }
    return g;
  }

  std::optional<double> potential(std::span<const double> x) const override {
    double psi = 0.0;
    for (std::size_t j = 0; j < p_; ++j) {
      // column j of X has support rows j..p-1
      for (std::size_t a = j; a < p_; ++a)
        for (std::size_t b = j; b < p_; ++b)
          psi += 0.5 * x[index(a, j)] * S_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * x[index(b, j)];
    }
    for (std::size_t k = 0; k < dim(); ++k) {
      const double z = x[k] - prior_mean_(static_cast<Eigen::Index>(rows_[k]), static_cast<Eigen::Index>(cols_[k]));
      psi += 0.5 * gamma_ * z * z;
      if (rows_[k] == cols_[k]) {
        if (!(x[k] > 0.0))
          throw std::domain_error("precision_target: diagonal entry " + std::to_string(rows_[k]) + " is not positive");
        psi -= nobs_ * std::log(x[k]);
      }
    }
    return psi;
  }

  // Off-diagonal rates are affine and exact; diagonal rates add the barrier
  // from -N log x_ii, handled by superposition.
  RateBound zigzag_bound(const StickyState& s, std::size_t k) const override {
    const std::size_t i = rows_[k], j = cols_[k];
    const double vk = s.v[k];
    double slope = 0.0;
    for (std::size_t m = j; m < p_; ++m) {
      const std::size_t q = index(m, j);
      if (!s.frozen[q]) slope += S_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) * s.v[q];
    }
    slope += gamma_ * vk;
    const double affine_grad =
        sx(s.x, i, j) + gamma_ * (s.x[k] - prior_mean_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    RateBound r;
    r.affine = {vk * affine_grad, vk * slope, kInf};
    if (i == j) {
      r.barrier = LogBarrier{s.x[k], vk, nobs_};
      r.exact = false;
    } else {
      r.exact = true;
    }
    return r;
  }

  std::string name() const override { return "precision"; }

 private:
  double sx(std::span<const double> x, std::size_t i, std::size_t j) const {
    double g = 0.0;
    for (std::size_t m = j; m < p_; ++m) g += S_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) * x[index(m, j)];
    return g;
  }

  std::size_t p_;
  double nobs_;
  Eigen::MatrixXd S_;
  double gamma_;
  Eigen::MatrixXd prior_mean_;
  std::vector<std::size_t> rows_, cols_;
};

inline std::unique_ptr<PrecisionTarget> precision_target(const Eigen::MatrixXd& Y, double sigma0_sq,
                                                         const Eigen::MatrixXd& prior_mean, double w) {
  return std::make_unique<PrecisionTarget>(Y, sigma0_sq, prior_mean, w);
}

inline std::unique_ptr<PrecisionTarget> precision_target(const Eigen::MatrixXd& Y, double sigma0_sq, double w) {
  const auto p = Y.rows();
  return std::make_unique<PrecisionTarget>(Y, sigma0_sq, Eigen::MatrixXd::Identity(p, p), w);
}

}  // namespace sticky
