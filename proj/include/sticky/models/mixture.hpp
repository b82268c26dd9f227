#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sticky/models/target.hpp"

namespace sticky {

// Mixture of Gaussians sharing one precision matrix P:
//   Psi(x) = -log sum_k w_k exp(-(x - m_k)' P (x - m_k) / 2)
// The Hessian is P minus a PSD term bounded by P C P with C the covariance of the means.
class MixtureTarget : public Target {
 public:
  MixtureTarget(std::vector<Eigen::VectorXd> means, std::vector<double> weights, Eigen::MatrixXd precision,
                std::vector<double> kappa)
      : means_(std::move(means)), logw_(weights.size()), P_(std::move(precision)) {
    if (means_.empty() || means_.size() != weights.size()) throw std::invalid_argument("mixture_target: bad components");
    const auto d = P_.rows();
    for (auto& m : means_)
      if (m.size() != d) throw std::invalid_argument("mixture_target: mean has wrong length");
    Eigen::LLT<Eigen::MatrixXd> llt(P_);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("mixture_target: precision is not positive definite");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!(weights[k] > 0.0)) throw std::invalid_argument("mixture_target: weights must be positive");
      logw_[k] = std::log(weights[k]);
    }
    set_kappa(std::move(kappa));
    if (kappa_.size() != static_cast<std::size_t>(d)) throw std::invalid_argument("mixture_target: kappa length");
    std::vector<std::vector<std::size_t>> nb(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) nb[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(j));
    set_neighbors(std::move(nb));

    // Spread of the means bounds the curvature correction.
    double spread = 0.0;
    for (const auto& a : means_)
      for (const auto& b : means_) spread = std::max(spread, (P_ * (a - b)).lpNorm<1>());
    row_bound_.resize(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
      double pd = 0.0;
      for (const auto& a : means_)
        for (const auto& b : means_) pd = std::max(pd, std::abs((P_ * (a - b))[i]));
      row_bound_[static_cast<std::size_t>(i)] = P_.row(i).lpNorm<1>() + 0.5 * pd * spread;
    }
    double mmax = 0.0;
    for (const auto& a : means_) mmax = std::max(mmax, (P_ * a).norm());
    grad_offset_ = mmax;
  }

  Eigen::VectorXd gradient_vec(std::span<const double> x) const {
    const auto d = P_.rows();
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
    std::vector<double> lr(means_.size());
    double mx = -kInf;
    for (std::size_t k = 0; k < means_.size(); ++k) {
      const Eigen::VectorXd z = xv - means_[k];
      lr[k] = logw_[k] - 0.5 * z.dot(P_ * z);
      mx = std::max(mx, lr[k]);
    }
    double tot = 0.0;
    for (auto& l : lr) tot += (l = std::exp(l - mx));
    Eigen::VectorXd mbar = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < means_.size(); ++k) mbar += (lr[k] / tot) * means_[k];
    return P_ * (xv - mbar);
  }

  double partial(std::span<const double> x, std::size_t i) const override {
    return gradient_vec(x)[static_cast<Eigen::Index>(i)];
  }

  std::optional<double> potential(std::span<const double> x) const override {
    const auto d = P_.rows();
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), d);
    double mx = -kInf;
    std::vector<double> lr(means_.size());
    for (std::size_t k = 0; k < means_.size(); ++k) {
      const Eigen::VectorXd z = xv - means_[k];
      lr[k] = logw_[k] - 0.5 * z.dot(P_ * z);
      mx = std::max(mx, lr[k]);
    }
    double tot = 0.0;
    for (double l : lr) tot += std::exp(l - mx);
    return -(mx + std::log(tot));
  }

  // Valid for speeds bounded by one, so it survives any other event.
  RateBound zigzag_bound(const StickyState& s, std::size_t i) const override {
    RateBound r;
    r.affine = {std::max(s.v[i] * partial(s.x, i), 0.0), std::abs(s.v[i]) * row_bound_[i], kInf};
    return r;
  }
  bool bounds_survive_sticky_events() const override { return true; }

  std::optional<RateBound> directional_bound(const StickyState& s) const override {
    const auto d = P_.rows();
    const Eigen::VectorXd g = gradient_vec(s.x);
    Eigen::VectorXd va(d);
    for (Eigen::Index i = 0; i < d; ++i) va[i] = s.frozen[static_cast<std::size_t>(i)] ? 0.0 : s.v[static_cast<std::size_t>(i)];
    RateBound r;
    r.affine = {va.dot(g), va.dot(P_ * va), kInf};
    return r;
  }

  std::optional<GrowthBound> growth_bound(std::span<const double> ref_precision_diag) const override {
    Eigen::MatrixXd M = P_;
    for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, i) -= ref_precision_diag[static_cast<std::size_t>(i)];
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues();
    return GrowthBound{ev.cwiseAbs().maxCoeff() * (1.0 + 1e-12), grad_offset_};
  }

  std::string name() const override { return "mixture"; }

 private:
  std::vector<Eigen::VectorXd> means_;
  std::vector<double> logw_;
  Eigen::MatrixXd P_;
  std::vector<double> row_bound_;
  double grad_offset_ = 0.0;
};

}  // namespace sticky
