#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sticky/models/target.hpp"

namespace sticky {

inline double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double logistic(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
};

// Bernoulli likelihood with logit link and a Gaussian slab of variance sigma0_sq.
//   Psi(x) = sum_j [log(1 + e^<a_j,x>) - y_j <a_j,x>] + |x|^2 / (2 sigma0_sq)
class LogisticTarget : public Target, public SubsamplingScheme {
 public:
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  LogisticTarget(const RowMatrix& A, std::vector<double> y, double sigma0_sq, double w, NewtonOptions newton = {})
      : rows_(A), cols_(A), y_(std::move(y)), prior_prec_(1.0 / sigma0_sq) {
    if (!(sigma0_sq > 0.0)) throw std::invalid_argument("logistic_target: slab variance must be positive");
    if (static_cast<Eigen::Index>(y_.size()) != A.rows()) throw std::invalid_argument("logistic_target: response length mismatch");
    for (double yi : y_)
      if (yi != 0.0 && yi != 1.0) throw std::invalid_argument("logistic_target: responses must be 0 or 1");
    rows_.prune(0.0);
    cols_.prune(0.0);
    rows_.makeCompressed();
    cols_.makeCompressed();
    const auto d = static_cast<std::size_t>(A.cols());
    const auto n = static_cast<std::size_t>(A.rows());

    row_norm_.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (RowMatrix::InnerIterator it(rows_, static_cast<Eigen::Index>(j)); it; ++it) s += it.value() * it.value();
      row_norm_[j] = std::sqrt(s);
    }
    C_.assign(d, 0.0);
    lipschitz_.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      std::size_t nnz = 0;
      for (ColMatrix::InnerIterator it(cols_, static_cast<Eigen::Index>(i)); it; ++it) {
        if (it.value() == 0.0) continue;
        const double c = 0.25 * std::abs(it.value()) * row_norm_[static_cast<std::size_t>(it.row())];
        C_[i] = std::max(C_[i], c);
        lipschitz_[i] += c;
        ++nnz;
      }
      if (nnz == 0) throw std::invalid_argument("logistic_target: design column " + std::to_string(i) + " is zero");
    }
    build_pair_constants();

    const double kappa = kappa_from_prior(w, normal_density(0.0, 0.0, sigma0_sq));
    set_kappa(std::vector<double>(d, kappa));
    std::vector<std::vector<std::size_t>> nb(d);
    for (std::size_t i = 0; i < d; ++i) nb[i] = {i};
    set_neighbors(std::move(nb));
    all_coords_.resize(d);
    std::iota(all_coords_.begin(), all_coords_.end(), std::size_t{0});

    find_anchor(newton);
  }

  // -- Target
  double partial(std::span<const double> x, std::size_t i) const override {
    return likelihood_partial(x, i) + prior_prec_ * x[i];
  }

  std::optional<double> potential(std::span<const double> x) const override {
    double psi = 0.0;
    for (Eigen::Index j = 0; j < rows_.rows(); ++j) {
      const double eta = linear_predictor(x, static_cast<std::size_t>(j));
      psi += log1p_exp(eta) - y_[static_cast<std::size_t>(j)] * eta + log_two_offset_;
    }
    double sq = 0.0;
    for (double xi : x) sq += xi * xi;
    return psi + 0.5 * prior_prec_ * sq;
  }

  const std::vector<std::size_t>& read_set(std::size_t) const override { return all_coords_; }
  bool bounds_survive_sticky_events() const override { return true; }

  // Thinning with the full gradient; the likelihood part of d_i Psi is
  // Lipschitz with constant sum_j |A_ji| |a_j| / 4.
  RateBound zigzag_bound(const StickyState& s, std::size_t i) const override {
    const double vi = s.v[i];
    const double vnorm = full_norm(s.v);
    RateBound r;
    r.affine.a = std::max(vi * partial(s.x, i), 0.0);
    r.affine.b = std::abs(vi) * lipschitz_[i] * vnorm + vi * vi * prior_prec_;
    return r;
  }

  // The Hessian is dominated by A^T A / 4 plus the prior precision.
  std::optional<RateBound> directional_bound(const StickyState& s) const override {
    const std::size_t d = dim();
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (s.frozen[i]) continue;
      a += s.v[i] * partial(s.x, i);
      b += prior_prec_ * s.v[i] * s.v[i];
    }
    for (Eigen::Index j = 0; j < rows_.rows(); ++j) {
      double av = 0.0;
      for (RowMatrix::InnerIterator it(rows_, j); it; ++it) {
        const auto k = static_cast<std::size_t>(it.col());
        if (!s.frozen[k]) av += it.value() * s.v[k];
      }
      b += 0.25 * av * av;
    }
    RateBound r;
    r.affine.a = a;
    r.affine.b = b;
    return r;
  }

  const SubsamplingScheme* subsampling() const override { return this; }
  std::string name() const override { return "logistic"; }

  // -- SubsamplingScheme
  std::size_t term_count(std::size_t i) const override {
    return static_cast<std::size_t>(cols_.outerIndexPtr()[i + 1] - cols_.outerIndexPtr()[i]);
  }

  double term(std::span<const double> x, std::size_t i, std::size_t k) const override {
    const auto p = cols_.outerIndexPtr()[i] + static_cast<Eigen::Index>(k);
    const auto j = static_cast<std::size_t>(cols_.innerIndexPtr()[p]);
    const double aji = cols_.valuePtr()[p];
    return aji * (logistic(linear_predictor(x, j)) - y_[j]);
  }

  double anchor_term(std::size_t i, std::size_t k) const override {
    return anchor_terms_[static_cast<std::size_t>(cols_.outerIndexPtr()[i]) + k];
  }
  double anchor_partial(std::size_t i) const override { return anchor_grad_[i]; }
  double prior_partial(std::span<const double> x, std::size_t i) const override { return prior_prec_ * x[i]; }
  const std::vector<double>& anchor() const override { return anchor_; }

  // |term(x) - term(x*)| <= sum_k M_ik |x_k - x*_k| with M_ik = max_j |A_ji A_jk| / 4,
  // capped by the Cauchy-Schwarz form C_i |x - x*|. Both only use |v_k|, so
  // they survive reflections and freezes of other coordinates.
  RateBound sub_bound(const StickyState& s, std::size_t i) const override {
    const double vi = s.v[i];
    const double n = static_cast<double>(term_count(i));
    double dist = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double z = s.x[k] - anchor_[k];
      dist += z * z;
    }
    dist = std::sqrt(dist);
    double pair_a = 0.0;
    double pair_b = 0.0;
    for (auto p = pair_ptr_[i]; p < pair_ptr_[i + 1]; ++p) {
      const auto k = pair_col_[p];
      pair_a += pair_val_[p] * std::abs(s.x[k] - anchor_[k]);
      pair_b += pair_val_[p] * std::abs(s.v[k]);
    }
    RateBound r;
    r.affine.a = std::max(vi * (anchor_grad_[i] + prior_prec_ * s.x[i]), 0.0) +
                 n * std::abs(vi) * std::min(C_[i] * dist, pair_a);
    r.affine.b = n * std::abs(vi) * std::min(C_[i] * full_norm(s.v), pair_b) + vi * vi * prior_prec_;
    return r;
  }

  // -- accessors
  const std::vector<double>& lipschitz_constants() const { return C_; }
  double prior_precision() const { return prior_prec_; }
  int newton_iterations() const { return newton_iterations_; }
  std::size_t observations() const { return y_.size(); }

  double likelihood_partial(std::span<const double> x, std::size_t i) const {
    double g = 0.0;
    for (ColMatrix::InnerIterator it(cols_, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto j = static_cast<std::size_t>(it.row());
      g += it.value() * (logistic(linear_predictor(x, j)) - y_[j]);
    }
    return g;
  }

 private:
  double linear_predictor(std::span<const double> x, std::size_t j) const {
    double eta = 0.0;
    for (RowMatrix::InnerIterator it(rows_, static_cast<Eigen::Index>(j)); it; ++it)
      eta += it.value() * x[static_cast<std::size_t>(it.col())];
    return eta;
  }

  static double full_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double vi : v) s += vi * vi;
    return std::sqrt(s);
  }

  void build_pair_constants() {
    const auto d = static_cast<std::size_t>(cols_.cols());
    std::vector<double> scratch(d, 0.0);
    std::vector<std::size_t> touched;
    pair_ptr_.assign(d + 1, 0);
    for (std::size_t i = 0; i < d; ++i) {
      for (ColMatrix::InnerIterator it(cols_, static_cast<Eigen::Index>(i)); it; ++it) {
        const double aji = std::abs(it.value());
        for (RowMatrix::InnerIterator jt(rows_, it.row()); jt; ++jt) {
          const auto k = static_cast<std::size_t>(jt.col());
          if (scratch[k] == 0.0) touched.push_back(k);
          scratch[k] = std::max(scratch[k], 0.25 * aji * std::abs(jt.value()));
        }
      }
      std::sort(touched.begin(), touched.end());
      for (auto k : touched) {
        pair_col_.push_back(k);
        pair_val_.push_back(scratch[k]);
        scratch[k] = 0.0;
      }
      touched.clear();
      pair_ptr_[i + 1] = pair_col_.size();
    }
  }

  // Damped Newton from the origin for the posterior mode.
  void find_anchor(const NewtonOptions& opt) {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    auto grad_at = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd eta = rows_ * z;
      Eigen::VectorXd r(eta.size());
      for (Eigen::Index j = 0; j < eta.size(); ++j) r[j] = logistic(eta[j]) - y_[static_cast<std::size_t>(j)];
      Eigen::VectorXd g = cols_.transpose() * r + prior_prec_ * z;
      return g;
    };
    auto psi_at = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd eta = rows_ * z;
      double s = 0.0;
      for (Eigen::Index j = 0; j < eta.size(); ++j) s += log1p_exp(eta[j]) - y_[static_cast<std::size_t>(j)] * eta[j];
      return s + 0.5 * prior_prec_ * z.squaredNorm();
    };

    Eigen::VectorXd g = grad_at(x);
    double gnorm = g.norm();
    const double tol = opt.tolerance;
    int it = 0;
    for (; it < opt.max_iterations && gnorm > tol; ++it) {
      Eigen::VectorXd eta = rows_ * x;
      Eigen::VectorXd wdiag(eta.size());
      for (Eigen::Index j = 0; j < eta.size(); ++j) {
        const double p = logistic(eta[j]);
        wdiag[j] = p * (1.0 - p);
      }
      Eigen::MatrixXd H = Eigen::MatrixXd(cols_.transpose() * wdiag.asDiagonal() * rows_);
      H.diagonal().array() += prior_prec_;
      Eigen::VectorXd step = H.ldlt().solve(g);
      const double f0 = psi_at(x);
      double t = 1.0;
      Eigen::VectorXd cand = x - step;
      // Near the mode the predicted decrease drowns in rounding; take the full step there.
      const double predicted = g.dot(step);
      if (predicted > 1e-12 * (1.0 + std::abs(f0))) {
        while (psi_at(cand) > f0 - 1e-4 * t * predicted && t > 1e-10) {
          t *= 0.5;
          cand = x - t * step;
        }
      }
      x = cand;
      g = grad_at(x);
      gnorm = g.norm();
    }
    if (!(gnorm <= tol)) {
      std::ostringstream os;
      os << "logistic_target: Newton iteration for the anchor did not converge after " << it
         << " iterations (gradient norm " << gnorm << ")";
      throw std::runtime_error(os.str());
    }
    newton_iterations_ = it;
    anchor_.assign(x.data(), x.data() + d);
    anchor_grad_.assign(static_cast<std::size_t>(d), 0.0);
    anchor_terms_.assign(static_cast<std::size_t>(cols_.nonZeros()), 0.0);
    for (std::size_t i = 0; i < dim(); ++i) {
      const std::size_t n = term_count(i);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double s = term(anchor_, i, k);
        anchor_terms_[static_cast<std::size_t>(cols_.outerIndexPtr()[i]) + k] = s;
        sum += s;
      }
      anchor_grad_[i] = sum;
    }
    log_two_offset_ = -std::log(2.0);  // Psi(0) = 0
  }

  RowMatrix rows_;
  ColMatrix cols_;
  std::vector<double> y_;
  double prior_prec_;
  std::vector<double> row_norm_;
  std::vector<double> C_;
  std::vector<double> lipschitz_;
  std::vector<std::size_t> pair_ptr_;
  std::vector<std::size_t> pair_col_;
  std::vector<double> pair_val_;
  std::vector<std::size_t> all_coords_;
  std::vector<double> anchor_;
  std::vector<double> anchor_grad_;
  std::vector<double> anchor_terms_;
  double log_two_offset_ = 0.0;
  int newton_iterations_ = 0;
};

inline std::unique_ptr<LogisticTarget> logistic_target(const Eigen::SparseMatrix<double, Eigen::RowMajor>& A,
                                                       std::vector<double> y, double sigma0_sq, double w) {
  return std::make_unique<LogisticTarget>(A, std::move(y), sigma0_sq, w);
}

}  // namespace sticky
