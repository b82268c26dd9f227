#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sticky/models/gaussian.hpp"
#include "sticky/random.hpp"

namespace sticky {

// Gaussian potential in canonical form: Psi(x) = x' Gamma x / 2 - h' x.
struct GibbsModel {
  SparseMatrix Gamma;
  Eigen::VectorXd h;
  std::vector<double> kappa;
  // Elimination rank of every coordinate in a fill-reducing ordering of Gamma;
  // sparse sub-model factors reuse its restriction instead of reordering.
  std::shared_ptr<const std::vector<Eigen::Index>> rank;

  std::size_t dim() const { return static_cast<std::size_t>(h.size()); }

  static GibbsModel from_spec(const GaussianSpec& spec) {
    spec.validate();
    return {spec.Gamma, spec.Gamma * spec.mu, spec.kappa, nullptr};
  }
  static GibbsModel from_target(const GaussianTarget& t) {
    return {t.spec().Gamma, t.linear_term(), t.kappa(), nullptr};
  }
};

inline std::vector<Eigen::Index> amd_rank(const Eigen::SparseMatrix<double>& G) {
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
  Eigen::AMDOrdering<int>()(G, pinv);
  std::vector<Eigen::Index> rank(static_cast<std::size_t>(G.rows()));
  for (Eigen::Index k = 0; k < pinv.size(); ++k) rank[static_cast<std::size_t>(pinv.indices()[k])] = k;
  return rank;
}

inline void prepare_ordering(GibbsModel& m) {
  if (!m.rank) m.rank = std::make_shared<const std::vector<Eigen::Index>>(amd_rank(m.Gamma));
}

using Membership = std::vector<std::uint8_t>;

struct GibbsState {
  Membership alpha;
  Eigen::VectorXd x;

  void validate() const {
    if (static_cast<Eigen::Index>(alpha.size()) != x.size()) throw std::invalid_argument("GibbsState: size mismatch");
    for (std::size_t i = 0; i < alpha.size(); ++i)
      if (!alpha[i] && x[static_cast<Eigen::Index>(i)] != 0.0)
        throw std::invalid_argument("GibbsState: nonzero coefficient outside the model");
  }
  std::size_t model_size() const {
    std::size_t n = 0;
    for (auto a : alpha) n += a;
    return n;
  }
};

inline std::vector<Eigen::Index> members(const Membership& alpha) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (alpha[i]) idx.push_back(static_cast<Eigen::Index>(i));
  return idx;
}

inline Eigen::MatrixXd dense_block(const SparseMatrix& G, const std::vector<Eigen::Index>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  std::vector<Eigen::Index> pos(static_cast<std::size_t>(G.rows()), -1);
  for (Eigen::Index k = 0; k < n; ++k) pos[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = k;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (SparseMatrix::InnerIterator it(G, idx[static_cast<std::size_t>(k)]); it; ++it) {
      const auto c = pos[static_cast<std::size_t>(it.col())];
      if (c >= 0) B(k, c) = it.value();
    }
  return B;
}

inline Eigen::SparseMatrix<double> sparse_block(const SparseMatrix& G, const std::vector<Eigen::Index>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  std::vector<Eigen::Index> pos(static_cast<std::size_t>(G.rows()), -1);
  for (Eigen::Index k = 0; k < n; ++k) pos[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = k;
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index k = 0; k < n; ++k)
    for (SparseMatrix::InnerIterator it(G, idx[static_cast<std::size_t>(k)]); it; ++it) {
      const auto c = pos[static_cast<std::size_t>(it.col())];
      if (c >= 0) trip.emplace_back(k, c, it.value());
    }
  Eigen::SparseMatrix<double> B(n, n);
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

// Cholesky factor of the sub-model block with its normalising constant
//   log Z = |a|/2 log(2 pi) - log|Gamma_a|/2 + h_a' Gamma_a^{-1} h_a / 2.
class BlockFactor {
 public:
  BlockFactor() = default;
  BlockFactor(const GibbsModel& m, const Membership& alpha, bool sparse) : idx_(members(alpha)), sparse_(sparse) {
    const auto n = static_cast<Eigen::Index>(idx_.size());
    if (n == 0) return;
    const Eigen::VectorXd h = gather(m.h, idx_);
    double logdet = 0.0;
    if (sparse_) {
      // ord_[k] is the position in idx_ of the k-th eliminated coordinate.
      ord_.resize(idx_.size());
      for (std::size_t k = 0; k < ord_.size(); ++k) ord_[k] = static_cast<Eigen::Index>(k);
      std::vector<Eigen::Index> key(idx_.size());
      if (m.rank) {
        for (std::size_t k = 0; k < idx_.size(); ++k) key[k] = (*m.rank)[static_cast<std::size_t>(idx_[k])];
      } else {
        key = amd_rank(sparse_block(m.Gamma, idx_));
      }
      std::sort(ord_.begin(), ord_.end(), [&](auto a, auto b) { return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)]; });
      std::vector<Eigen::Index> permuted(idx_.size());
      Eigen::VectorXd hp(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        permuted[static_cast<std::size_t>(k)] = idx_[static_cast<std::size_t>(ord_[static_cast<std::size_t>(k)])];
        hp[k] = h[ord_[static_cast<std::size_t>(k)]];
      }
      sllt_ = std::make_unique<SparseLLT>(sparse_block(m.Gamma, permuted));
      if (sllt_->info() != Eigen::Success) throw std::runtime_error("gibbs: sub-model precision block is singular");
      const auto& L = sllt_->matrixL().nestedExpression();
      for (Eigen::Index k = 0; k < L.outerSize(); ++k) {
        double nnz = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it) {
          if (it.row() == k) logdet += 2.0 * std::log(it.value());
          nnz += 1.0;
        }
        flops_ += nnz * nnz;
      }
      solve_flops_ = 2.0 * static_cast<double>(L.nonZeros());
      const Eigen::VectorXd mp = sllt_->solve(hp);
      mean_.resize(n);
      for (Eigen::Index k = 0; k < n; ++k) mean_[ord_[static_cast<std::size_t>(k)]] = mp[k];
    } else {
      dllt_.compute(dense_block(m.Gamma, idx_));
      if (dllt_.info() != Eigen::Success) throw std::runtime_error("gibbs: sub-model precision block is singular");
      const Eigen::MatrixXd& L = dllt_.matrixLLT();
      for (Eigen::Index k = 0; k < n; ++k) logdet += 2.0 * std::log(L(k, k));
      flops_ = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(n) / 3.0;
      solve_flops_ = static_cast<double>(n) * static_cast<double>(n + 1);
      mean_ = dllt_.solve(h);
    }
    log_z_ = 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet + 0.5 * h.dot(mean_);
  }

  double log_z() const { return log_z_; }
  double flops() const { return flops_; }
  // Cost of one triangular solve with the factor.
  double solve_flops() const { return solve_flops_; }
  const std::vector<Eigen::Index>& index() const { return idx_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  Eigen::MatrixXd precision(const GibbsModel& m) const { return dense_block(m.Gamma, idx_); }

  // Draw from N(mean, Gamma_a^{-1}) scattered into a full-length vector.
  template <class G>
  Eigen::VectorXd sample(std::size_t d, G& rng) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    const auto n = static_cast<Eigen::Index>(idx_.size());
    if (n == 0) return x;
    Eigen::VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k) z[k] = std_normal(rng);
    Eigen::VectorXd y;
    if (sparse_) {
      const Eigen::VectorXd w = sllt_->matrixU().solve(z);
      y.resize(n);
      for (Eigen::Index k = 0; k < n; ++k) y[ord_[static_cast<std::size_t>(k)]] = w[k];
    } else {
      y = dllt_.matrixU().solve(z);
    }
    for (Eigen::Index k = 0; k < n; ++k) x[idx_[static_cast<std::size_t>(k)]] = mean_[k] + y[k];
    return x;
  }

 private:
  std::vector<Eigen::Index> idx_;
  bool sparse_ = false;
  using SparseLLT = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>;
  std::vector<Eigen::Index> ord_;
  std::unique_ptr<SparseLLT> sllt_;
  Eigen::LLT<Eigen::MatrixXd> dllt_;
  Eigen::VectorXd mean_;
  double log_z_ = 0.0;
  double flops_ = 0.0;
  double solve_flops_ = 0.0;
};

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};

// Law of x_a given x_{a^c} = 0.
inline ConditionalGaussian conditional_gaussian(const GaussianSpec& spec, const Membership& alpha) {
  if (alpha.size() != spec.dim()) throw std::invalid_argument("conditional_gaussian: alpha has wrong length");
  const auto m = GibbsModel::from_spec(spec);
  BlockFactor f(m, alpha, false);
  if (f.index().empty()) throw std::invalid_argument("conditional_gaussian: empty model");
  return {f.mean(), f.precision(m)};
}

inline Membership with_coord(Membership a, std::size_t j, bool in) {
  a[j] = in ? 1 : 0;
  return a;
}

inline double log_bayes_factor(const GibbsModel& m, const Membership& alpha, std::size_t j, bool sparse = false) {
  if (j >= m.dim()) throw std::out_of_range("bayes_factor: coordinate out of range");
  if (!(m.kappa[j] > 0.0)) return -kInf;
  const BlockFactor with(m, with_coord(alpha, j, true), sparse);
  const BlockFactor without(m, with_coord(alpha, j, false), sparse);
  return std::log(m.kappa[j]) + with.log_z() - without.log_z();
}

inline double bayes_factor(const GaussianSpec& spec, const Membership& alpha, std::size_t j) {
  if (alpha.size() != spec.dim()) throw std::invalid_argument("bayes_factor: alpha has wrong length");
  return std::exp(log_bayes_factor(GibbsModel::from_spec(spec), alpha, j));
}

struct GibbsOptions {
  std::uint64_t iterations = 1000;
  std::uint64_t seed = 1;
  std::optional<bool> sparse;  // default: sparse factorisations above 64 coordinates
  bool record = true;          // keep every state, not only running counts
  // Sub-models outside the support have zero mass; moves into them are never taken.
  std::function<bool(const Membership&)> support;
};

struct GibbsChain {
  std::vector<GibbsState> states;
  std::uint64_t iterations = 0;
  std::vector<std::uint64_t> inclusion_counts;  // over states 1..iterations
  std::uint64_t null_count = 0;
  double flops = 0.0;
  std::vector<double> flops_per_iteration;
};

// Called after each iteration with the iteration number; returning false stops the chain.
using GibbsObserver = std::function<bool(std::uint64_t, const GibbsState&)>;

class GibbsSampler {
 public:
  GibbsSampler(GibbsModel model, GibbsOptions opt) : m_(std::move(model)), opt_(std::move(opt)), rng_(derive_seed(opt_.seed, 0)) {
    if (m_.kappa.size() != m_.dim()) throw std::invalid_argument("gibbs: kappa has wrong length");
    sparse_ = opt_.sparse.value_or(m_.dim() > 64);
    if (sparse_) prepare_ordering(m_);
  }

  GibbsChain run(const GibbsState& init, const GibbsObserver& observer = {}) {
    init.validate();
    if (init.alpha.size() != m_.dim()) throw std::invalid_argument("gibbs: initial state has wrong dimension");
    const std::size_t d = m_.dim();
    GibbsState s = init;
    GibbsChain chain;
    chain.inclusion_counts.assign(d, 0);
    if (opt_.record) chain.states.push_back(s);
    BlockFactor cur(m_, s.alpha, sparse_);
    chain.flops += cur.flops();
    for (std::uint64_t it = 1; it <= opt_.iterations; ++it) {
      const std::size_t j = uniform_index(rng_, d);
      const bool was_in = s.alpha[j] != 0;
      Membership other = with_coord(s.alpha, j, !was_in);
      double step_flops = 0.0;
      bool move = false;
      std::optional<BlockFactor> alt;
      const double u = uniform_open(rng_);
      if (!opt_.support || opt_.support(other)) {
        alt.emplace(m_, other, sparse_);
        step_flops += alt->flops();
        const double log_b = !(m_.kappa[j] > 0.0) ? -kInf
                             : was_in             ? std::log(m_.kappa[j]) + cur.log_z() - alt->log_z()
                                                  : std::log(m_.kappa[j]) + alt->log_z() - cur.log_z();
        // Inclusion probability B / (1 + B) in logistic form.
        const double p_in = log_b >= 0.0 ? 1.0 / (1.0 + std::exp(-log_b)) : std::exp(log_b) / (1.0 + std::exp(log_b));
        const bool include = u < p_in;
        move = include != was_in;
      }
      if (move) {
        s.alpha = std::move(other);
        cur = std::move(*alt);
      }
      s.x = cur.sample(d, rng_);
      step_flops += cur.solve_flops();
      chain.flops += step_flops;
      if (opt_.record) chain.flops_per_iteration.push_back(step_flops);
      bool null = true;
      for (std::size_t i = 0; i < d; ++i) {
        chain.inclusion_counts[i] += s.alpha[i];
        null &= !s.alpha[i];
      }
      chain.null_count += null;
      chain.iterations = it;
      if (opt_.record) chain.states.push_back(s);
      if (observer && !observer(it, s)) break;
    }
    return chain;
  }

 private:
  GibbsModel m_;
  GibbsOptions opt_;
  Rng rng_;
  bool sparse_ = false;
};

inline GibbsChain run_gibbs(const GibbsModel& model, const GibbsState& init, const GibbsOptions& opt,
                            const GibbsObserver& observer = {}) {
  GibbsSampler g(model, opt);
  return g.run(init, observer);
}

inline GibbsChain run_gibbs(const GaussianSpec& spec, const GibbsState& init, std::uint64_t iterations,
                            std::uint64_t seed) {
  GibbsOptions opt;
  opt.iterations = iterations;
  opt.seed = seed;
  return run_gibbs(GibbsModel::from_spec(spec), init, opt);
}

inline GibbsState full_model_state(std::span<const double> x) {
  GibbsState s;
  s.alpha.assign(x.size(), 1);
  s.x = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return s;
}

inline GibbsState null_model_state(std::size_t d) {
  return {Membership(d, 0), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))};
}

inline std::string alpha_string(const Membership& alpha) {
  if (alpha.size() <= 64) {
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
      if (alpha[i]) mask |= std::uint64_t{1} << i;
    return std::to_string(mask);
  }
  std::string s;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!alpha[i]) continue;
    if (!s.empty()) s += ';';
    s += std::to_string(i);
  }
  return s;
}

inline void write_chain_csv(std::ostream& os, const GibbsChain& chain) {
  os.precision(17);
  const std::size_t d = chain.inclusion_counts.size();
  os << "iter,alpha";
  for (std::size_t i = 0; i < d; ++i) os << ",x" << i;
  os << '\n';
  for (std::size_t k = 0; k < chain.states.size(); ++k) {
    const auto& s = chain.states[k];
    os << k << ',' << alpha_string(s.alpha);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) os << ',' << s.x[i];
    os << '\n';
  }
}

}  // namespace sticky
