#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sticky/bench/config.hpp"
#include "sticky/bench/io.hpp"
#include "sticky/bench/scenarios.hpp"
#include "sticky/bench/simulate.hpp"
#include "sticky/sticky.hpp"

namespace sticky::bench {

// Seed streams split off the run seed.
enum SeedStream : std::uint64_t { kDataStream = 101, kInitStream = 102, kSamplerStream = 103, kReplicateStream = 104 };

struct ModelInstance {
  std::string kind;
  std::unique_ptr<Target> target;
  const GaussianTarget* gaussian = nullptr;  // set when the Gibbs sampler applies
  std::function<bool(const Membership&)> support;
  std::vector<double> init_x;
  nlohmann::json meta;
};

inline std::vector<double> kappa_list(const Config& c, const std::string& key, std::size_t d, double fallback) {
  auto k = c.list_or(key, {fallback});
  if (k.size() == 1) k.assign(d, k[0]);
  if (k.size() != d) c.fail(key, "expected 1 or " + std::to_string(d) + " values");
  return k;
}

inline ModelInstance build_model(const Config& c, std::uint64_t seed) {
  ModelInstance m;
  m.kind = c.get<std::string>("model.kind");
  const std::uint64_t data_seed = c.get_or<std::uint64_t>("model.data_seed", seed);
  Rng data_rng(derive_seed(data_seed, kDataStream));
  Rng init_rng(derive_seed(seed, kInitStream));
  m.meta["kind"] = m.kind;

  if (m.kind == "gaussian") {
    c.check_keys("model", {"kind", "gamma", "mu", "kappa", "data_seed"});
    const auto rows = c.matrix("model.gamma");
    const auto d = rows.size();
    Eigen::MatrixXd G(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r) {
      if (rows[r].size() != d) c.fail("model.gamma", "matrix must be square");
      for (std::size_t k = 0; k < d; ++k) G(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    }
    auto mu = c.list_or("model.mu", std::vector<double>(d, 0.0));
    if (mu.size() != d) c.fail("model.mu", "expected " + std::to_string(d) + " values");
    GaussianSpec spec;
    try {
      spec = make_gaussian_spec(G, Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(d)),
                                kappa_list(c, "model.kappa", d, 1.0));
      spec.validate();
    } catch (const std::invalid_argument& e) {
      c.fail("model.gamma", e.what());
    }
    auto t = gaussian_target(spec);
    m.gaussian = t.get();
    m.init_x = mu;
    m.target = std::move(t);
  } else if (m.kind == "scenario1" || m.kind == "scenario2") {
    c.check_keys("model", {"kind", "d", "gamma", "kappa", "data_seed"});
    const auto d = c.get<std::size_t>("model.d");
    ScenarioParams sp{c.get_or("model.gamma", 25.0), c.get_or("model.kappa", 1e-4)};
    if (m.kind == "scenario1") {
      auto t = every_model_target(d, sp);
      m.gaussian = t.get();
      m.target = std::move(t);
    } else {
      auto t = std::make_unique<NestedChainTarget>(d, sp);
      m.gaussian = t.get();
      m.target = std::move(t);
      m.support = nested_support;
    }
    m.init_x.resize(d);
    for (auto& x : m.init_x) x = std_normal(init_rng);
  } else if (m.kind == "structured") {
    c.check_keys("model", {"kind", "n", "image", "truth", "sigma_sq", "c1", "c2", "kappa", "data_seed"});
    const double sigma_sq = c.get_or("model.sigma_sq", 0.5);
    std::size_t n = 0;
    std::vector<double> observed;
    if (c.has("model.image")) {
      const auto path = c.existing_path("model.image");
      const Eigen::MatrixXd img = read_matrix_csv(path);
      if (img.rows() != img.cols() || img.rows() < 2) c.fail("model.image", "expected a square image of side >= 2");
      n = static_cast<std::size_t>(img.rows());
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = img;
      observed.assign(rm.data(), rm.data() + rm.size());
      m.meta["image"] = path.string();
    } else {
      n = c.get<std::size_t>("model.n");
      auto data = simulate_heart(n, sigma_sq, data_rng);
      observed = data.observed;
      m.meta["truth_zero_fraction"] = 1.0 - nonzero_fraction(data.truth);
    }
    auto t = structured_sparsity_target(n, observed, sigma_sq, c.get_or("model.c1", 2.0), c.get_or("model.c2", 0.1),
                                        c.get_or("model.kappa", 0.15));
    m.init_x.assign(t->spec().mu.data(), t->spec().mu.data() + t->spec().mu.size());
    m.gaussian = t.get();
    m.target = std::move(t);
    m.meta["n"] = n;
  } else if (m.kind == "logistic") {
    c.check_keys("model", {"kind", "design", "response", "N", "levels", "continuous", "reference_coding",
                           "nonzero_fraction", "sigma0_sq", "w", "data_seed"});
    Eigen::SparseMatrix<double, Eigen::RowMajor> A;
    std::vector<double> y;
    if (c.has("model.design")) {
      A = read_coordinate_list(c.existing_path("model.design"));
      y = read_vector_csv(c.existing_path("model.response"));
      if (y.size() != static_cast<std::size_t>(A.rows())) c.fail("model.response", "length differs from the design rows");
    } else {
      LogisticDesign des;
      des.levels = c.get_or<std::size_t>("model.levels", des.levels);
      des.continuous = c.get_or<std::size_t>("model.continuous", des.continuous);
      des.reference_coding = c.get_or("model.reference_coding", false);
      des.nonzero_fraction = c.get_or("model.nonzero_fraction", des.nonzero_fraction);
      auto data = simulate_logistic(des, c.get<std::size_t>("model.N"), data_rng);
      A = std::move(data.A);
      y = std::move(data.y);
      m.meta["truth_nonzero_fraction"] = nonzero_fraction(data.truth);
    }
    auto t = logistic_target(A, y, c.get_or("model.sigma0_sq", 100.0), c.get_or("model.w", 0.1));
    m.init_x = t->anchor();
    m.target = std::move(t);
    m.meta["N"] = A.rows();
  } else if (m.kind == "precision") {
    c.check_keys("model", {"kind", "data", "p", "N", "sigma0_sq", "w", "data_seed"});
    Eigen::MatrixXd Y;
    if (c.has("model.data")) {
      Y = read_matrix_csv(c.existing_path("model.data"));
    } else {
      Y = simulate_precision(c.get<std::size_t>("model.p"), c.get<std::size_t>("model.N"), data_rng).Y;
    }
    auto t = precision_target(Y, c.get_or("model.sigma0_sq", 10.0), c.get_or("model.w", 0.2));
    const auto p = static_cast<std::size_t>(Y.rows());
    // Lower triangle of a standard normal draw, diagonal folded to be positive.
    m.init_x.resize(t->dim());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j, ++k) {
        m.init_x[k] = std_normal(init_rng);
        if (i == j) m.init_x[k] = std::abs(m.init_x[k]) + 1e-3;
      }
    m.target = std::move(t);
    m.meta["p"] = p;
    m.meta["N"] = Y.cols();
  } else if (m.kind == "boids") {
    c.check_keys("model", {"kind", "path", "dt", "p", "T", "sigma", "lambda", "w", "sigma0_sq", "data_seed"});
    const double lambda = c.get_or("model.lambda", 0.2), sigma = c.get_or("model.sigma", 0.1);
    BoidsPath path;
    double w = 0.0;
    if (c.has("model.path")) {
      const Eigen::MatrixXd states = read_matrix_csv(c.existing_path("model.path"));
      if (states.cols() % 2 != 0 || states.cols() < 4) c.fail("model.path", "expected 2p columns with p >= 2");
      path = BoidsPath{static_cast<std::size_t>(states.cols() / 2), c.get<double>("model.dt"), states};
      w = c.get<double>("model.w");
    } else {
      const auto p = c.get<std::size_t>("model.p");
      const auto truth = boids_truth(p, lambda, data_rng);
      path = simulate_boids(p, lambda, sigma, c.get_or("model.T", 200.0), c.get_or("model.dt", 0.1), truth, data_rng);
      w = c.get_or("model.w", nonzero_fraction(truth));
      m.meta["truth_nonzero_fraction"] = nonzero_fraction(truth);
    }
    auto t = boids_target(path, lambda, sigma, w, c.get_or("model.sigma0_sq", 50.0));
    m.init_x.resize(t->dim());
    for (auto& x : m.init_x) x = 0.1 * std_normal(init_rng);
    m.target = std::move(t);
    m.meta["p"] = path.agents;
  } else {
    c.fail("model.kind", "unknown model kind '" + m.kind + "'");
  }
  m.meta["dim"] = m.target->dim();
  m.meta["target"] = m.target->name();
  return m;
}

enum class SamplerKind { ZigZag, ZigZagSubsampled, RjZigZag, Bps, Boomerang, BoomerangFactorised, Gibbs };

struct SamplerSpec {
  std::string name;
  SamplerKind kind = SamplerKind::ZigZag;
  SamplerConfig cfg;
  std::uint64_t iterations = 1000;
  std::optional<bool> gibbs_sparse;

  bool is_gibbs() const { return kind == SamplerKind::Gibbs; }
  // Process time for PDMPs, iterations for Gibbs.
  double length() const { return is_gibbs() ? static_cast<double>(iterations) : cfg.T; }
};

inline SamplerSpec parse_sampler(const Config& c, const std::string& section, std::uint64_t seed) {
  c.check_keys(section, {"kind", "T", "variant", "refresh_rate", "rj_p", "iterations", "sparse", "record"});
  SamplerSpec s;
  s.name = c.get<std::string>(section + ".kind");
  if (s.name.find(',') != std::string::npos) c.fail(section + ".kind", "exactly one sampler per run");
  static const std::map<std::string, SamplerKind> kinds{{"zigzag", SamplerKind::ZigZag},
                                                        {"zigzag-subsampled", SamplerKind::ZigZagSubsampled},
                                                        {"rj-zigzag", SamplerKind::RjZigZag},
                                                        {"bps", SamplerKind::Bps},
                                                        {"boomerang", SamplerKind::Boomerang},
                                                        {"boomerang-factorised", SamplerKind::BoomerangFactorised},
                                                        {"gibbs", SamplerKind::Gibbs}};
  auto it = kinds.find(s.name);
  if (it == kinds.end()) c.fail(section + ".kind", "unknown sampler '" + s.name + "'");
  s.kind = it->second;
  s.cfg.seed = derive_seed(seed, kSamplerStream);
  s.cfg.record = c.get_or(section + ".record", true);
  if (s.is_gibbs()) {
    s.iterations = c.get_or<std::uint64_t>(section + ".iterations", 1000);
    if (c.has(section + ".sparse")) s.gibbs_sparse = c.get<bool>(section + ".sparse");
    return s;
  }
  s.cfg.T = c.get<double>(section + ".T");
  if (!(s.cfg.T > 0.0)) c.fail(section + ".T", "must be positive");
  try {
    s.cfg.variant = parse_variant(c.get_or<std::string>(section + ".variant", "local"));
  } catch (const std::invalid_argument& e) {
    c.fail(section + ".variant", e.what());
  }
  s.cfg.refresh_rate = c.get_or(section + ".refresh_rate", s.kind == SamplerKind::Bps ? 0.1 : 0.0);
  s.cfg.rj_p = c.get_or(section + ".rj_p", 1.0);
  if (!(s.cfg.rj_p > 0.0 && s.cfg.rj_p <= 1.0)) c.fail(section + ".rj_p", "must lie in (0,1]");
  if (s.cfg.refresh_rate < 0.0) c.fail(section + ".refresh_rate", "must be nonnegative");
  s.cfg.subsampling = s.kind == SamplerKind::ZigZagSubsampled;
  return s;
}

// Full-model start with velocities drawn from the sampler's reference law.
inline StickyState initial_state(const ModelInstance& m, const SamplerSpec& s, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kInitStream + 1000));
  std::vector<double> v(m.init_x.size());
  const bool gaussian_v = s.kind == SamplerKind::Bps || s.kind == SamplerKind::Boomerang ||
                          s.kind == SamplerKind::BoomerangFactorised;
  for (auto& x : v) x = gaussian_v ? std_normal(rng) : (bernoulli(rng, 0.5) ? 1.0 : -1.0);
  return StickyState(m.init_x, v);
}

inline SamplerRun run_pdmp(const ModelInstance& m, const SamplerSpec& s, const StickyState& init,
                           const EventObserver& obs = {}) {
  switch (s.kind) {
    case SamplerKind::ZigZag: return run_sticky_zigzag(*m.target, init, s.cfg, obs);
    case SamplerKind::ZigZagSubsampled: return run_sticky_zigzag_subsampled(*m.target, init, s.cfg, obs);
    case SamplerKind::RjZigZag: return run_rj_zigzag(*m.target, init, s.cfg, obs);
    case SamplerKind::Bps: return run_sticky_bps(*m.target, init, s.cfg, obs);
    case SamplerKind::Boomerang: return run_sticky_boomerang(*m.target, init, s.cfg, {}, obs);
    case SamplerKind::BoomerangFactorised: {
      BoomerangOptions opt;
      opt.factorised = true;
      return run_sticky_boomerang(*m.target, init, s.cfg, opt, obs);
    }
    case SamplerKind::Gibbs: break;
  }
  throw std::logic_error("run_pdmp: Gibbs is not a PDMP");
}

inline GibbsModel gibbs_model(const ModelInstance& m) {
  if (!m.gaussian) throw std::invalid_argument("the Gibbs sampler needs a Gaussian model, not '" + m.kind + "'");
  return GibbsModel::from_target(*m.gaussian);
}

inline GibbsChain run_gibbs_sampler(const ModelInstance& m, const SamplerSpec& s, const GibbsObserver& obs = {}) {
  GibbsOptions opt;
  opt.iterations = s.iterations;
  opt.seed = s.cfg.seed;
  opt.sparse = s.gibbs_sparse;
  opt.record = s.cfg.record;
  opt.support = m.support;
  return run_gibbs(gibbs_model(m), full_model_state(m.init_x), opt, obs);
}

}  // namespace sticky::bench
