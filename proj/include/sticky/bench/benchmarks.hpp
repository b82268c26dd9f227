#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "sticky/bench/experiments.hpp"
#include "sticky/bench/fit.hpp"
#include "sticky/bench/scenarios.hpp"
#include "sticky/bench/simulate.hpp"
#include "sticky/sticky.hpp"

namespace sticky::bench {

// Runs f(0..n-1) on up to `threads` workers; f writes only its own slot.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t k; (k = next++) < n;) {
        try {
          f(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ScalingPoint {
  double size = 0.0;
  double seconds = 0.0;  // median over replicates of the sampling loop alone
  double flops = 0.0;    // Gibbs factorisation and solve count, zero for PDMPs
  std::uint64_t events = 0;
  std::uint64_t reflections = 0;
};

struct ScalingReport {
  std::string family;
  std::vector<ScalingPoint> points;
  LineFit fit;        // log seconds against log size
  LineFit flops_fit;  // log flops against log size, Gibbs only
  double reference_slope = 0.0;
  double tolerance = 0.0;
  nlohmann::json meta;

  bool within_tolerance() const { return std::abs(fit.slope - reference_slope) <= tolerance; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["family"] = family;
    for (const auto& p : points)
      j["points"].push_back({{"size", p.size}, {"seconds", p.seconds}, {"flops", p.flops}, {"events", p.events},
                             {"reflections", p.reflections}});
    j["slope"] = fit.slope;
    j["slope_se"] = fit.slope_se;
    if (flops_fit.slope != 0.0) {
      j["flops_slope"] = flops_fit.slope;
      j["flops_slope_se"] = flops_fit.slope_se;
    }
    j["reference_slope"] = reference_slope;
    j["tolerance"] = tolerance;
    j["within_tolerance"] = within_tolerance();
    j["meta"] = meta;
    return j;
  }
};

struct ScalingOptions {
  std::vector<double> sizes;
  double T = 30.0;                  // PDMP horizon
  std::uint64_t iterations = 1000;  // Gibbs iterations
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  ZigZagVariant variant = ZigZagVariant::Sparse;
  // Shrink the logistic horizon as T sqrt(N_0 / N), following the posterior width.
  bool posterior_scaled_horizon = false;
};

inline void finish_report(ScalingReport& r) {
  if (r.points.size() < 4) throw std::invalid_argument("bench_scaling: need at least four sizes");
  for (std::size_t k = 1; k < r.points.size(); ++k)
    if (!(r.points[k].size > r.points[k - 1].size)) throw std::invalid_argument("bench_scaling: sizes must increase");
  std::vector<double> x, y, f;
  for (const auto& p : r.points) {
    x.push_back(p.size);
    y.push_back(p.seconds);
    f.push_back(p.flops);
  }
  r.fit = fit_loglog(x, y);
  if (std::all_of(f.begin(), f.end(), [](double v) { return v > 0.0; })) r.flops_fit = fit_loglog(x, f);
}

// Heart image of side n, size n^2; the sampler starts at the full-model posterior mean.
inline ScalingReport scaling_structured_zigzag(const ScalingOptions& o) {
  ScalingReport r{"structured-zigzag", {}, {}, {}, 1.0, 0.3, {}};
  r.meta = {{"T", o.T}, {"variant", to_string(o.variant)}, {"replicates", o.replicates}};
  for (double side : o.sizes) {
    const auto n = static_cast<std::size_t>(side);
    std::vector<double> secs;
    ScalingPoint pt{static_cast<double>(n * n), 0, 0, 0, 0};
    for (std::size_t rep = 0; rep < o.replicates; ++rep) {
      Rng rng(derive_seed(o.seed + rep, kDataStream + n));
      const auto img = simulate_heart(n, 0.5, rng);
      const auto t = structured_sparsity_target(n, img.observed, 0.5, 2.0, 0.1, 0.15);
      std::vector<double> x(t->spec().mu.data(), t->spec().mu.data() + t->spec().mu.size()), v(x.size());
      for (auto& vi : v) vi = bernoulli(rng, 0.5) ? 1.0 : -1.0;
      SamplerConfig cfg;
      cfg.T = o.T;
      cfg.seed = derive_seed(o.seed + rep, kSamplerStream);
      cfg.variant = o.variant;
      cfg.record = false;
      const StickyState init(x, v);
      const auto t0 = Clock::now();
      const auto run = run_sticky_zigzag(*t, init, cfg);
      secs.push_back(seconds_since(t0));
      pt.events += run.skeleton.counts.reflect + run.skeleton.counts.freeze + run.skeleton.counts.thaw + run.skeleton.counts.shadow;
      pt.reflections += run.skeleton.counts.reflect;
    }
    pt.seconds = median(secs);
    r.points.push_back(pt);
  }
  finish_report(r);
  return r;
}

inline ScalingReport scaling_structured_gibbs(const ScalingOptions& o) {
  ScalingReport r{"structured-gibbs", {}, {}, {}, 1.5, 0.3, {}};
  r.meta = {{"iterations", o.iterations}, {"replicates", o.replicates}, {"factorisation", "sparse Cholesky, AMD ordering of the full grid"}};
  for (double side : o.sizes) {
    const auto n = static_cast<std::size_t>(side);
    std::vector<double> secs;
    ScalingPoint pt{static_cast<double>(n * n), 0, 0, 0, 0};
    for (std::size_t rep = 0; rep < o.replicates; ++rep) {
      Rng rng(derive_seed(o.seed + rep, kDataStream + n));
      const auto img = simulate_heart(n, 0.5, rng);
      const auto t = structured_sparsity_target(n, img.observed, 0.5, 2.0, 0.1, 0.15);
      GibbsOptions opt;
      opt.iterations = o.iterations;
      opt.seed = derive_seed(o.seed + rep, kSamplerStream);
      opt.sparse = true;
      opt.record = false;
      GibbsSampler g(GibbsModel::from_target(*t), opt);
      const auto init = full_model_state(std::span<const double>(t->spec().mu.data(), static_cast<std::size_t>(t->spec().mu.size())));
      const auto t0 = Clock::now();
      const auto chain = g.run(init);
      secs.push_back(seconds_since(t0));
      pt.flops += chain.flops / static_cast<double>(o.replicates);
      pt.events += chain.iterations;
    }
    pt.seconds = median(secs);
    r.points.push_back(pt);
  }
  finish_report(r);
  return r;
}

// Two two-level categorical features with their interaction and five
// continuous ones, treatment coded: d = 1 + 1 + 1 + 1 + 5 = 9.
inline LogisticDesign small_logistic_design() {
  LogisticDesign des;
  des.levels = 2;
  des.continuous = 5;
  des.reference_coding = true;
  return des;
}

inline ScalingReport scaling_logistic_zigzag(const ScalingOptions& o) {
  ScalingReport r{"logistic-zigzag", {}, {}, {}, 0.0, 0.2, {}};
  const auto des = small_logistic_design();
  r.meta = {{"T", o.T}, {"dim", des.dim()}, {"replicates", o.replicates}, {"timed", "sampling loop after the mode search"},
            {"horizon", o.posterior_scaled_horizon ? "posterior-scaled" : "fixed"}};
  for (double size : o.sizes) {
    const auto N = static_cast<std::size_t>(size);
    std::vector<double> secs;
    ScalingPoint pt{static_cast<double>(N), 0, 0, 0, 0};
    for (std::size_t rep = 0; rep < o.replicates; ++rep) {
      // The truth is drawn first, so it is shared across N for a given replicate.
      Rng rng(derive_seed(o.seed + rep, kDataStream));
      const auto data = simulate_logistic(des, N, rng);
      const auto t = logistic_target(data.A, data.y, 100.0, 0.1);
      std::vector<double> v(t->dim());
      for (auto& vi : v) vi = bernoulli(rng, 0.5) ? 1.0 : -1.0;
      SamplerConfig cfg;
      cfg.T = o.posterior_scaled_horizon ? o.T * std::sqrt(o.sizes.front() / size) : o.T;
      cfg.seed = derive_seed(o.seed + rep, kSamplerStream);
      cfg.variant = o.variant;
      cfg.record = false;
      const StickyState init(t->anchor(), v);
      const auto t0 = Clock::now();
      const auto run = run_sticky_zigzag_subsampled(*t, init, cfg);
      secs.push_back(seconds_since(t0));
      pt.events += run.skeleton.counts.reflect + run.skeleton.counts.freeze + run.skeleton.counts.thaw + run.skeleton.counts.shadow;
      pt.reflections += run.skeleton.counts.reflect;
    }
    pt.seconds = median(secs);
    r.points.push_back(pt);
  }
  finish_report(r);
  return r;
}

// Gaussian-model Gibbs standing in for a Polya-Gamma Gibbs sampler: every
// iteration makes one pass over the data to rebuild the working Gaussian
// (iteratively reweighted least squares at the current x), then takes one
// spike-and-slab Gibbs step under it.
struct SurrogateRun {
  GibbsState state;
  std::uint64_t iterations = 0;
};

inline SurrogateRun run_logistic_gibbs_surrogate(const LogisticData& data, double sigma0_sq, double w,
                                                 std::uint64_t iterations, std::uint64_t seed) {
  const auto& A = data.A;
  const auto d = static_cast<std::size_t>(A.cols());
  const Eigen::Index D = A.cols();
  const std::vector<double> kappa(d, kappa_from_prior(w, normal_density(0.0, 0.0, sigma0_sq)));
  GibbsState s = full_model_state(std::vector<double>(d, 0.0));
  SurrogateRun out;
  for (std::uint64_t it = 0; it < iterations; ++it) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(D, D) / sigma0_sq;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(D);
    for (Eigen::Index j = 0; j < A.outerSize(); ++j) {
      double eta = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator a(A, j); a; ++a) eta += a.value() * s.x[a.col()];
      const double p = logistic(eta);
      const double om = std::max(p * (1.0 - p), 1e-8);
      const double z = eta + (data.y[static_cast<std::size_t>(j)] - p) / om;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator a(A, j); a; ++a) {
        h[a.col()] += om * z * a.value();
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator b(A, j); b; ++b)
          G(a.col(), b.col()) += om * a.value() * b.value();
      }
    }
    GibbsModel model{to_sparse(G), h, kappa, nullptr};
    GibbsOptions opt;
    opt.iterations = 1;
    opt.seed = derive_seed(seed, it);
    opt.sparse = false;
    opt.record = false;
    GibbsSampler g(model, opt);
    g.run(s, [&](std::uint64_t, const GibbsState& next) {
      s = next;
      return true;
    });
    out.iterations = it + 1;
  }
  out.state = s;
  return out;
}

inline ScalingReport scaling_logistic_gibbs_surrogate(const ScalingOptions& o) {
  ScalingReport r{"logistic-gibbs-surrogate", {}, {}, {}, 1.0, 0.2, {}};
  const auto des = small_logistic_design();
  r.meta = {{"iterations", o.iterations}, {"dim", des.dim()}, {"replicates", o.replicates},
            {"surrogate", "Gaussian working-model Gibbs with one O(pN) data pass per iteration, not a Polya-Gamma sampler"}};
  for (double size : o.sizes) {
    const auto N = static_cast<std::size_t>(size);
    std::vector<double> secs;
    ScalingPoint pt{static_cast<double>(N), 0, 0, 0, 0};
    for (std::size_t rep = 0; rep < o.replicates; ++rep) {
      Rng rng(derive_seed(o.seed + rep, kDataStream));
      const auto data = simulate_logistic(des, N, rng);
      const auto t0 = Clock::now();
      const auto run = run_logistic_gibbs_surrogate(data, 100.0, 0.1, o.iterations, derive_seed(o.seed + rep, kSamplerStream));
      secs.push_back(seconds_since(t0));
      pt.events += run.iterations;
    }
    pt.seconds = median(secs);
    r.points.push_back(pt);
  }
  finish_report(r);
  return r;
}

inline ScalingReport bench_scaling(const std::string& family, const ScalingOptions& o) {
  if (family == "structured-zigzag") return scaling_structured_zigzag(o);
  if (family == "structured-gibbs") return scaling_structured_gibbs(o);
  if (family == "logistic-zigzag") return scaling_logistic_zigzag(o);
  if (family == "logistic-gibbs-surrogate") return scaling_logistic_gibbs_surrogate(o);
  throw std::invalid_argument("bench_scaling: unknown family '" + family + "'");
}

inline void write_scaling_csv(const fs::path& path, const ScalingReport& r) {
  auto out = open_output(path);
  out << "size,seconds,flops,events,reflections\n";
  for (const auto& p : r.points) out << p.size << ',' << p.seconds << ',' << p.flops << ',' << p.events << ',' << p.reflections << '\n';
}

// Null-model hitting times from the full model, x(0) ~ N(0, I).
struct HittingRow {
  std::size_t d = 0;
  double mean = 0.0;
  double se = 0.0;
  double reference = 0.0;  // theoretical growth curve evaluated at d (unnormalised)
  std::size_t replicates = 0;
  std::size_t censored = 0;  // replicates that never reached the null model
};

struct HittingSeries {
  std::string sampler;  // "zigzag" (process time) or "gibbs" (iterations)
  std::vector<HittingRow> rows;
  LineFit fit;
  double reference_slope = 0.0;
  double tolerance = 0.0;
  bool within_tolerance() const { return std::abs(fit.slope - reference_slope) <= tolerance; }
};

struct HittingReport {
  int scenario = 1;
  ScenarioParams params;
  HittingSeries zigzag, gibbs;
  LineFit zigzag_vs_log_d;  // time against log d, scenario 1

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario;
    j["construction"] = scenario == 1
                            ? "independent N(0, 1/gamma) coordinates, stickiness kappa, supported on every sub-model"
                            : "independent N(0, 1/gamma) coordinates restricted to the nested sub-models {0..k-1}";
    j["gamma"] = params.gamma;
    j["kappa"] = params.kappa;
    for (const auto* s : {&zigzag, &gibbs}) {
      nlohmann::json js;
      for (const auto& r : s->rows)
        js["rows"].push_back({{"d", r.d}, {"mean", r.mean}, {"se", r.se}, {"reference", r.reference},
                              {"replicates", r.replicates}, {"censored", r.censored}});
      js["slope"] = s->fit.slope;
      js["slope_se"] = s->fit.slope_se;
      js["reference_slope"] = s->reference_slope;
      js["tolerance"] = s->tolerance;
      js["within_tolerance"] = s->within_tolerance();
      j[s->sampler] = js;
    }
    if (scenario == 1) j["zigzag_slope_vs_log_d"] = zigzag_vs_log_d.slope;
    return j;
  }
};

struct HittingOptions {
  int scenario = 1;
  std::vector<std::size_t> dims;
  std::size_t replicates = 50;
  ScenarioParams params;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double max_time = 1e6;               // process-time cap per replicate
  std::uint64_t max_iterations = 1e8;  // Gibbs cap per replicate
};

inline double harmonic(std::size_t d) {
  double h = 0.0;
  for (std::size_t i = 1; i <= d; ++i) h += 1.0 / static_cast<double>(i);
  return h;
}

// Growth curves: scenario 1 log d (sticky) and d H_d (Gibbs); scenario 2 d and d^2.
inline double hitting_reference(int scenario, bool gibbs, std::size_t d) {
  const auto x = static_cast<double>(d);
  if (scenario == 1) return gibbs ? x * harmonic(d) : std::log(x);
  return gibbs ? x * x : x;
}

inline HittingReport bench_hitting(const HittingOptions& o) {
  if (o.scenario != 1 && o.scenario != 2) throw std::invalid_argument("bench_hitting: scenario must be 1 or 2");
  if (o.dims.size() < 3) throw std::invalid_argument("bench_hitting: need at least three dimensions");
  if (o.replicates < 2) throw std::invalid_argument("bench_hitting: need at least two replicates");
  HittingReport rep;
  rep.scenario = o.scenario;
  rep.params = o.params;
  rep.zigzag.sampler = "zigzag";
  rep.gibbs.sampler = "gibbs";
  for (std::size_t d : o.dims) {
    std::unique_ptr<GaussianTarget> target;
    std::function<bool(const Membership&)> support;
    if (o.scenario == 1) {
      target = every_model_target(d, o.params);
    } else {
      target = std::make_unique<NestedChainTarget>(d, o.params);
      support = nested_support;
    }
    const auto model = GibbsModel::from_target(*target);
    std::vector<double> zz(o.replicates, -1.0), gb(o.replicates, -1.0);
    parallel_for(o.replicates, o.threads, [&](std::size_t r) {
      Rng rng(derive_seed(o.seed, d * 1000003ull + r));
      std::vector<double> x(d), v(d);
      for (auto& a : x) a = std_normal(rng);
      for (auto& a : v) a = bernoulli(rng, 0.5) ? 1.0 : -1.0;
      SamplerConfig cfg;
      cfg.T = o.max_time;
      cfg.seed = derive_seed(o.seed, d * 1000003ull + r + 500000);
      cfg.record = false;
      run_sticky_zigzag(*target, StickyState(x, v), cfg, [&](const StickyState& s, const EventRecord& e) {
        if (s.frozen_count() < s.dim()) return true;
        zz[r] = e.t;
        return false;
      });
      GibbsOptions go;
      go.iterations = o.max_iterations;
      go.seed = cfg.seed;
      go.record = false;
      go.support = support;
      run_gibbs(model, full_model_state(x), go, [&](std::uint64_t it, const GibbsState& g) {
        for (auto a : g.alpha)
          if (a) return true;
        gb[r] = static_cast<double>(it);
        return false;
      });
    });
    for (auto [series, vals] : {std::pair{&rep.zigzag, &zz}, std::pair{&rep.gibbs, &gb}}) {
      HittingRow row{d, 0, 0, hitting_reference(o.scenario, series == &rep.gibbs, d), 0, 0};
      std::vector<double> ok;
      for (double v : *vals) {
        if (v < 0.0) {
          ++row.censored;
        } else {
          ok.push_back(v);
        }
      }
      row.replicates = ok.size();
      if (ok.size() < 2) throw std::runtime_error("bench_hitting: too few replicates reached the null model");
      for (double v : ok) row.mean += v / static_cast<double>(ok.size());
      double var = 0.0;
      for (double v : ok) var += (v - row.mean) * (v - row.mean) / static_cast<double>(ok.size() - 1);
      row.se = std::sqrt(var / static_cast<double>(ok.size()));
      series->rows.push_back(row);
    }
  }
  for (auto* s : {&rep.zigzag, &rep.gibbs}) {
    std::vector<double> x, y, ref;
    for (const auto& r : s->rows) {
      x.push_back(static_cast<double>(r.d));
      y.push_back(r.mean);
      ref.push_back(r.reference);
    }
    s->fit = fit_loglog(x, y);
    const bool gibbs = s == &rep.gibbs;
    if (o.scenario == 1 && !gibbs) {
      // Logarithmic growth is polynomial of order zero.
      s->reference_slope = 0.0;
      s->tolerance = 0.2;
      std::vector<double> logd;
      for (double v : x) logd.push_back(std::log(v));
      rep.zigzag_vs_log_d = fit_line(logd, y);
    } else {
      s->reference_slope = fit_loglog(x, ref).slope;
      s->tolerance = gibbs ? 0.4 : 0.3;
    }
  }
  return rep;
}

inline void write_hitting_csv(const fs::path& path, const HittingReport& r) {
  auto out = open_output(path);
  out << "sampler,d,mean,se,reference,replicates,censored\n";
  for (const auto* s : {&r.zigzag, &r.gibbs})
    for (const auto& row : s->rows)
      out << s->sampler << ',' << row.d << ',' << row.mean << ',' << row.se << ',' << row.reference << ',' << row.replicates
          << ',' << row.censored << '\n';
}

// Reflections per unit time against the size of the active set. Of d
// independent standard Gaussian coordinates, p have mean far from zero and
// stay active; the rest start frozen and thaw at rate kappa.
struct ReflectionRate {
  std::size_t p = 0;
  double mean_active = 0.0;
  double reflections_per_time = 0.0;
};

inline std::vector<ReflectionRate> reflection_rates(const std::vector<std::size_t>& ps, std::size_t d, double T,
                                                    double kappa, std::uint64_t seed) {
  std::vector<ReflectionRate> out;
  for (std::size_t p : ps) {
    if (p > d) throw std::invalid_argument("reflection_rates: p exceeds d");
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < p; ++i) mu[static_cast<Eigen::Index>(i)] = 8.0;
    auto t = gaussian_target(make_gaussian_spec(Eigen::MatrixXd::Identity(mu.size(), mu.size()), mu, std::vector<double>(d, kappa)));
    Rng rng(derive_seed(seed, p));
    std::vector<double> x(d, 0.0), v(d);
    for (std::size_t i = 0; i < p; ++i) x[i] = mu[static_cast<Eigen::Index>(i)];
    for (auto& vi : v) vi = bernoulli(rng, 0.5) ? 1.0 : -1.0;
    StickyState init(x, v);
    for (std::size_t i = p; i < d; ++i) init.frozen[i] = 1;
    SamplerConfig cfg;
    cfg.T = T;
    cfg.seed = derive_seed(seed, p + 7);
    cfg.record = false;
    OccupationAccumulator acc(init);
    const auto run = run_sticky_zigzag(*t, init, cfg, acc.observer());
    const auto inc = acc.inclusion(run.skeleton.T);
    double active = 0.0;
    for (double q : inc.p) active += q;
    out.push_back({p, active, static_cast<double>(run.skeleton.counts.reflect) / T});
  }
  return out;
}

}  // namespace sticky::bench
