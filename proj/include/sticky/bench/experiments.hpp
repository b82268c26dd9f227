#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sticky/bench/config.hpp"
#include "sticky/bench/factory.hpp"
#include "sticky/bench/io.hpp"
#include "sticky/bench/simulate.hpp"
#include "sticky/sticky.hpp"

#ifndef STICKY_GIT_REVISION
#define STICKY_GIT_REVISION "unknown"
#endif

namespace sticky::bench {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline nlohmann::json metadata(const Config& c, const std::string& command, std::uint64_t seed) {
  nlohmann::json j;
  j["command"] = command;
  j["git_revision"] = STICKY_GIT_REVISION;
  j["config_file"] = c.file().filename().string();
  j["config_hash"] = c.hash();
  j["config_version"] = kConfigVersion;
  j["seed"] = seed;
  return j;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

struct Snapshot {
  double budget = 0.0;  // checkpoint position: process time, iterations or wall seconds
  double at = 0.0;      // process time or iteration count reached
  InclusionSummary inclusion;
  double occupation_null = 0.0;
};

inline void write_snapshots_csv(const fs::path& path, const std::vector<Snapshot>& snaps, const std::string& budget_name) {
  auto out = open_output(path);
  out << budget_name << ",at,occupation_null";
  const std::size_t d = snaps.empty() ? 0 : snaps.front().inclusion.p.size();
  for (std::size_t i = 0; i < d; ++i) out << ",p" << i;
  out << '\n';
  for (const auto& s : snaps) {
    out << s.budget << ',' << s.at << ',' << s.occupation_null;
    for (double p : s.inclusion.p) out << ',' << p;
    out << '\n';
  }
}

// Wall-clock checkpointing: the sampler is polled at every event or
// iteration, and a snapshot is taken as each budget is passed.
struct WallSchedule {
  std::vector<double> budgets;  // increasing, seconds
};

// Runs one sampler until the last budget is spent and returns the snapshots.
inline std::vector<Snapshot> run_with_wall_budget(const ModelInstance& m, SamplerSpec s, const WallSchedule& sched) {
  std::vector<Snapshot> snaps;
  if (sched.budgets.empty()) return snaps;
  const std::size_t d = m.target->dim();
  std::size_t next = 0;
  Clock::time_point t0;
  auto take = [&](double at, InclusionSummary inc, double null_occ) {
    const double el = seconds_since(t0);
    while (next < sched.budgets.size() && sched.budgets[next] <= el) {
      snaps.push_back({sched.budgets[next], at, inc, null_occ});
      ++next;
    }
    return next < sched.budgets.size();
  };
  if (s.is_gibbs()) {
    s.iterations = std::numeric_limits<std::uint64_t>::max() / 2;
    s.cfg.record = false;
    std::vector<double> counts(d, 0.0);
    double nulls = 0.0;
    InclusionSummary first{std::vector<double>(d, 1.0), 0.0};
    t0 = Clock::now();
    snaps.push_back({0.0, 0.0, first, 0.0});
    run_gibbs_sampler(m, s, [&](std::uint64_t it, const GibbsState& g) {
      bool null = true;
      for (std::size_t i = 0; i < d; ++i) {
        counts[i] += g.alpha[i];
        null &= !g.alpha[i];
      }
      nulls += null;
      const double n = static_cast<double>(it);
      if (seconds_since(t0) < sched.budgets[next]) return true;
      InclusionSummary inc{counts, n};
      for (auto& p : inc.p) p /= n;
      return take(n, inc, nulls / n);
    });
  } else {
    s.cfg.T = std::numeric_limits<double>::max() / 4;
    s.cfg.record = false;
    const auto init = initial_state(m, s, s.cfg.seed);
    OccupationAccumulator acc(init);
    t0 = Clock::now();
    snaps.push_back({0.0, init.t, acc.inclusion(init.t), acc.null_occupation(init.t)});
    run_pdmp(m, s, init, [&](const StickyState& st, const EventRecord& e) {
      acc.observe(st, e);
      if (seconds_since(t0) < sched.budgets[next]) return true;
      return take(e.t, acc.inclusion(e.t), acc.null_occupation(e.t));
    });
  }
  // Budgets the run did not reach repeat the final estimate.
  while (snaps.size() < sched.budgets.size() + 1 && !snaps.empty()) {
    auto last = snaps.back();
    last.budget = sched.budgets[snaps.size() - 1];
    snaps.push_back(last);
  }
  return snaps;
}

// [checkpoints] at = list of process times (or iterations for Gibbs).
inline std::vector<double> checkpoint_list(const Config& c) {
  auto at = c.list_or("checkpoints.at", {});
  for (std::size_t k = 0; k < at.size(); ++k) {
    if (!(at[k] >= 0.0)) c.fail("checkpoints.at", "checkpoints must be nonnegative");
    if (k > 0 && !(at[k] > at[k - 1])) c.fail("checkpoints.at", "checkpoints must be strictly increasing");
  }
  return at;
}

inline WallSchedule wall_schedule(const Config& c) {
  WallSchedule w;
  w.budgets = c.list_or("checkpoints.wall", {});
  for (std::size_t k = 0; k < w.budgets.size(); ++k) {
    if (!(w.budgets[k] > 0.0)) c.fail("checkpoints.wall", "budgets must be positive");
    if (k > 0 && !(w.budgets[k] > w.budgets[k - 1])) c.fail("checkpoints.wall", "budgets must be strictly increasing");
  }
  return w;
}

struct RunOutputs {
  fs::path dir;
  nlohmann::json summary;
};

// Writes skeleton.csv or chain.csv, summary.json, checkpoints.csv and
// metadata.json; all are deterministic given config and seed. Wall-clock
// snapshots, if requested, go to wall_checkpoints.csv.
inline RunOutputs run_experiment(const Config& c, std::uint64_t seed, const fs::path& out_dir) {
  c.check_keys("output", {"dir"});
  c.check_keys("checkpoints", {"at", "wall"});
  if (c.has_section("sampler_a") || c.has_section("sampler_b"))
    c.fail("sampler_a", "run takes exactly one [sampler] section");
  const auto m = build_model(c, seed);
  const auto s = parse_sampler(c, "sampler", seed);
  const auto at = checkpoint_list(c);
  if (!at.empty() && at.back() > s.length()) c.fail("checkpoints.at", "checkpoint beyond the end of the run");
  const std::size_t d = m.target->dim();
  fs::create_directories(out_dir);
  RunOutputs res{out_dir, {}};
  std::vector<Snapshot> snaps;
  auto meta = metadata(c, "run", seed);
  meta["model"] = m.meta;
  meta["sampler"] = s.name;

  if (s.is_gibbs()) {
    std::vector<double> counts(d, 0.0);
    double nulls = 0.0;
    std::size_t next = 0;
    auto snap = [&](double it) {
      InclusionSummary inc{std::vector<double>(d, 1.0), it};
      if (it > 0)
        for (std::size_t i = 0; i < d; ++i) inc.p[i] = counts[i] / it;
      snaps.push_back({at[next], it, inc, it > 0 ? nulls / it : 0.0});
      ++next;
    };
    while (next < at.size() && at[next] == 0.0) snap(0.0);
    auto chain = run_gibbs_sampler(m, s, [&](std::uint64_t it, const GibbsState& g) {
      bool null = true;
      for (std::size_t i = 0; i < d; ++i) {
        counts[i] += g.alpha[i];
        null &= !g.alpha[i];
      }
      nulls += null;
      while (next < at.size() && at[next] <= static_cast<double>(it)) snap(static_cast<double>(it));
      return true;
    });
    if (s.cfg.record) {
      auto out = open_output(out_dir / "chain.csv");
      write_chain_csv(out, chain);
    }
    const auto inc = gibbs_inclusion(chain);
    EventCounts none;
    res.summary = summary_json(inc, chain.iterations ? static_cast<double>(chain.null_count) / chain.iterations : 0.0,
                               none, 1.0);
    res.summary["iterations"] = chain.iterations;
    res.summary["flops"] = chain.flops;
  } else {
    const auto init = initial_state(m, s, seed);
    OccupationAccumulator acc(init);
    std::size_t next = 0;
    auto run = run_pdmp(m, s, init, [&](const StickyState& st, const EventRecord& e) {
      while (next < at.size() && at[next] < e.t) {
        snaps.push_back({at[next], at[next], acc.inclusion(at[next]), acc.null_occupation(at[next])});
        ++next;
      }
      acc.observe(st, e);
      return true;
    });
    for (; next < at.size() && at[next] <= run.skeleton.T; ++next)
      snaps.push_back({at[next], at[next], acc.inclusion(at[next]), acc.null_occupation(at[next])});
    if (s.cfg.record) {
      auto out = open_output(out_dir / "skeleton.csv");
      write_skeleton_csv(out, run.skeleton);
      res.summary = summary_json(run.skeleton, run.stats);
    } else {
      res.summary = summary_json(acc.inclusion(run.skeleton.T), acc.null_occupation(run.skeleton.T), run.skeleton.counts,
                                 run.stats.acceptance_ratio(run.skeleton.counts));
    }
    res.summary["clock_recomputations"] = run.stats.clock_recomputations;
  }
  res.summary["model"] = m.meta;
  res.summary["sampler"] = s.name;
  write_json(out_dir / "summary.json", res.summary);
  if (!at.empty()) write_snapshots_csv(out_dir / "checkpoints.csv", snaps, "checkpoint");
  const auto wall = wall_schedule(c);
  if (!wall.budgets.empty()) {
    write_snapshots_csv(out_dir / "wall_checkpoints.csv", run_with_wall_budget(m, s, wall), "seconds");
    meta["wall_checkpoints"] = "wall_checkpoints.csv depends on machine speed and is not reproducible";
  }
  write_json(out_dir / "metadata.json", meta);
  return res;
}

// Mean and standard deviation over replicates of E(c) = sum_i (p_i(c) - pbar_i)^2.
struct CurveBand {
  std::vector<double> budget, mean, sd;
  std::vector<std::vector<double>> replicates;
};

inline CurveBand error_band(const std::vector<std::vector<Snapshot>>& runs, const InclusionSummary& reference) {
  CurveBand b;
  for (const auto& snaps : runs) {
    std::vector<std::pair<double, InclusionSummary>> pts;
    for (const auto& s : snaps) pts.emplace_back(s.budget, s.inclusion);
    const auto curve = squared_error_curve(pts, reference);
    if (b.budget.empty()) b.budget = curve.budget;
    b.replicates.push_back(curve.value);
  }
  const std::size_t n = b.budget.size();
  b.mean.assign(n, 0.0);
  b.sd.assign(n, 0.0);
  const auto r = static_cast<double>(b.replicates.size());
  for (const auto& v : b.replicates)
    for (std::size_t k = 0; k < n; ++k) b.mean[k] += v[k] / r;
  if (b.replicates.size() > 1) {
    for (const auto& v : b.replicates)
      for (std::size_t k = 0; k < n; ++k) b.sd[k] += (v[k] - b.mean[k]) * (v[k] - b.mean[k]) / (r - 1.0);
    for (auto& s : b.sd) s = std::sqrt(s);
  }
  return b;
}

inline void write_band_csv(const fs::path& path, const CurveBand& b) {
  auto out = open_output(path);
  out << "seconds,mean,sd";
  for (std::size_t r = 0; r < b.replicates.size(); ++r) out << ",rep" << r;
  out << '\n';
  for (std::size_t k = 0; k < b.budget.size(); ++k) {
    out << b.budget[k] << ',' << b.mean[k] << ',' << b.sd[k];
    for (const auto& v : b.replicates) out << ',' << v[k];
    out << '\n';
  }
}

struct CompareResult {
  InclusionSummary reference;
  CurveBand a, b;
  std::string name_a, name_b;
};

// [compare] budget (s), points, replicates, reference_length; samplers in
// [sampler_a] and [sampler_b]; the reference run uses sampler_a scaled to
// reference_length (process time or iterations).
inline CompareResult compare_samplers(const Config& c, std::uint64_t seed, const fs::path& out_dir) {
  c.check_keys("compare", {"budget", "points", "replicates", "reference_length"});
  c.check_keys("output", {"dir"});
  if (c.has_section("sampler")) c.fail("sampler", "compare takes [sampler_a] and [sampler_b]");
  const auto m = build_model(c, seed);
  const double budget = c.get<double>("compare.budget");
  const auto points = c.get_or<std::size_t>("compare.points", 50);
  const auto reps = c.get_or<std::size_t>("compare.replicates", 3);
  if (!(budget > 0.0)) c.fail("compare.budget", "must be positive");
  if (points < 1) c.fail("compare.points", "need at least one point");
  if (reps < 1) c.fail("compare.replicates", "need at least one replicate");
  WallSchedule sched;
  for (std::size_t k = 1; k <= points; ++k) sched.budgets.push_back(budget * static_cast<double>(k) / static_cast<double>(points));

  CompareResult res;
  auto ref_spec = parse_sampler(c, "sampler_a", derive_seed(seed, kReplicateStream));
  const double ref_len = c.get<double>("compare.reference_length");
  ref_spec.cfg.record = false;
  if (ref_spec.is_gibbs()) {
    ref_spec.iterations = static_cast<std::uint64_t>(ref_len);
    ref_spec.cfg.record = false;
    res.reference = gibbs_inclusion(run_gibbs_sampler(m, ref_spec));
  } else {
    ref_spec.cfg.T = ref_len;
    const auto init = initial_state(m, ref_spec, ref_spec.cfg.seed);
    OccupationAccumulator acc(init);
    auto run = run_pdmp(m, ref_spec, init, acc.observer());
    res.reference = acc.inclusion(run.skeleton.T);
  }
  auto band = [&](const std::string& section) {
    std::vector<std::vector<Snapshot>> runs;
    std::string name;
    for (std::size_t r = 0; r < reps; ++r) {
      auto s = parse_sampler(c, section, derive_seed(seed, 1000 + r));
      name = s.name;
      runs.push_back(run_with_wall_budget(m, s, sched));
    }
    return std::make_pair(name, error_band(runs, res.reference));
  };
  std::tie(res.name_a, res.a) = band("sampler_a");
  std::tie(res.name_b, res.b) = band("sampler_b");

  fs::create_directories(out_dir);
  write_band_csv(out_dir / "curve_a.csv", res.a);
  write_band_csv(out_dir / "curve_b.csv", res.b);
  write_vector_csv(out_dir / "reference_inclusion.csv", res.reference.p);
  auto meta = metadata(c, "compare", seed);
  meta["model"] = m.meta;
  meta["sampler_a"] = res.name_a;
  meta["sampler_b"] = res.name_b;
  meta["note"] = "curves are indexed by wall-clock seconds and depend on machine speed";
  write_json(out_dir / "metadata.json", meta);
  return res;
}

// Centred moving average with a window shrunk at the edges.
inline std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  const auto h = static_cast<std::ptrdiff_t>(window / 2);
  const auto n = static_cast<std::ptrdiff_t>(v.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto a = std::max<std::ptrdiff_t>(0, k - h), b = std::min<std::ptrdiff_t>(n - 1, k + h);
    double s = 0.0;
    for (auto j = a; j <= b; ++j) s += v[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(k)] = s / static_cast<double>(b - a + 1);
  }
  return out;
}

// Writes data files plus truth.json for [simulate] kind = heart | logistic | precision | boids.
inline nlohmann::json simulate_data(const Config& c, std::uint64_t seed, const fs::path& out_dir) {
  c.check_keys("simulate", {"kind", "n", "sigma_sq", "N", "levels", "continuous", "reference_coding", "nonzero_fraction",
                            "p", "T", "dt", "sigma", "lambda", "x_true"});
  c.check_keys("output", {"dir"});
  const auto kind = c.get<std::string>("simulate.kind");
  Rng rng(derive_seed(seed, kDataStream));
  fs::create_directories(out_dir);
  nlohmann::json truth;
  truth["kind"] = kind;
  truth["seed"] = seed;
  if (kind == "heart") {
    const auto n = c.get<std::size_t>("simulate.n");
    const auto d = simulate_heart(n, c.get_or("simulate.sigma_sq", 0.5), rng);
    const auto as_grid = [n](const std::vector<double>& v) {
      Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < n; ++k) g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v[r * n + k];
      return g;
    };
    write_matrix_csv(out_dir / "image.csv", as_grid(d.observed));
    write_matrix_csv(out_dir / "truth.csv", as_grid(d.truth));
    truth["files"] = {"image.csv", "truth.csv"};
    truth["n"] = n;
    truth["zero_fraction"] = 1.0 - nonzero_fraction(d.truth);
    truth["x"] = d.truth;
  } else if (kind == "logistic") {
    LogisticDesign des;
    des.levels = c.get_or<std::size_t>("simulate.levels", des.levels);
    des.continuous = c.get_or<std::size_t>("simulate.continuous", des.continuous);
    des.reference_coding = c.get_or("simulate.reference_coding", false);
    des.nonzero_fraction = c.get_or("simulate.nonzero_fraction", des.nonzero_fraction);
    const auto d = simulate_logistic(des, c.get<std::size_t>("simulate.N"), rng);
    write_coordinate_list(out_dir / "design.txt", d.A);
    write_vector_csv(out_dir / "response.csv", d.y);
    truth["files"] = {"design.txt", "response.csv"};
    truth["dim"] = des.dim();
    truth["nonzero_fraction"] = nonzero_fraction(d.truth);
    truth["x"] = d.truth;
  } else if (kind == "precision") {
    const auto p = c.get<std::size_t>("simulate.p");
    const auto d = simulate_precision(p, c.get<std::size_t>("simulate.N"), rng);
    write_matrix_csv(out_dir / "data.csv", d.Y);
    std::vector<double> lower;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) lower.push_back(d.truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    truth["files"] = {"data.csv"};
    truth["p"] = p;
    truth["x"] = lower;
    truth["nonzero_fraction"] = nonzero_fraction(lower);
  } else if (kind == "boids") {
    const auto p = c.get<std::size_t>("simulate.p");
    const double lambda = c.get_or("simulate.lambda", 0.2);
    std::vector<double> x;
    if (c.has("simulate.x_true")) {
      x = c.list("simulate.x_true");
      if (x.size() != p * (p - 1)) c.fail("simulate.x_true", "expected p(p-1) values");
    } else {
      x = boids_truth(p, lambda, rng);
    }
    const double dt = c.get_or("simulate.dt", 0.1);
    const auto path = simulate_boids(p, lambda, c.get_or("simulate.sigma", 0.1), c.get_or("simulate.T", 200.0), dt, x, rng);
    write_matrix_csv(out_dir / "path.csv", path.states);
    truth["files"] = {"path.csv"};
    truth["p"] = p;
    truth["dt"] = dt;
    truth["lambda"] = lambda;
    truth["x"] = x;
    truth["nonzero_fraction"] = nonzero_fraction(x);
  } else {
    c.fail("simulate.kind", "unknown data kind '" + kind + "'");
  }
  write_json(out_dir / "truth.json", truth);
  auto meta = metadata(c, "simulate-data", seed);
  write_json(out_dir / "metadata.json", meta);
  return truth;
}

}  // namespace sticky::bench
