#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sticky/bench/benchmarks.hpp"
#include "sticky/bench/config.hpp"
#include "sticky/bench/experiments.hpp"

namespace sb = sticky::bench;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 1;
};

std::uint64_t resolve_seed(const sb::Config& c, const Globals& g) {
  return g.seed ? *g.seed : c.get_or<std::uint64_t>("seed", 1);
}

sb::fs::path resolve_out(const sb::Config& c, const Globals& g) {
  if (g.out) return *g.out;
  return c.get_or<std::string>("output.dir", "out");
}

void check_globals(const sb::Config& c) { c.check_keys("output", {"dir"}); }

int cmd_run(const std::string& file, const Globals& g) {
  const auto c = sb::Config::load(file);
  check_globals(c);
  const auto out = resolve_out(c, g);
  const auto res = sb::run_experiment(c, resolve_seed(c, g), out);
  std::cout << "wrote " << out.string() << "  occupation_null=" << res.summary["occupation_null"].get<double>() << '\n';
  return 0;
}

int cmd_scaling(const std::string& file, const Globals& g) {
  const auto c = sb::Config::load(file);
  check_globals(c);
  c.check_keys("bench", {"family", "sizes", "T", "iterations", "replicates", "variant", "horizon"});
  sb::ScalingOptions o;
  o.sizes = c.list("bench.sizes");
  o.T = c.get_or("bench.T", o.T);
  o.iterations = c.get_or<std::uint64_t>("bench.iterations", o.iterations);
  o.replicates = c.get_or<std::size_t>("bench.replicates", o.replicates);
  o.seed = resolve_seed(c, g);
  try {
    o.variant = sticky::parse_variant(c.get_or<std::string>("bench.variant", "sparse"));
  } catch (const std::invalid_argument& e) {
    c.fail("bench.variant", e.what());
  }
  const auto horizon = c.get_or<std::string>("bench.horizon", "fixed");
  if (horizon != "fixed" && horizon != "posterior-scaled") c.fail("bench.horizon", "must be 'fixed' or 'posterior-scaled'");
  o.posterior_scaled_horizon = horizon == "posterior-scaled";
  if (o.sizes.size() < 4) c.fail("bench.sizes", "need at least four sizes");
  const auto family = c.get<std::string>("bench.family");
  sb::ScalingReport r;
  try {
    r = sb::bench_scaling(family, o);
  } catch (const std::invalid_argument& e) {
    c.fail("bench.family", e.what());
  }
  const auto out = resolve_out(c, g);
  sb::write_scaling_csv(out / "scaling.csv", r);
  sb::write_json(out / "scaling.json", r.to_json());
  auto meta = sb::metadata(c, "bench-scaling", o.seed);
  meta["note"] = "timings depend on the machine; event and flop counts are reproducible";
  sb::write_json(out / "metadata.json", meta);
  std::cout << family << ": slope " << r.fit.slope << " +/- " << r.fit.slope_se << " (reference " << r.reference_slope
            << " +/- " << r.tolerance << ")\n";
  return 0;
}

int cmd_hitting(const std::string& file, const Globals& g) {
  const auto c = sb::Config::load(file);
  check_globals(c);
  c.check_keys("bench", {"scenario", "dims", "replicates", "gamma", "kappa", "max_time", "max_iterations"});
  sb::HittingOptions o;
  o.scenario = c.get<int>("bench.scenario");
  for (double d : c.list("bench.dims")) {
    if (!(d >= 1.0) || d != std::floor(d)) c.fail("bench.dims", "dimensions must be positive integers");
    o.dims.push_back(static_cast<std::size_t>(d));
  }
  o.replicates = c.get_or<std::size_t>("bench.replicates", o.replicates);
  o.params.gamma = c.get_or("bench.gamma", o.params.gamma);
  o.params.kappa = c.get_or("bench.kappa", o.params.kappa);
  o.max_time = c.get_or("bench.max_time", o.max_time);
  o.max_iterations = c.get_or<std::uint64_t>("bench.max_iterations", o.max_iterations);
  o.seed = resolve_seed(c, g);
  o.threads = g.threads;
  if (o.scenario != 1 && o.scenario != 2) c.fail("bench.scenario", "must be 1 or 2");
  if (o.dims.size() < 3) c.fail("bench.dims", "need at least three dimensions");
  const auto r = sb::bench_hitting(o);
  const auto out = resolve_out(c, g);
  sb::write_hitting_csv(out / "hitting.csv", r);
  sb::write_json(out / "hitting.json", r.to_json());
  sb::write_json(out / "metadata.json", sb::metadata(c, "bench-hitting", o.seed));
  for (const auto* s : {&r.zigzag, &r.gibbs})
    std::cout << "scenario " << r.scenario << ' ' << s->sampler << ": slope " << s->fit.slope << " +/- " << s->fit.slope_se
              << " (reference " << s->reference_slope << " +/- " << s->tolerance << ")\n";
  return 0;
}

int cmd_compare(const std::string& file, const Globals& g) {
  const auto c = sb::Config::load(file);
  check_globals(c);
  const auto out = resolve_out(c, g);
  const auto r = sb::compare_samplers(c, resolve_seed(c, g), out);
  std::cout << r.name_a << " final error " << r.a.mean.back() << ", " << r.name_b << " final error " << r.b.mean.back()
            << "; curves in " << out.string() << '\n';
  return 0;
}

int cmd_simulate(const std::string& file, const Globals& g) {
  const auto c = sb::Config::load(file);
  check_globals(c);
  const auto out = resolve_out(c, g);
  const auto truth = sb::simulate_data(c, resolve_seed(c, g), out);
  std::cout << "wrote " << truth["kind"].get<std::string>() << " data to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sticky PDMP samplers: experiment runner and benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  auto* out_opt = app.add_option("--out", out, "Output directory (default: [output] dir, else ./out)");
  app.add_option("--threads", g.threads, "Worker threads for independent replicates")->check(CLI::PositiveNumber);

  std::string file;
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const std::string&, const Globals&);
  };
  const Cmd cmds[] = {{"run", "Run one sampler from a config", cmd_run},
                      {"bench-scaling", "Runtime scaling against problem size", cmd_scaling},
                      {"bench-hitting", "Null-model hitting times against dimension", cmd_hitting},
                      {"compare", "Error curves of two samplers on a wall-clock grid", cmd_compare},
                      {"simulate-data", "Write simulated data sets with a truth sidecar", cmd_simulate}};
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("config", file, "INI config file")->required()->check(CLI::ExistingFile);
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out = out;
  try {
    for (std::size_t k = 0; k < subs.size(); ++k)
      if (subs[k]->parsed()) return cmds[k].fn(file, g);
  } catch (const sb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
