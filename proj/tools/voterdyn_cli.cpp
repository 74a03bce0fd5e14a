// voterdyn: run simulations and checks from an INI config.
//
// Exit codes: 0 pass, 1 acceptance failure, 2 config error, 3 I/O error.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>

#include "voterdyn/voterdyn.hpp"

using namespace voterdyn;

namespace {

const auto kStart = std::chrono::steady_clock::now();

enum ExitCode { kPass = 0, kFail = 1, kConfig = 2, kIo = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> workers;
  std::optional<std::string> out;
  std::optional<std::size_t> replications;
};

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.replications) c.replications = *f.replications;
  if (f.out) c.out = *f.out;
  if (f.workers) {
    if (*f.workers < 1) throw ConfigError("--workers must be at least 1");
    c.workers = static_cast<std::size_t>(*f.workers);
  }
  validate(c);
  return c;
}

/// Writes report, records and manifest; returns the exit code for `pass`.
int finish(const std::string& command, const ExperimentConfig& c, std::size_t workers, OutputDirectory& dir,
           const std::vector<CheckResult>& checks, const std::string& started, bool judged) {
  std::vector<EstimateRecord> records;
  std::string report = command + "\n";
  bool pass = true;
  RunManifest m;
  for (const auto& chk : checks) {
    if (judged) report += "\n" + std::string(chk.pass ? "PASS " : "FAIL ") + chk.name + "\n";
    report += chk.report;
    pass = pass && chk.pass;
    records.insert(records.end(), chk.records.begin(), chk.records.end());
    m.wall_times[chk.name] += chk.wall_time;
  }
  if (judged) report += std::string("\noverall: ") + (pass ? "PASS" : "FAIL") + "\n";
  dir.write("estimates.jsonl", to_jsonl(records));
  dir.write("report.txt", report);
  m.command = command;
  m.config_snapshot = serialize_config(c);
  m.started = started;
  m.finished = utc_timestamp();
  m.workers = workers;
  m.wall_times["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - kStart).count();
  m.checksums = dir.checksums();
  dir.write("manifest.json", m.to_json().dump(2) + "\n");
  std::cout << report;
  return pass ? kPass : kFail;
}

int run_simulate(const ExperimentConfig& c, std::size_t workers, const std::string& started) {
  OutputDirectory dir(c.out);
  const auto runs = simulate_counts(c, workers);
  dir.write("counts.csv", counts_csv(runs));
  return finish("simulate", c, workers, dir, {summarize_counts(c, runs)}, started, false);
}

int run_fclt(const ExperimentConfig& c, std::size_t workers, const std::string& started) {
  if (c.model != ModelKind::one_way) throw ConfigError("fclt-check needs run.model = one_way");
  if (c.patterns.size() < 2) throw ConfigError("fclt-check needs at least 2 patterns");
  if (c.times.size() < 2) throw ConfigError("fclt-check needs at least 2 checkpoint times");
  if (c.replications < c.acceptance.min_replications)
    throw ConfigError("fclt-check needs at least " + std::to_string(c.acceptance.min_replications) +
                      " replications (acceptance.min_replications), got " + std::to_string(c.replications));
  OutputDirectory dir(c.out);
  SuiteOptions opt{c.seed, workers, c.acceptance};
  const auto params = c.one_way();
  const auto patterns = c.parsed_patterns();
  auto bundle = fclt_bundle(params, patterns, c.times, c.replications, opt);
  std::vector<CheckResult> checks{bundle.gaussian, bundle.wick};
  checks.push_back(tightness_suite(params, patterns[0], patterns[1], c.times.back(), c.acceptance.tightness_triples,
                                   c.replications, opt));
  if (params.pi_plus == params.pi_minus) checks.push_back(opinion_free_cross_check(params, patterns, c.times, opt));
  return finish("fclt-check", c, workers, dir, checks, started, true);
}

int run_table(const ExperimentConfig& c, std::size_t workers, const std::string& started) {
  if (c.model != ModelKind::two_way) throw ConfigError("two-way-table needs run.model = two_way");
  OutputDirectory dir(c.out);
  SuiteOptions opt{c.seed, workers, c.acceptance};
  const auto h = c.parsed_patterns().front();
  return finish("two-way-table", c, workers, dir,
                {two_way_table(c.two_way(), h, c.table_n, c.times, c.table_z, c.replications, opt)}, started, true);
}

int run_graphon(const ExperimentConfig& c, std::size_t workers, const std::string& started) {
  if (c.model != ModelKind::one_way) throw ConfigError("graphon-check needs run.model = one_way");
  OutputDirectory dir(c.out);
  const auto p = c.one_way();
  const auto g = graphon_grid_check(c.graphon_t, p, c.replications, c.seed, c.graphon_grid, c.graphon_min_count,
                                    c.acceptance.k_se, workers);
  dir.write("graphon.csv", graphon_csv(g));
  return finish("graphon-check", c, workers, dir, {graphon_report(g, p, c.graphon_min_count, c.seed)}, started, true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification of the voter model on a dynamic random graph"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "INI configuration file")->required();
    sub->add_option("--seed", flags.seed, "master seed (overrides run.seed)");
    sub->add_option("--workers", flags.workers, "worker threads (overrides run.workers and $VOTERDYN_WORKERS)");
    sub->add_option("--out", flags.out, "output directory (overrides run.out)");
    sub->add_option("--replications", flags.replications, "replications R (overrides run.replications)");
  };
  auto* simulate = app.add_subcommand("simulate", "simulate trajectories and write count time series");
  auto* fclt = app.add_subcommand("fclt-check", "Gaussian limit checks on standardized counts");
  auto* table = app.add_subcommand("two-way-table", "C' and C^(z) table for the two-way model");
  auto* graphon = app.add_subcommand("graphon-check", "binned comparison of edge frequencies with the graphon");
  for (auto* s : {simulate, fclt, table, graphon}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  const std::string started = utc_timestamp();
  try {
    const auto c = resolve(flags);
    const std::size_t workers = resolve_workers(static_cast<long>(c.workers));
    if (*simulate) return run_simulate(c, workers, started);
    if (*fclt) return run_fclt(c, workers, started);
    if (*table) return run_table(c, workers, started);
    return run_graphon(c, workers, started);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const RangeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const PatternError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
}
