#pragma once

// Command-line front end: simulate, montecarlo, replay, verify.
//
// Exit codes: 0 success (docked / all checks passed), 2 docking failure,
// 1 usage, configuration or I/O error. Output goes to --out, or to
// $DOCKEKF_OUT_DIR, or to the working directory.

#include "dockekf/config.hpp"
#include "dockekf/consistency.hpp"
#include "dockekf/log_io.hpp"
#include "dockekf/metrics_csv.hpp"
#include "dockekf/scenario.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dockekf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDockingFailed = 2;
inline constexpr const char* kOutDirEnv = "DOCKEKF_OUT_DIR";

namespace cli {

inline std::filesystem::path outputDirectory(const std::string& flag) {
  std::filesystem::path dir = ".";
  if (!flag.empty()) {
    dir = flag;
  } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    dir = env;
  }
  std::filesystem::create_directories(dir);
  return dir;
}

inline ScenarioConfig scenarioFrom(const std::string& config_path, const std::optional<std::uint64_t>& seed) {
  ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : loadScenarioConfig(config_path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

inline void printStatistics(std::ostream& out, const PooledStatistics& p) {
  out << std::setprecision(4);
  out << "  onboard steps          " << p.steps << " (" << p.in_range_steps << " in docking range)\n";
  out << "  position error         p50 " << p.position_median << " m, p95 " << p.position_p95 << " m, max "
      << p.position_max << " m, below 10 cm " << 100.0 * p.fraction_position_below_10cm << " %\n";
  out << "  in-range error         p50 " << p.in_range_median << " m, p95 " << p.in_range_p95 << " m, max "
      << p.in_range_max << " m\n";
  out << "  attitude error p50     yaw " << p.yaw_median_deg << " deg, roll " << p.roll_median_deg
      << " deg, pitch " << p.pitch_median_deg << " deg; yaw below 5 deg " << 100.0 * p.fraction_yaw_below_5deg
      << " %\n";
  out << "  mean NEES              " << p.mean_nees << " (9 dof)\n";
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t runs = 5;
  unsigned threads = 0;
  std::string log;
  std::string fault = "none";
  bool quick = false;
};

inline int simulate(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg = scenarioFrom(o.config, o.seed);
  const auto dir = outputDirectory(o.out);
  const RunResult r = runDocking(cfg);
  const RunMetrics& m = r.metrics;

  writeLog(r.log, dir / "run.log");
  writeCsv(dir / "metrics.csv", metricsCsvHeader() + metricsCsvRow(m));
  writeCsv(dir / "trace.csv", traceCsv(m));
  writeCsv(dir / "config.yaml", scenarioConfigToYaml(cfg));

  out << "seed " << m.seed << ": " << (m.success ? "docked" : "failed");
  if (m.time_to_dock) out << " at t = " << std::setprecision(4) << *m.time_to_dock << " s";
  if (!m.success) out << " (" << m.failure_reason << ")";
  out << "\n";
  printStatistics(out, poolStatistics({&m}));
  out << "wrote run.log, metrics.csv, trace.csv, config.yaml to " << dir.string() << "\n";
  return m.success ? kExitOk : kExitDockingFailed;
}

inline int montecarlo(const Options& o, std::ostream& out) {
  if (o.runs < 1) throw CLI::ValidationError("--runs", "must be at least 1");
  const ScenarioConfig cfg = scenarioFrom(o.config, o.seed);
  const auto dir = outputDirectory(o.out);
  const MonteCarloSummary s = runMonteCarlo(cfg, o.runs, o.threads);
  writeCsv(dir / "montecarlo.csv", metricsCsv(s));
  writeCsv(dir / "config.yaml", scenarioConfigToYaml(cfg));

  out << "seed   result   time_to_dock  in_range_p50  reason\n";
  for (const auto& r : s.runs) {
    const auto in_range = r.positionErrors(true);
    out << std::left << std::setw(7) << r.seed << std::setw(9) << (r.success ? "docked" : "failed")
        << std::setw(14) << (r.time_to_dock ? std::to_string(*r.time_to_dock) : std::string("-")) << std::setw(14)
        << (in_range.empty() ? std::string("-") : std::to_string(median(in_range))) << r.failure_reason << "\n"
        << std::right;
  }
  out << "docked " << s.successes << "/" << s.runs.size() << "\n";
  printStatistics(out, s.pooled);
  out << "wrote montecarlo.csv, config.yaml to " << dir.string() << "\n";
  return s.successes == s.runs.size() ? kExitOk : kExitDockingFailed;
}

inline int replayCommand(const Options& o, std::ostream& out) {
  const SensorLog log = readLog(o.log);
  const auto dir = outputDirectory(o.out);
  const ReplayResult r = replay(log);
  writeCsv(dir / "replay.csv", replayCsv(r));

  std::vector<EstimateRecord> recorded;
  for (const auto& rec : log.records) {
    if (const auto* e = std::get_if<EstimateRecord>(&rec)) recorded.push_back(*e);
  }
  out << "replayed " << r.estimates.size() << " estimates (" << r.updates_applied << " marker updates, "
      << r.markers_skipped << " markers skipped)\n";
  if (!recorded.empty()) {
    out << "recorded estimates: " << (recorded == r.estimates ? "identical" : "DIFFERENT") << "\n";
  }
  if (r.errors) {
    out << std::setprecision(4) << "position error p50 " << r.errors->position_median << " m, p95 "
        << r.errors->position_p95 << " m, max " << r.errors->position_max << " m; mean NEES "
        << r.errors->mean_nees << "\n";
  }
  out << "wrote replay.csv to " << dir.string() << "\n";
  return kExitOk;
}

inline int verify(const Options& o, std::ostream& out) {
  static const std::map<std::string, VerifyFault> faults{{"none", VerifyFault::None},
                                                         {"process-jacobian", VerifyFault::ProcessJacobian},
                                                         {"measurement-jacobian", VerifyFault::MeasurementJacobian},
                                                         {"covariance", VerifyFault::Covariance},
                                                         {"nees", VerifyFault::Nees}};
  VerifyOptions v;
  v.fault = faults.at(o.fault);
  if (o.quick) {
    v.jacobian_configurations = 20;
    v.soak_steps = 2000;
    v.nees_runs = 10;
  }
  const VerificationReport report = runVerification(v);
  for (const auto& c : report.checks) {
    out << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name << std::right
        << std::setprecision(6) << "value " << c.value << "  bounds [" << c.lower << ", " << c.upper
        << "]  margin " << c.margin() << "  (" << c.detail << ")\n";
  }
  out << (report.passed() ? "all checks passed" : "verification FAILED") << "\n";
  return report.passed() ? kExitOk : kExitError;
}

}  // namespace cli

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relative localization and docking simulator for two multirotors", "dockekf"};
  app.require_subcommand(1);
  cli::Options o;

  auto* sim = app.add_subcommand("simulate", "Run one docking scenario and write its log and metrics");
  auto* mc = app.add_subcommand("montecarlo", "Run a batch of docking scenarios with consecutive seeds");
  auto* rep = app.add_subcommand("replay", "Replay a recorded log through a fresh estimator");
  auto* ver = app.add_subcommand("verify", "Run the Jacobian, covariance and NEES self-checks");

  for (auto* sc : {sim, mc}) {
    sc->add_option("-c,--config", o.config, "Scenario YAML (defaults when omitted)")->check(CLI::ExistingFile);
    sc->add_option("-s,--seed", o.seed, "Seed (overrides the config; batch run i uses seed + i)");
    sc->add_option("-o,--out", o.out, std::string("Output directory (default $") + kOutDirEnv + " or .)");
  }
  mc->add_option("-n,--runs", o.runs, "Number of runs")->check(CLI::PositiveNumber);
  mc->add_option("-j,--threads", o.threads, "Worker threads (0 = hardware concurrency)");
  rep->add_option("-l,--log", o.log, "Log file written by simulate")->required()->check(CLI::ExistingFile);
  rep->add_option("-o,--out", o.out, std::string("Output directory (default $") + kOutDirEnv + " or .)");
  ver->add_flag("--quick", o.quick, "Smaller sample sizes");
  ver->add_option("--inject-fault", o.fault, "Deliberately break one check")
      ->check(CLI::IsMember({"none", "process-jacobian", "measurement-jacobian", "covariance", "nees"}))
      ->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*sim) return cli::simulate(o, out);
    if (*mc) return cli::montecarlo(o, out);
    if (*rep) return cli::replayCommand(o, out);
    return cli::verify(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace dockekf
