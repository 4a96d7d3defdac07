#include "dockekf/cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dockekf {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = runCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dockekf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path writeConfig(const std::string& name, const std::string& yaml) const {
    std::ofstream(dir_ / name) << yaml;
    return dir_ / name;
  }

  fs::path dir_;
};

TEST_F(Cli, SimulateDocksAndWritesOutputs) {
  const Outcome o = run({"simulate", "--seed", "1", "--out", dir_.string()});
  EXPECT_EQ(o.code, kExitOk) << o.out << o.err;
  EXPECT_NE(o.out.find("docked"), std::string::npos);
  for (const char* f : {"run.log", "metrics.csv", "trace.csv", "config.yaml"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  EXPECT_EQ(lines(slurp(dir_ / "metrics.csv")).size(), 2u);
  // The effective configuration reloads to the one that was run.
  EXPECT_EQ(loadScenarioConfig(dir_ / "config.yaml").seed, 1u);
}

TEST_F(Cli, SimulateWithoutDetectionsExitsTwo) {
  const auto cfg = writeConfig("blind.yaml", "camera:\n  dropout_probability: 1.0\n");
  const Outcome o = run({"simulate", "--config", cfg.string(), "--out", dir_.string()});
  EXPECT_EQ(o.code, kExitDockingFailed);
  EXPECT_NE(o.out.find("marker never detected"), std::string::npos);
}

TEST_F(Cli, ConfigProblemsExitOne) {
  Outcome o = run({"simulate", "--config", (dir_ / "nope.yaml").string(), "--out", dir_.string()});
  EXPECT_EQ(o.code, kExitError);
  EXPECT_NE(o.err.find("nope.yaml"), std::string::npos);

  const auto bad = writeConfig("bad.yaml", "camera:\n  frame_rate: fast\n");
  o = run({"simulate", "--config", bad.string(), "--out", dir_.string()});
  EXPECT_EQ(o.code, kExitError);
  EXPECT_NE(o.err.find("camera.frame_rate"), std::string::npos);
}

TEST(CliUsage, BadInvocationsExitOne) {
  EXPECT_EQ(run({}).code, kExitError);
  EXPECT_EQ(run({"fly"}).code, kExitError);
  EXPECT_EQ(run({"simulate", "--bogus"}).code, kExitError);
  EXPECT_EQ(run({"montecarlo", "--runs", "0"}).code, kExitError);
  EXPECT_EQ(run({"replay"}).code, kExitError);
  EXPECT_EQ(run({"verify", "--inject-fault", "everything"}).code, kExitError);
}

TEST(CliUsage, HelpDocumentsEveryFlag) {
  const Outcome top = run({"--help"});
  EXPECT_EQ(top.code, kExitOk);
  for (const char* s : {"simulate", "montecarlo", "replay", "verify"}) EXPECT_NE(top.out.find(s), std::string::npos);

  const Outcome sim = run({"simulate", "--help"});
  for (const char* f : {"--config", "--seed", "--out", "DOCKEKF_OUT_DIR"}) {
    EXPECT_NE(sim.out.find(f), std::string::npos) << f;
  }
  const Outcome mc = run({"montecarlo", "--help"});
  for (const char* f : {"--config", "--seed", "--out", "--runs", "--threads"}) {
    EXPECT_NE(mc.out.find(f), std::string::npos) << f;
  }
  const Outcome rep = run({"replay", "--help"});
  for (const char* f : {"--log", "--out"}) EXPECT_NE(rep.out.find(f), std::string::npos) << f;
  EXPECT_NE(run({"verify", "--help"}).out.find("--quick"), std::string::npos);
}

TEST_F(Cli, MonteCarloWritesRunsAndAggregate) {
  const Outcome o = run({"montecarlo", "--runs", "3", "--seed", "1", "--out", dir_.string()});
  EXPECT_EQ(o.code, kExitOk) << o.out;
  EXPECT_NE(o.out.find("docked 3/3"), std::string::npos);
  const auto rows = lines(slurp(dir_ / "montecarlo.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_NE(rows.back().find(",aggregate,"), std::string::npos);
}

TEST_F(Cli, SingleRunBatchMatchesSimulate) {
  ASSERT_EQ(run({"simulate", "--seed", "3", "--out", (dir_ / "sim").string()}).code, kExitOk);
  ASSERT_EQ(run({"montecarlo", "--runs", "1", "--seed", "3", "--out", (dir_ / "mc").string()}).code, kExitOk);
  const auto sim = lines(slurp(dir_ / "sim" / "metrics.csv"));
  const auto mc = lines(slurp(dir_ / "mc" / "montecarlo.csv"));
  EXPECT_EQ(sim[0], mc[0]);
  EXPECT_EQ(sim[1], mc[1]);
}

TEST_F(Cli, ReplayReproducesRecordedEstimates) {
  ASSERT_EQ(run({"simulate", "--out", dir_.string()}).code, kExitOk);
  const Outcome a = run({"replay", "--log", (dir_ / "run.log").string(), "--out", (dir_ / "a").string()});
  const Outcome b = run({"replay", "--log", (dir_ / "run.log").string(), "--out", (dir_ / "b").string()});
  EXPECT_EQ(a.code, kExitOk) << a.err;
  EXPECT_NE(a.out.find("recorded estimates: identical"), std::string::npos) << a.out;
  EXPECT_EQ(slurp(dir_ / "a" / "replay.csv"), slurp(dir_ / "b" / "replay.csv"));
}

TEST_F(Cli, ReplayOfMalformedLogExitsOne) {
  std::ofstream(dir_ / "bad.log") << "dockekf-log 1\nimu t=x\n";
  const Outcome o = run({"replay", "--log", (dir_ / "bad.log").string(), "--out", dir_.string()});
  EXPECT_EQ(o.code, kExitError);
  EXPECT_NE(o.err.find("line 2"), std::string::npos);
}

TEST_F(Cli, OutputDirectoryFallsBackToEnvironment) {
  ::setenv(kOutDirEnv, (dir_ / "env").c_str(), 1);
  const Outcome o = run({"simulate"});
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(o.code, kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "env" / "run.log"));
}

TEST(CliVerify, HealthyAndFaultInjected) {
  const Outcome ok = run({"verify", "--quick"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_NE(ok.out.find("PASS nees"), std::string::npos) << ok.out;
  EXPECT_NE(ok.out.find("bounds ["), std::string::npos);
  EXPECT_NE(ok.out.find("margin"), std::string::npos);

  const Outcome bad = run({"verify", "--quick", "--inject-fault", "measurement-jacobian"});
  EXPECT_EQ(bad.code, kExitError);
  EXPECT_NE(bad.out.find("FAIL measurement-jacobian"), std::string::npos) << bad.out;
  EXPECT_NE(bad.out.find("PASS process-jacobian"), std::string::npos);
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(Cli, ExecutableExitCodes) {
  const std::string exe = DOCKEKF_CLI_PATH;
  const auto blind = writeConfig("blind.yaml", "camera:\n  dropout_probability: 1.0\n");
  const std::string quiet = " > /dev/null 2>&1";
  EXPECT_EQ(shell(exe + " simulate --out " + dir_.string() + quiet), 0);
  EXPECT_EQ(shell(exe + " simulate --config " + blind.string() + " --out " + dir_.string() + quiet), 2);
  EXPECT_EQ(shell(exe + " simulate --config /nonexistent.yaml" + quiet), 1);
  EXPECT_EQ(shell(exe + " verify --quick --inject-fault nees" + quiet), 1);
  EXPECT_EQ(shell(exe + " --help" + quiet), 0);
}

}  // namespace
}  // namespace dockekf
