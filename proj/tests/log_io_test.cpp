#include "dockekf/log_io.hpp"
#include "dockekf/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dockekf {
namespace {

namespace fs = std::filesystem;

class LogFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dockekf_log_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SensorLog parse(const std::string& text) {
  std::istringstream in(text);
  return parseLog(in);
}

TEST_F(LogFile, EmptyStreamWritesOnlyTheVersionHeader) {
  writeLog(SensorLog{}, path("empty.log"));
  EXPECT_EQ(slurp(path("empty.log")), "dockekf-log 1\n");
  const SensorLog back = readLog(path("empty.log"));
  EXPECT_TRUE(back.records.empty());
  EXPECT_FALSE(back.header.extrinsics.has_value());
}

TEST_F(LogFile, SingleImuRecordRoundTrips) {
  SensorLog log;
  log.records.push_back(ImuRecord{{0.1, Vec3(0.1, 1.0 / 3.0, 9.80665), Vec3(-1e-300, 2.5e-17, 3.0)}});
  writeLog(log, path("imu.log"));
  const SensorLog back = readLog(path("imu.log"));
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(std::get<ImuRecord>(back.records[0]), std::get<ImuRecord>(log.records[0]));
}

TEST_F(LogFile, FullRunRoundTripsLosslessly) {
  const RunResult run = runDocking(ScenarioConfig{});
  writeLog(run.log, path("run.log"));
  const SensorLog back = readLog(path("run.log"));
  ASSERT_EQ(back.records.size(), run.log.records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    ASSERT_EQ(back.records[i], run.log.records[i]) << "record " << i;
  }
  ASSERT_TRUE(back.header.extrinsics.has_value());
  EXPECT_EQ(back.header.extrinsics->camera_from_body, run.log.header.extrinsics->camera_from_body);
  EXPECT_EQ(back.header.measurement_noise->min_depth, run.log.header.measurement_noise->min_depth);
  EXPECT_EQ(back.header.update->gate_threshold, run.log.header.update->gate_threshold);
  EXPECT_FALSE(fs::exists(path("run.log.tmp")));
}

TEST_F(LogFile, WriterRejectsUnorderedRecordsAndBadPaths) {
  SensorLog log;
  log.records.push_back(ImuRecord{{1.0, Vec3::Zero(), Vec3::Zero()}});
  log.records.push_back(PassiveAttitudeRecord{0.5, Mat3::Identity()});
  EXPECT_THROW(writeLog(log, path("bad.log")), LogError);
  EXPECT_THROW(writeLog(SensorLog{}, path("missing_dir") / "x.log"), LogError);
  EXPECT_THROW(readLog(path("does_not_exist.log")), LogError);
}

void expectParseError(const std::string& text, const std::string& fragment) {
  try {
    parse(text);
    ADD_FAILURE() << "no error for:\n" << text;
  } catch (const LogError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(ParseLog, ErrorsCarryLineNumbers) {
  const std::string imu = "imu t=0 ax=0 ay=0 az=0 wx=0 wy=0 wz=0\n";
  expectParseError("", "line 1:");
  expectParseError("dockekf-log 2\n", "line 1:");
  expectParseError("dockekf-log 1\n" + imu + "imu t=0 ax=0 ay=0\n", "line 3:");
  expectParseError("dockekf-log 1\nimu t=0 ax=zero ay=0 az=0 wx=0 wy=0 wz=0\n", "line 2: bad number");
  expectParseError("dockekf-log 1\nbogus t=0\n", "line 2: unknown record type");
  expectParseError("dockekf-log 1\n" + imu + "imu t=0 ax=0 ay=0 az=0 wx=0 wy=0 wz=0 extra=1\n", "line 3:");
  expectParseError("dockekf-log 1\nimu t=1 ax=0 ay=0 az=0 wx=0 wy=0 wz=0\n" + imu, "line 3: timestamp regression");
  expectParseError("dockekf-log 1\n" + imu + "@world gx=0 gy=0 gz=-9.8\n", "line 3: configuration line after");
}

TEST(ParseLog, AcceptsBlankLines) {
  const SensorLog log = parse("dockekf-log 1\n\nimu t=0 ax=0 ay=0 az=9.8 wx=0 wy=0 wz=0\n\n");
  EXPECT_EQ(log.records.size(), 1u);
}

TEST(Replay, ReproducesLiveEstimatesBitForBit) {
  const RunResult run = runDocking(ScenarioConfig{});
  std::vector<EstimateRecord> live;
  for (const auto& r : run.log.records) {
    if (const auto* e = std::get_if<EstimateRecord>(&r)) live.push_back(*e);
  }
  const ReplayResult replayed = replay(run.log);
  ASSERT_EQ(replayed.estimates.size(), live.size());
  for (std::size_t i = 0; i < live.size(); ++i) ASSERT_EQ(replayed.estimates[i], live[i]) << "estimate " << i;
  EXPECT_EQ(replayed.updates_applied, run.metrics.updates_applied);
  ASSERT_TRUE(replayed.errors.has_value());
  EXPECT_LT(replayed.errors->position_median, 0.1);
}

TEST_F(LogFile, ReplayOfFileIsDeterministic) {
  writeLog(runDocking(ScenarioConfig{}).log, path("run.log"));
  const ReplayResult a = replay(readLog(path("run.log")));
  const ReplayResult b = replay(readLog(path("run.log")));
  EXPECT_EQ(a.estimates, b.estimates);
  EXPECT_EQ(a.updates_applied, b.updates_applied);
}

TEST(Replay, ImuOnlyIsDeadReckoningWithGrowingCovariance) {
  SensorLog log;
  log.header.extrinsics = ScenarioConfig::defaultExtrinsics();
  const Belief b0 = initialize(Vec3(0, 0, -0.6), Vec3::Zero(), Mat3::Identity(),
                               diagonalCovariance(Vec3(0.01, 0.02, 0.01)));
  log.records.push_back(EstimateRecord::from(b0, EstimateSource::Init));
  RngStream rng(61);
  for (int k = 0; k < 500; ++k) {
    log.records.push_back(
        ImuRecord{{0.002 * k, Vec3(0, 0, kStandardGravity) + 0.5 * rng.gaussian3(), 0.1 * rng.gaussian3()}});
  }
  const ReplayResult r = replay(log);
  EXPECT_EQ(r.updates_applied, 0u);
  ASSERT_EQ(r.estimates.size(), 500u);  // init + 499 predictions
  for (std::size_t i = 1; i < r.estimates.size(); ++i) {
    EXPECT_GE(r.estimates[i].covariance.trace(), r.estimates[i - 1].covariance.trace());
  }
  EXPECT_FALSE(r.errors.has_value());
}

TEST(Replay, RejectsUnusableLogs) {
  EXPECT_THROW(replay(SensorLog{}), LogError);  // no extrinsics
  SensorLog log;
  log.header.extrinsics = Extrinsics{};
  EXPECT_THROW(replay(log), LogError);  // no IMU
  log.records.push_back(ImuRecord{{0.0, Vec3::Zero(), Vec3::Zero()}});
  EXPECT_THROW(replay(log), LogError);  // no initial estimate

  ReplayOptions with_initial;
  with_initial.initial = initialize(Vec3::Zero(), Vec3::Zero(), Mat3::Identity(), Covariance::Identity());
  EXPECT_NO_THROW(replay(log, with_initial));
}

}  // namespace
}  // namespace dockekf
