#pragma once

// CSV export of run metrics, per-step traces and replay error summaries.
// Every table starts with a `schema_version` column; bump kMetricsSchemaVersion
// whenever columns change.
//
// metrics table (one row per run, then one `aggregate` row):
//   schema_version,row,seed,success,final_phase,failure_reason,switchover_time,
//   motor_stop_time,time_to_dock,capture_offset,markers_detected,updates_applied,
//   updates_rejected,onboard_steps,in_range_steps,position_p50,position_p95,
//   position_max,fraction_position_below_10cm,in_range_p50,in_range_p95,
//   in_range_max,yaw_p50_deg,fraction_yaw_below_5deg,roll_p50_deg,pitch_p50_deg,
//   mean_nees,success_rate
// Aggregate rows pool all onboard steps of the batch; per-run-only columns are
// left empty there. Lengths in m, times in s.
//
// trace table (one row per onboard IMU step):
//   schema_version,seed,t,phase,true_x,true_y,true_z,est_x,est_y,est_z,
//   err_x,err_y,err_z,err_norm,yaw_err_deg,pitch_err_deg,roll_err_deg,nees,in_range
//
// replay table (one row):
//   schema_version,samples,estimates,updates_applied,markers_skipped,
//   position_mean,position_p50,position_p95,position_max,yaw_p50_deg,yaw_max_deg,mean_nees

#include "dockekf/log_io.hpp"
#include "dockekf/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dockekf {

inline constexpr int kMetricsSchemaVersion = 1;

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// NaN (e.g. a statistic over no samples) becomes an empty cell.
inline std::string csvNumber(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csvOptional(const std::optional<double>& v) { return v ? csvNumber(*v) : std::string(); }

inline std::string csvText(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvRow {
 public:
  CsvRow& operator<<(const std::string& cell) {
    if (!first_) line_ += ',';
    line_ += cell;
    first_ = false;
    return *this;
  }
  CsvRow& operator<<(double v) { return *this << csvNumber(v); }
  CsvRow& operator<<(std::size_t v) { return *this << std::to_string(v); }
  CsvRow& operator<<(int v) { return *this << std::to_string(v); }
  std::string str() const { return line_ + "\n"; }

 private:
  std::string line_;
  bool first_ = true;
};

inline void writeTextAtomically(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw CsvError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw CsvError("write to '" + path.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CsvError("cannot move '" + path.string() + "' into place: " + ec.message());
}

inline void appendStatistics(CsvRow& row, const PooledStatistics& p) {
  row << p.steps << p.in_range_steps << p.position_median << p.position_p95 << p.position_max
      << p.fraction_position_below_10cm << p.in_range_median << p.in_range_p95 << p.in_range_max
      << p.yaw_median_deg << p.fraction_yaw_below_5deg << p.roll_median_deg << p.pitch_median_deg
      << p.mean_nees;
}

}  // namespace detail

inline std::string metricsCsvHeader() {
  return "schema_version,row,seed,success,final_phase,failure_reason,switchover_time,motor_stop_time,"
         "time_to_dock,capture_offset,markers_detected,updates_applied,updates_rejected,onboard_steps,"
         "in_range_steps,position_p50,position_p95,position_max,fraction_position_below_10cm,in_range_p50,"
         "in_range_p95,in_range_max,yaw_p50_deg,fraction_yaw_below_5deg,roll_p50_deg,pitch_p50_deg,mean_nees,"
         "success_rate\n";
}

inline std::string metricsCsvRow(const RunMetrics& m) {
  detail::CsvRow row;
  row << kMetricsSchemaVersion << std::string("run") << std::to_string(m.seed) << (m.success ? 1 : 0)
      << std::string(phaseName(m.final_phase)) << detail::csvText(m.failure_reason)
      << detail::csvOptional(m.switchover_time) << detail::csvOptional(m.motor_stop_time)
      << detail::csvOptional(m.time_to_dock)
      << (m.motor_stop_time ? detail::csvNumber(m.capture_offset) : std::string()) << m.markers_detected
      << m.updates_applied << m.updates_rejected;
  detail::appendStatistics(row, poolStatistics({&m}));
  row << (m.success ? 1.0 : 0.0);
  return row.str();
}

inline std::string aggregateCsvRow(const MonteCarloSummary& s) {
  std::size_t detected = 0;
  std::size_t applied = 0;
  std::size_t rejected = 0;
  for (const auto& r : s.runs) {
    detected += r.markers_detected;
    applied += r.updates_applied;
    rejected += r.updates_rejected;
  }
  detail::CsvRow row;
  row << kMetricsSchemaVersion << std::string("aggregate") << std::string() << s.successes << std::string()
      << std::string() << std::string() << std::string() << std::string() << std::string() << detected << applied
      << rejected;
  detail::appendStatistics(row, s.pooled);
  row << s.success_rate;
  return row.str();
}

inline std::string metricsCsv(const MonteCarloSummary& s) {
  std::string out = metricsCsvHeader();
  for (const auto& r : s.runs) out += metricsCsvRow(r);
  return out + aggregateCsvRow(s);
}

inline std::string traceCsv(const RunMetrics& m) {
  constexpr double kToDeg = 180.0 / std::numbers::pi;
  std::string out =
      "schema_version,seed,t,phase,true_x,true_y,true_z,est_x,est_y,est_z,err_x,err_y,err_z,err_norm,"
      "yaw_err_deg,pitch_err_deg,roll_err_deg,nees,in_range\n";
  for (const auto& s : m.steps) {
    detail::CsvRow row;
    row << kMetricsSchemaVersion << std::to_string(m.seed) << s.t << std::string(phaseName(s.phase));
    for (int k = 0; k < 3; ++k) row << s.true_position(k);
    for (int k = 0; k < 3; ++k) row << s.estimated_position(k);
    for (int k = 0; k < 3; ++k) row << s.position_error(k);
    row << s.position_error_norm << s.yaw_error * kToDeg << s.pitch_error * kToDeg << s.roll_error * kToDeg
        << s.nees << (s.in_docking_range ? 1 : 0);
    out += row.str();
  }
  return out;
}

inline std::string replayCsv(const ReplayResult& r) {
  std::string out =
      "schema_version,samples,estimates,updates_applied,markers_skipped,position_mean,position_p50,"
      "position_p95,position_max,yaw_p50_deg,yaw_max_deg,mean_nees\n";
  detail::CsvRow row;
  const ErrorSummary e = r.errors.value_or(ErrorSummary{});
  row << kMetricsSchemaVersion << e.samples << r.estimates.size() << r.updates_applied << r.markers_skipped;
  if (r.errors) {
    row << e.position_mean << e.position_median << e.position_p95 << e.position_max << e.yaw_median_deg
        << e.yaw_max_deg << e.mean_nees;
  } else {
    for (int k = 0; k < 7; ++k) row << std::string();
  }
  return out + row.str();
}

inline void writeCsv(const std::filesystem::path& path, const std::string& table) {
  detail::writeTextAtomically(path, table);
}

}  // namespace dockekf
