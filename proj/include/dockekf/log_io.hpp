#pragma once

// Sensor/estimate log: one record per line, a type tag followed by
// `name=value` fields, numbers written with 17 significant digits so that
// doubles survive a round trip. The first line is the format header
// `dockekf-log 1`; optional `@...` configuration lines follow before any
// timestamped record.
//
//   imu          t ax ay az wx wy wz
//   marker       t px py pz r00..r22                  (marker in camera, R_MC)
//   passive_att  t r00..r22                           (R_EF)
//   truth        t phase px py pz vx vy vz r00..r22 f00..f22
//   estimate     t src px py pz vx vy vz r00..r22 c00 c01 .. c88 (upper triangle)
//   @extrinsics  rcq00..rcq22 rmf00..rmf22 tqcx tqcy tqcz tfmx tfmy tfmz
//   @process_noise sa sw
//   @measurement_noise sx sy sz ref rx ry rz zmin
//   @world       gx gy gz
//   @update      gating threshold

#include "dockekf/estimator.hpp"
#include "dockekf/filter.hpp"
#include "dockekf/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

namespace dockekf {

inline constexpr std::string_view kLogMagic = "dockekf-log";
inline constexpr int kLogVersion = 1;

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImuRecord {
  ImuSample sample;
  bool operator==(const ImuRecord& o) const {
    return sample.t == o.sample.t && sample.accel == o.sample.accel && sample.gyro == o.sample.gyro;
  }
};

struct MarkerRecord {
  RelativePoseMeasurement measurement;
  bool operator==(const MarkerRecord& o) const {
    return measurement.t == o.measurement.t && measurement.position == o.measurement.position &&
           measurement.orientation == o.measurement.orientation;
  }
};

struct PassiveAttitudeRecord {
  double t = 0.0;
  Mat3 attitude = Mat3::Identity();
  bool operator==(const PassiveAttitudeRecord& o) const { return t == o.t && attitude == o.attitude; }
};

/// Relative truth of the active vehicle plus both attitudes.
struct TruthRecord {
  double t = 0.0;
  int phase = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Identity();
  Mat3 passive_attitude = Mat3::Identity();
  bool operator==(const TruthRecord& o) const {
    return t == o.t && phase == o.phase && position == o.position && velocity == o.velocity &&
           attitude == o.attitude && passive_attitude == o.passive_attitude;
  }
};

enum class EstimateSource : int { Init = 0, Predict = 1, Update = 2 };

struct EstimateRecord {
  double t = 0.0;
  EstimateSource source = EstimateSource::Predict;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Identity();
  Mat9 covariance = Mat9::Zero();

  static EstimateRecord from(const Belief& b, EstimateSource src) {
    const PoseEstimate e = currentEstimate(b.state);
    return {b.state.t, src, e.position, e.velocity, e.attitude, b.covariance};
  }
  Belief toBelief() const {
    Belief b;
    b.state.position = position;
    b.state.velocity = velocity;
    b.state.reference_attitude = attitude;
    b.state.t = t;
    b.covariance = covariance;
    return b;
  }
  bool operator==(const EstimateRecord& o) const {
    return t == o.t && source == o.source && position == o.position && velocity == o.velocity &&
           attitude == o.attitude && covariance == o.covariance;
  }
};

using LogRecord = std::variant<ImuRecord, MarkerRecord, PassiveAttitudeRecord, TruthRecord, EstimateRecord>;

inline double recordTime(const LogRecord& r) {
  return std::visit(
      [](const auto& rec) {
        using T = std::decay_t<decltype(rec)>;
        if constexpr (std::is_same_v<T, ImuRecord>) {
          return rec.sample.t;
        } else if constexpr (std::is_same_v<T, MarkerRecord>) {
          return rec.measurement.t;
        } else {
          return rec.t;
        }
      },
      r);
}

/// Configuration the filter needs to reproduce a run; every part optional.
struct LogHeader {
  std::optional<Extrinsics> extrinsics;
  std::optional<ProcessNoise> process_noise;
  std::optional<MeasurementNoiseModel> measurement_noise;
  std::optional<WorldParams> world;
  std::optional<UpdateOptions> update;
};

struct SensorLog {
  LogHeader header;
  std::vector<LogRecord> records;
};

namespace detail {

class FieldWriter {
 public:
  explicit FieldWriter(std::string_view tag) : line_(tag) {}

  void num(std::string_view name, double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    line_ += ' ';
    line_ += name;
    line_ += '=';
    line_.append(buf, static_cast<std::size_t>(n));
  }
  void vec(std::string_view prefix, const Vec3& v) {
    static constexpr const char* kAxes[3] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i) num(std::string(prefix) + kAxes[i], v(i));
  }
  void mat(std::string_view prefix, const Mat3& m) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) num(std::string(prefix) + char('0' + i) + char('0' + j), m(i, j));
    }
  }
  void upper(std::string_view prefix, const Mat9& m) {
    for (int i = 0; i < 9; ++i) {
      for (int j = i; j < 9; ++j) num(std::string(prefix) + char('0' + i) + char('0' + j), m(i, j));
    }
  }
  const std::string& line() const { return line_; }

 private:
  std::string line_;
};

class FieldReader {
 public:
  FieldReader(std::vector<std::pair<std::string, double>> fields, std::size_t line_no)
      : fields_(std::move(fields)), used_(fields_.size(), false), line_no_(line_no) {}

  double num(std::string_view name) {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (!used_[i] && fields_[i].first == name) {
        used_[i] = true;
        return fields_[i].second;
      }
    }
    throw LogError("line " + std::to_string(line_no_) + ": missing field '" + std::string(name) + "'");
  }
  Vec3 vec(std::string_view prefix) {
    const double x = num(std::string(prefix) + "x");
    const double y = num(std::string(prefix) + "y");
    const double z = num(std::string(prefix) + "z");
    return {x, y, z};
  }
  Mat3 mat(std::string_view prefix) {
    Mat3 m;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m(i, j) = num(std::string(prefix) + char('0' + i) + char('0' + j));
    }
    return m;
  }
  Mat9 upper(std::string_view prefix) {
    Mat9 m;
    for (int i = 0; i < 9; ++i) {
      for (int j = i; j < 9; ++j) {
        m(i, j) = num(std::string(prefix) + char('0' + i) + char('0' + j));
        m(j, i) = m(i, j);
      }
    }
    return m;
  }
  void finish() const {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (!used_[i]) {
        throw LogError("line " + std::to_string(line_no_) + ": unexpected field '" + fields_[i].first + "'");
      }
    }
  }

 private:
  std::vector<std::pair<std::string, double>> fields_;
  std::vector<bool> used_;
  std::size_t line_no_;
};

inline std::string formatRecord(const LogRecord& record) {
  return std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ImuRecord>) {
          FieldWriter w("imu");
          w.num("t", r.sample.t);
          w.vec("a", r.sample.accel);
          w.vec("w", r.sample.gyro);
          return w.line();
        } else if constexpr (std::is_same_v<T, MarkerRecord>) {
          FieldWriter w("marker");
          w.num("t", r.measurement.t);
          w.vec("p", r.measurement.position);
          w.mat("r", r.measurement.orientation);
          return w.line();
        } else if constexpr (std::is_same_v<T, PassiveAttitudeRecord>) {
          FieldWriter w("passive_att");
          w.num("t", r.t);
          w.mat("r", r.attitude);
          return w.line();
        } else if constexpr (std::is_same_v<T, TruthRecord>) {
          FieldWriter w("truth");
          w.num("t", r.t);
          w.num("phase", r.phase);
          w.vec("p", r.position);
          w.vec("v", r.velocity);
          w.mat("r", r.attitude);
          w.mat("f", r.passive_attitude);
          return w.line();
        } else {
          FieldWriter w("estimate");
          w.num("t", r.t);
          w.num("src", static_cast<int>(r.source));
          w.vec("p", r.position);
          w.vec("v", r.velocity);
          w.mat("r", r.attitude);
          w.upper("c", r.covariance);
          return w.line();
        }
      },
      record);
}

inline std::vector<std::string> formatHeader(const LogHeader& h) {
  std::vector<std::string> lines;
  if (h.extrinsics) {
    FieldWriter w("@extrinsics");
    w.mat("rcq", h.extrinsics->camera_from_body);
    w.mat("rmf", h.extrinsics->marker_from_passive);
    w.vec("tqc", h.extrinsics->body_from_camera);
    w.vec("tfm", h.extrinsics->passive_from_marker);
    lines.push_back(w.line());
  }
  if (h.process_noise) {
    FieldWriter w("@process_noise");
    w.num("sa", h.process_noise->accel_std);
    w.num("sw", h.process_noise->gyro_std);
    lines.push_back(w.line());
  }
  if (h.measurement_noise) {
    FieldWriter w("@measurement_noise");
    w.vec("s", h.measurement_noise->position_std_at_reference);
    w.num("ref", h.measurement_noise->reference_depth);
    w.vec("r", h.measurement_noise->attitude_std);
    w.num("zmin", h.measurement_noise->min_depth);
    lines.push_back(w.line());
  }
  if (h.world) {
    FieldWriter w("@world");
    w.vec("g", h.world->gravity);
    lines.push_back(w.line());
  }
  if (h.update) {
    FieldWriter w("@update");
    w.num("gating", h.update->gating ? 1.0 : 0.0);
    w.num("threshold", h.update->gate_threshold);
    lines.push_back(w.line());
  }
  return lines;
}

inline int asInt(double v, std::size_t line_no, std::string_view what) {
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw LogError("line " + std::to_string(line_no) + ": field '" + std::string(what) + "' must be an integer");
  }
  return i;
}

}  // namespace detail

inline void writeLog(const SensorLog& log, const std::filesystem::path& path) {
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& r : log.records) {
    const double t = recordTime(r);
    if (!(t >= last)) throw LogError("writeLog: records are not timestamp-ordered");
    last = t;
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw LogError("writeLog: cannot open '" + path.string() + "' for writing");
    out << kLogMagic << ' ' << kLogVersion << '\n';
    for (const auto& line : detail::formatHeader(log.header)) out << line << '\n';
    for (const auto& r : log.records) out << detail::formatRecord(r) << '\n';
    out.flush();
    if (!out) throw LogError("writeLog: write to '" + path.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw LogError("writeLog: cannot move log into place: " + ec.message());
}

inline SensorLog parseLog(std::istream& in) {
  SensorLog log;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&line_no](const std::string& msg) -> LogError {
    return LogError("line " + std::to_string(line_no) + ": " + msg);
  };

  if (!std::getline(in, line)) throw LogError("line 1: missing format header");
  ++line_no;
  if (line != std::string(kLogMagic) + " " + std::to_string(kLogVersion)) {
    throw fail("expected header '" + std::string(kLogMagic) + " " + std::to_string(kLogVersion) + "'");
  }

  double last = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;

    std::istringstream tokens(line);
    std::string tag;
    tokens >> tag;
    std::vector<std::pair<std::string, double>> fields;
    std::string tok;
    while (tokens >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) throw fail("malformed field '" + tok + "'");
      double v = 0.0;
      const char* first = tok.data() + eq + 1;
      const char* last_ch = tok.data() + tok.size();
      const auto [ptr, err] = std::from_chars(first, last_ch, v);
      if (err != std::errc() || ptr != last_ch) throw fail("bad number in field '" + tok + "'");
      fields.emplace_back(tok.substr(0, eq), v);
    }
    detail::FieldReader f(std::move(fields), line_no);

    if (!tag.empty() && tag.front() == '@') {
      if (!log.records.empty()) throw fail("configuration line after records");
      if (tag == "@extrinsics") {
        Extrinsics e;
        e.camera_from_body = f.mat("rcq");
        e.marker_from_passive = f.mat("rmf");
        e.body_from_camera = f.vec("tqc");
        e.passive_from_marker = f.vec("tfm");
        log.header.extrinsics = e;
      } else if (tag == "@process_noise") {
        ProcessNoise p;
        p.accel_std = f.num("sa");
        p.gyro_std = f.num("sw");
        log.header.process_noise = p;
      } else if (tag == "@measurement_noise") {
        MeasurementNoiseModel m;
        m.position_std_at_reference = f.vec("s");
        m.reference_depth = f.num("ref");
        m.attitude_std = f.vec("r");
        m.min_depth = f.num("zmin");
        log.header.measurement_noise = m;
      } else if (tag == "@world") {
        log.header.world = WorldParams{f.vec("g")};
      } else if (tag == "@update") {
        UpdateOptions u;
        u.gating = detail::asInt(f.num("gating"), line_no, "gating") != 0;
        u.gate_threshold = f.num("threshold");
        log.header.update = u;
      } else {
        throw fail("unknown configuration tag '" + tag + "'");
      }
      f.finish();
      continue;
    }

    LogRecord rec;
    if (tag == "imu") {
      ImuRecord r;
      r.sample.t = f.num("t");
      r.sample.accel = f.vec("a");
      r.sample.gyro = f.vec("w");
      rec = r;
    } else if (tag == "marker") {
      MarkerRecord r;
      r.measurement.t = f.num("t");
      r.measurement.position = f.vec("p");
      r.measurement.orientation = f.mat("r");
      rec = r;
    } else if (tag == "passive_att") {
      PassiveAttitudeRecord r;
      r.t = f.num("t");
      r.attitude = f.mat("r");
      rec = r;
    } else if (tag == "truth") {
      TruthRecord r;
      r.t = f.num("t");
      r.phase = detail::asInt(f.num("phase"), line_no, "phase");
      r.position = f.vec("p");
      r.velocity = f.vec("v");
      r.attitude = f.mat("r");
      r.passive_attitude = f.mat("f");
      rec = r;
    } else if (tag == "estimate") {
      EstimateRecord r;
      r.t = f.num("t");
      const int src = detail::asInt(f.num("src"), line_no, "src");
      if (src < 0 || src > 2) throw fail("unknown estimate source " + std::to_string(src));
      r.source = static_cast<EstimateSource>(src);
      r.position = f.vec("p");
      r.velocity = f.vec("v");
      r.attitude = f.mat("r");
      r.covariance = f.upper("c");
      rec = r;
    } else {
      throw fail("unknown record type '" + tag + "'");
    }
    f.finish();

    const double t = recordTime(rec);
    if (!(t >= last)) throw fail("timestamp regression");
    last = t;
    log.records.push_back(std::move(rec));
  }
  return log;
}

inline SensorLog readLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LogError("readLog: cannot open '" + path.string() + "'");
  return parseLog(in);
}

// --- replay -----------------------------------------------------------------

struct ReplayOptions {
  /// Each overrides the corresponding header entry of the log.
  std::optional<Extrinsics> extrinsics;
  std::optional<ProcessNoise> process_noise;
  std::optional<MeasurementNoiseModel> measurement_noise;
  std::optional<WorldParams> world;
  std::optional<UpdateOptions> update;
  /// Starting belief; when absent the log's first `estimate src=0` is used.
  std::optional<Belief> initial;
};

struct ErrorSummary {
  std::size_t samples = 0;
  double position_mean = 0.0;
  double position_median = 0.0;
  double position_p95 = 0.0;
  double position_max = 0.0;
  double yaw_median_deg = 0.0;
  double yaw_max_deg = 0.0;
  double mean_nees = 0.0;
};

struct ReplayResult {
  std::vector<EstimateRecord> estimates;
  std::size_t updates_applied = 0;
  std::size_t markers_skipped = 0;
  std::optional<ErrorSummary> errors;
};

inline ReplayResult replay(const SensorLog& log, const ReplayOptions& options = {}) {
  FilterConfig cfg;
  if (options.extrinsics) {
    cfg.extrinsics = *options.extrinsics;
  } else if (log.header.extrinsics) {
    cfg.extrinsics = *log.header.extrinsics;
  } else {
    throw LogError("replay: extrinsics missing (not in log header or options)");
  }
  cfg.process = options.process_noise.value_or(log.header.process_noise.value_or(ProcessNoise{}));
  cfg.measurement =
      options.measurement_noise.value_or(log.header.measurement_noise.value_or(MeasurementNoiseModel{}));
  cfg.world = options.world.value_or(log.header.world.value_or(WorldParams{}));
  cfg.update = options.update.value_or(log.header.update.value_or(UpdateOptions{}));

  const bool has_imu = std::any_of(log.records.begin(), log.records.end(),
                                   [](const LogRecord& r) { return std::holds_alternative<ImuRecord>(r); });
  if (!has_imu) throw LogError("replay: log contains no IMU records");

  RelativeStateFilter filter(cfg);
  ReplayResult out;
  if (options.initial) {
    filter.initialize(*options.initial);
    out.estimates.push_back(EstimateRecord::from(filter.belief(), EstimateSource::Init));
  }

  std::optional<TruthRecord> truth;
  std::vector<double> pos_err;
  std::vector<double> yaw_err;
  std::vector<double> nees_values;

  for (const auto& rec : log.records) {
    if (const auto* imu = std::get_if<ImuRecord>(&rec)) {
      if (filter.onImu(imu->sample)) {
        out.estimates.push_back(EstimateRecord::from(filter.belief(), EstimateSource::Predict));
        if (truth && truth->t == imu->sample.t) {
          const auto& e = out.estimates.back();
          pos_err.push_back((e.position - truth->position).norm());
          const double dyaw = wrapAngle(yawPitchRoll(e.attitude)(0) - yawPitchRoll(truth->attitude)(0));
          yaw_err.push_back(std::abs(dyaw) * 180.0 / std::numbers::pi);
          nees_values.push_back(nees(filter.belief(), truth->position, truth->velocity, truth->attitude));
        }
      }
    } else if (const auto* pa = std::get_if<PassiveAttitudeRecord>(&rec)) {
      filter.onPassiveAttitude(pa->attitude);
    } else if (const auto* mk = std::get_if<MarkerRecord>(&rec)) {
      if (filter.onMarker(mk->measurement) == MarkerOutcome::Applied) {
        ++out.updates_applied;
        out.estimates.push_back(EstimateRecord::from(filter.belief(), EstimateSource::Update));
      } else {
        ++out.markers_skipped;
      }
    } else if (const auto* tr = std::get_if<TruthRecord>(&rec)) {
      truth = *tr;
    } else if (const auto* est = std::get_if<EstimateRecord>(&rec)) {
      if (est->source == EstimateSource::Init && !filter.initialized()) {
        filter.initialize(est->toBelief());
        out.estimates.push_back(EstimateRecord::from(filter.belief(), EstimateSource::Init));
      }
    }
  }
  if (!filter.initialized()) throw LogError("replay: no initial estimate in log or options");

  if (!pos_err.empty()) {
    ErrorSummary s;
    s.samples = pos_err.size();
    s.position_mean = mean(pos_err);
    s.position_median = median(pos_err);
    s.position_p95 = quantile(pos_err, 0.95);
    s.position_max = maxOf(pos_err);
    s.yaw_median_deg = median(yaw_err);
    s.yaw_max_deg = maxOf(yaw_err);
    s.mean_nees = mean(nees_values);
    out.errors = s;
  }
  return out;
}

}  // namespace dockekf
