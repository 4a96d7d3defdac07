#pragma once

// Closed-loop two-vehicle docking experiment. The passive vehicle hovers on
// ground truth; the active vehicle flies to a rendezvous point below it on
// ground truth, switches to the onboard filter at the first marker detection,
// climbs, and the passive vehicle cuts its motors once the onboard estimate is
// inside the docking range.

#include "dockekf/dynamics.hpp"
#include "dockekf/estimator.hpp"
#include "dockekf/filter.hpp"
#include "dockekf/log_io.hpp"
#include "dockekf/sensors.hpp"
#include "dockekf/stats.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace dockekf {

struct DockingThresholds {
  double vertical_gap_max = 0.15;        // m
  double horizontal_offset_max = 0.025;  // m
  /// Vertical distance between the two body origins when the platforms touch.
  double contact_separation = 0.10;      // m

  void validate() const {
    if (!(vertical_gap_max > 0.0) || !(horizontal_offset_max > 0.0) || !(contact_separation >= 0.0)) {
      throw std::invalid_argument("docking thresholds must be positive");
    }
  }
};

/// Platform gap implied by a relative position (active below passive).
inline double verticalGap(const Vec3& relative_position, const DockingThresholds& th) {
  return -relative_position.z() - th.contact_separation;
}

/// Docking is commanded from the onboard estimate only.
inline bool dockingCriterion(const Vec3& estimated_position, const DockingThresholds& th) {
  return std::abs(verticalGap(estimated_position, th)) <= th.vertical_gap_max &&
         estimated_position.head<2>().norm() <= th.horizontal_offset_max;
}

enum class Phase : int { Offboard = 0, Onboard = 1, Ascent = 2, Capture = 3, Docked = 4, Undocking = 5, Undocked = 6, Failed = 7 };

inline const char* phaseName(Phase p) {
  switch (p) {
    case Phase::Offboard: return "offboard";
    case Phase::Onboard: return "onboard";
    case Phase::Ascent: return "ascent";
    case Phase::Capture: return "capture";
    case Phase::Docked: return "docked";
    case Phase::Undocking: return "undocking";
    case Phase::Undocked: return "undocked";
    case Phase::Failed: return "failed";
  }
  return "?";
}

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration = 30.0;  // s

  double physics_rate = 1000.0;          // Hz
  double imu_rate = 500.0;               // Hz
  double passive_attitude_rate = 100.0;  // Hz
  CameraModel camera;

  VehicleParams active = activeVehicleDefaults();
  VehicleParams passive = passiveVehicleDefaults();
  ControlGains active_gains;
  ControlGains passive_gains;
  DisturbanceConfig disturbance;

  Extrinsics extrinsics = defaultExtrinsics();
  /// Noise applied to the synthesized sensors.
  ProcessNoise imu_noise;
  MeasurementNoiseModel marker_noise;
  /// Noise assumed by the filter.
  ProcessNoise filter_process_noise;
  MeasurementNoiseModel filter_measurement_noise;
  UpdateOptions filter_update;

  DockingThresholds thresholds;

  Vec3 passive_hover_position{0.0, 0.0, 1.5};
  Vec3 active_start_offset{-0.6, 0.0, -0.6};  // relative to the passive vehicle
  Vec3 rendezvous_offset{0.0, 0.0, -0.6};
  double approach_speed = 0.3;  // m/s, straight-line ramp from start to rendezvous
  double settle_time = 0.5;     // s at the rendezvous on the filter before climbing
  double ascent_speed = 0.1;    // m/s
  /// Onboard flight without a marker detection for this long aborts the run
  /// (control would fall back to offboard sensing).
  double marker_timeout = 0.5;  // s
  double target_gap = 0.08;     // m, platform gap the climb aims for
  /// The criterion must hold continuously this long before the motors stop.
  double criterion_dwell = 0.5;     // s
  double capture_tolerance = 0.03;  // m, horizontal truth error at motor stop the mechanism absorbs
  double capture_timeout = 1.0;     // s after motor stop

  /// Offboard (motion capture) estimate error at the switchover.
  Vec3 offboard_error_std{0.005, 0.01, 0.005};  // position m, velocity m/s, attitude rad
  /// Initial filter standard deviations for position, velocity, attitude.
  Vec3 initial_std{0.01, 0.02, 0.01};

  bool undock = false;
  double docked_dwell = 2.0;      // s
  double undock_duration = 6.0;   // s

  bool record_log = true;

  /// Added to the estimate before the docking check. Test hook.
  Vec3 criterion_estimate_bias = Vec3::Zero();

  static Extrinsics defaultExtrinsics() {
    Extrinsics e;
    // Upward-looking camera 4 cm above the body origin, image x along -y_Q.
    e.camera_from_body = expMap(Vec3(0.0, 0.0, -std::numbers::pi / 2.0));
    e.body_from_camera = e.camera_from_body * Vec3(0.0, 0.0, -0.04);
    // Marker 3 cm below the passive origin, facing down.
    e.marker_from_passive = expMap(Vec3(std::numbers::pi, 0.0, 0.0));
    e.passive_from_marker = Vec3(0.0, 0.0, 0.03);
    return e;
  }

  int imuDecimation() const { return decimation(imu_rate, "imu_rate"); }
  int passiveAttitudeDecimation() const { return decimation(passive_attitude_rate, "passive_attitude_rate"); }

  Covariance initialCovariance() const { return diagonalCovariance(initial_std); }

  FilterConfig filterConfig() const {
    return {extrinsics, filter_process_noise, filter_measurement_noise, WorldParams{active.gravity}, filter_update};
  }

  void validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be positive");
    if (!(physics_rate > 0.0)) throw std::invalid_argument("scenario: physics_rate must be positive");
    imuDecimation();
    passiveAttitudeDecimation();
    camera.validate();
    active.validate();
    passive.validate();
    extrinsics.validate();
    imu_noise.validate();
    filter_process_noise.validate();
    marker_noise.validate();
    filter_measurement_noise.validate();
    thresholds.validate();
    if (!(approach_speed > 0.0)) throw std::invalid_argument("scenario: approach_speed must be positive");
    if (!(ascent_speed > 0.0)) throw std::invalid_argument("scenario: ascent_speed must be positive");
    if (!(marker_timeout > 0.0)) throw std::invalid_argument("scenario: marker_timeout must be positive");
    if (!(settle_time >= 0.0) || !(criterion_dwell >= 0.0)) {
      throw std::invalid_argument("scenario: settle_time and criterion_dwell must be nonnegative");
    }
    if ((initial_std.array() < 0.0).any() || (offboard_error_std.array() < 0.0).any()) {
      throw std::invalid_argument("scenario: standard deviations must be nonnegative");
    }
  }

 private:
  int decimation(double rate, const char* name) const {
    if (!(rate > 0.0)) throw std::invalid_argument(std::string("scenario: ") + name + " must be positive");
    const double ratio = physics_rate / rate;
    const long r = std::lround(ratio);
    if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9) {
      throw std::invalid_argument(std::string("scenario: physics_rate must be an integer multiple of ") + name);
    }
    return static_cast<int>(r);
  }
};

/// Estimation error at one IMU step while the onboard filter is flying.
struct StepError {
  double t = 0.0;
  Phase phase = Phase::Onboard;
  Vec3 position_error = Vec3::Zero();  // estimate - truth
  double position_error_norm = 0.0;
  double yaw_error = 0.0;    // rad, absolute
  double pitch_error = 0.0;  // rad, absolute
  double roll_error = 0.0;   // rad, absolute
  double nees = 0.0;
  bool in_docking_range = false;  // true platform gap within vertical_gap_max
  Vec3 true_position = Vec3::Zero();
  Vec3 estimated_position = Vec3::Zero();
};

struct RunMetrics {
  std::uint64_t seed = 0;
  bool success = false;
  Phase final_phase = Phase::Offboard;
  std::string failure_reason;
  std::optional<double> switchover_time;
  std::optional<double> motor_stop_time;
  std::optional<double> time_to_dock;
  double capture_offset = 0.0;  // horizontal truth offset at motor stop
  std::size_t markers_detected = 0;
  std::size_t updates_applied = 0;
  std::size_t updates_rejected = 0;
  std::vector<StepError> steps;
  std::vector<std::pair<double, Phase>> transitions;

  std::vector<double> positionErrors(bool in_range_only = false) const {
    std::vector<double> out;
    for (const auto& s : steps) {
      if (!in_range_only || s.in_docking_range) out.push_back(s.position_error_norm);
    }
    return out;
  }
  double maxInRangeError() const {
    const auto e = positionErrors(true);
    return e.empty() ? 0.0 : maxOf(e);
  }
};

struct RunResult {
  RunMetrics metrics;
  SensorLog log;
};

namespace detail {

struct RngSet {
  RngStream imu;
  RngStream camera;
  RngStream disturbance;
  RngStream offboard;
  explicit RngSet(std::uint64_t seed) : imu(seed, 1), camera(seed, 2), disturbance(seed, 3), offboard(seed, 4) {}
};

inline bool tickCrosses(long i, double physics_rate, double rate) {
  if (i == 0) return true;
  return std::floor(static_cast<double>(i) * rate / physics_rate) >
         std::floor(static_cast<double>(i - 1) * rate / physics_rate);
}

}  // namespace detail

inline RunResult runDocking(const ScenarioConfig& cfg) {
  cfg.validate();
  detail::RngSet rng(cfg.seed);
  RunResult result;
  RunMetrics& m = result.metrics;
  m.seed = cfg.seed;

  const FilterConfig fcfg = cfg.filterConfig();
  RelativeStateFilter filter(fcfg);
  if (cfg.record_log) {
    result.log.header.extrinsics = fcfg.extrinsics;
    result.log.header.process_noise = fcfg.process;
    result.log.header.measurement_noise = fcfg.measurement;
    result.log.header.world = fcfg.world;
    result.log.header.update = fcfg.update;
  }
  auto record = [&](LogRecord r) {
    if (cfg.record_log) result.log.records.push_back(std::move(r));
  };

  VehicleTruth passive;
  passive.position = cfg.passive_hover_position;
  VehicleTruth active;
  active.position = cfg.passive_hover_position + cfg.active_start_offset;

  Phase phase = Phase::Offboard;
  auto enter = [&](Phase p, double t) {
    phase = p;
    m.transitions.emplace_back(t, p);
  };
  m.transitions.emplace_back(0.0, phase);

  const double dt = 1.0 / cfg.physics_rate;
  const int imu_every = cfg.imuDecimation();
  const int att_every = cfg.passiveAttitudeDecimation();
  const long ticks = std::lround(cfg.duration * cfg.physics_rate);

  bool passive_motors = true;
  double ascent_start = 0.0;
  double last_detection = 0.0;
  double docked_at = 0.0;
  double undock_start = 0.0;
  std::optional<double> criterion_since;
  const double rendezvous_z = cfg.rendezvous_offset.z();
  const double climb_top_z = -(cfg.thresholds.contact_separation + cfg.target_gap);
  const Vec3 approach = cfg.rendezvous_offset - cfg.active_start_offset;
  const double approach_end = approach.norm() / cfg.approach_speed;
  Vec3 last_gyro = Vec3::Zero();
  WrenchInput active_wrench;
  WrenchInput passive_wrench;

  auto relativeTruth = [&]() { return Vec3(active.position - passive.position); };

  for (long i = 0; i <= ticks; ++i) {
    const double t = static_cast<double>(i) * dt;
    active.t = t;
    passive.t = t;
    const bool finished = phase == Phase::Failed || phase == Phase::Undocked || (phase == Phase::Docked && !cfg.undock);
    if (finished) break;

    if (i % imu_every == 0) {
      record(TruthRecord{t, static_cast<int>(phase), relativeTruth(), Vec3(active.velocity - passive.velocity),
                         active.attitude, passive.attitude});

      // Passive vehicle: offboard hover, or motors off during capture.
      if (passive_motors) {
        ControlState ps{passive.position - cfg.passive_hover_position, passive.velocity, passive.attitude,
                        passive.angular_rate};
        passive_wrench = computeControl(ps, Setpoint{}, cfg.passive, cfg.passive_gains);
      } else {
        passive_wrench = WrenchInput{};
      }

      // Active vehicle setpoint from the phase schedule.
      Setpoint sp;
      sp.position = cfg.rendezvous_offset;
      if (t < approach_end) {
        sp.position = cfg.active_start_offset + approach * (t / approach_end);
        sp.velocity = approach / approach_end;
      }
      if (phase == Phase::Ascent || phase == Phase::Capture) {
        const double z = std::min(rendezvous_z + cfg.ascent_speed * (t - ascent_start), climb_top_z);
        sp.position = Vec3(0.0, 0.0, z);
        if (z < climb_top_z) sp.velocity = Vec3(0.0, 0.0, cfg.ascent_speed);
      } else if (phase == Phase::Undocking) {
        const double z = std::max(climb_top_z - cfg.ascent_speed * (t - undock_start), rendezvous_z);
        sp.position = Vec3(0.0, 0.0, z);
      }

      ControlState as;
      if (phase == Phase::Offboard) {
        as = {relativeTruth(), Vec3(active.velocity - passive.velocity), active.attitude, active.angular_rate};
      } else {
        const PoseEstimate e = currentEstimate(filter.belief().state);
        as = {e.position, e.velocity, e.attitude, last_gyro};
      }
      active_wrench = computeControl(as, sp, cfg.active, cfg.active_gains);
      const Disturbance d = injectDisturbance(relativeTruth(), cfg.disturbance, rng.disturbance);
      active_wrench.disturbance_force = d.force;
      active_wrench.disturbance_torque = d.torque;
      active.acceleration = linearAcceleration(cfg.active, active_wrench);
      passive.acceleration = linearAcceleration(cfg.passive, passive_wrench);

      const ImuSample imu = synthesizeImu(active, cfg.imu_noise, cfg.active.gravity, rng.imu);
      last_gyro = imu.gyro;
      record(ImuRecord{imu});
      if (filter.onImu(imu)) {
        const Belief& b = filter.belief();
        record(EstimateRecord::from(b, EstimateSource::Predict));

        if (phase == Phase::Onboard || phase == Phase::Ascent) {
          const Vec3 rel = relativeTruth();
          const PoseEstimate e = currentEstimate(b.state);
          const Vec3 ypr_est = yawPitchRoll(e.attitude);
          const Vec3 ypr_true = yawPitchRoll(active.attitude);
          StepError s;
          s.t = t;
          s.phase = phase;
          s.position_error = e.position - rel;
          s.position_error_norm = s.position_error.norm();
          s.yaw_error = std::abs(wrapAngle(ypr_est(0) - ypr_true(0)));
          s.pitch_error = std::abs(ypr_est(1) - ypr_true(1));
          s.roll_error = std::abs(wrapAngle(ypr_est(2) - ypr_true(2)));
          s.nees = nees(b, rel, Vec3(active.velocity - passive.velocity), active.attitude);
          s.in_docking_range = verticalGap(rel, cfg.thresholds) <= cfg.thresholds.vertical_gap_max;
          s.true_position = rel;
          s.estimated_position = e.position;
          m.steps.push_back(s);
        }
      }
    }

    if (i % att_every == 0) {
      record(PassiveAttitudeRecord{t, passive.attitude});
      filter.onPassiveAttitude(passive.attitude);
    }

    if (detail::tickCrosses(i, cfg.physics_rate, cfg.camera.frame_rate)) {
      const auto meas = synthesizeMarkerMeasurement(active, passive, cfg.extrinsics, cfg.camera, cfg.marker_noise,
                                                    rng.camera);
      if (meas) {
        ++m.markers_detected;
        last_detection = t;
        if (phase == Phase::Offboard) {
          // Hand over from the offboard estimate at the first detection.
          const Vec3 rel = relativeTruth();
          const Vec3 p0 = rel + cfg.offboard_error_std(0) * rng.offboard.gaussian3();
          const Vec3 v0 =
              Vec3(active.velocity - passive.velocity) + cfg.offboard_error_std(1) * rng.offboard.gaussian3();
          const Mat3 r0 = reorthonormalize(active.attitude * expMap(Vec3(cfg.offboard_error_std(2) *
                                                                         rng.offboard.gaussian3())));
          filter.initialize(initialize(p0, v0, r0, cfg.initialCovariance(), t));
          record(EstimateRecord::from(filter.belief(), EstimateSource::Init));
          m.switchover_time = t;
          enter(Phase::Onboard, t);
        }
        record(MarkerRecord{*meas});
        switch (filter.onMarker(*meas)) {
          case MarkerOutcome::Applied:
            ++m.updates_applied;
            record(EstimateRecord::from(filter.belief(), EstimateSource::Update));
            break;
          case MarkerOutcome::Rejected:
          case MarkerOutcome::Gated:
            ++m.updates_rejected;
            break;
          default:
            break;
        }
      }
    }

    // Phase logic, evaluated at IMU rate.
    if (i % imu_every == 0) {
      if ((phase == Phase::Onboard || phase == Phase::Ascent) && t - last_detection > cfg.marker_timeout) {
        m.failure_reason = "marker lost";
        enter(Phase::Failed, t);
        continue;
      }
      if (phase == Phase::Onboard && t - std::max(*m.switchover_time, approach_end) >= cfg.settle_time) {
        ascent_start = t;
        enter(Phase::Ascent, t);
      }
      if (phase == Phase::Ascent) {
        const Vec3 p_hat = filter.belief().state.position + cfg.criterion_estimate_bias;
        if (!dockingCriterion(p_hat, cfg.thresholds)) {
          criterion_since.reset();
        } else if (!criterion_since) {
          criterion_since = t;
        }
        if (criterion_since && t - *criterion_since >= cfg.criterion_dwell - 1e-9) {
          passive_motors = false;
          m.motor_stop_time = t;
          m.capture_offset = relativeTruth().head<2>().norm();
          enter(Phase::Capture, t);
        }
      }
      if (phase == Phase::Undocking && t - undock_start >= cfg.undock_duration) {
        enter(Phase::Undocked, t);
      }
    }
    if (phase == Phase::Docked && cfg.undock && t - docked_at >= cfg.docked_dwell) {
      passive_motors = true;
      undock_start = t;
      enter(Phase::Undocking, t);
    }

    // Physics.
    const bool attached = phase == Phase::Docked;
    active = stepDynamics(active, cfg.active, active_wrench, dt);
    if (attached) {
      passive.position = active.position + Vec3(0.0, 0.0, cfg.thresholds.contact_separation);
      passive.velocity = active.velocity;
    } else {
      passive = stepDynamics(passive, cfg.passive, passive_wrench, dt);
    }

    if (phase == Phase::Capture) {
      const Vec3 rel = relativeTruth();
      if (verticalGap(rel, cfg.thresholds) <= 0.0) {
        if (m.capture_offset <= cfg.capture_tolerance) {
          m.success = true;
          m.time_to_dock = t + dt;
          docked_at = t + dt;
          enter(Phase::Docked, t + dt);
          if (cfg.undock) continue;
        } else {
          m.failure_reason = "capture missed the mechanism tolerance";
          enter(Phase::Failed, t + dt);
        }
      } else if (t - *m.motor_stop_time > cfg.capture_timeout) {
        m.failure_reason = "no contact after motor stop";
        enter(Phase::Failed, t + dt);
      }
    }
  }

  if (!m.success && phase != Phase::Failed) {
    m.failure_reason = m.switchover_time ? "docking criterion never met" : "marker never detected";
    enter(Phase::Failed, cfg.duration);
  }
  m.final_phase = phase;
  return result;
}

// --- batches ----------------------------------------------------------------

struct PooledStatistics {
  std::size_t steps = 0;
  std::size_t in_range_steps = 0;
  double position_median = 0.0;
  double position_p95 = 0.0;
  double position_max = 0.0;
  double fraction_position_below_10cm = 0.0;
  double in_range_median = 0.0;
  double in_range_p95 = 0.0;
  double in_range_max = 0.0;
  double yaw_median_deg = 0.0;
  double fraction_yaw_below_5deg = 0.0;
  double roll_median_deg = 0.0;
  double pitch_median_deg = 0.0;
  double mean_nees = 0.0;
};

inline PooledStatistics poolStatistics(const std::vector<const RunMetrics*>& runs) {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  std::vector<double> pos;
  std::vector<double> in_range;
  std::vector<double> yaw;
  std::vector<double> roll;
  std::vector<double> pitch;
  std::vector<double> nees_values;
  for (const RunMetrics* r : runs) {
    for (const auto& s : r->steps) {
      pos.push_back(s.position_error_norm);
      if (s.in_docking_range) in_range.push_back(s.position_error_norm);
      yaw.push_back(s.yaw_error * kDeg);
      roll.push_back(s.roll_error * kDeg);
      pitch.push_back(s.pitch_error * kDeg);
      nees_values.push_back(s.nees);
    }
  }
  PooledStatistics p;
  p.steps = pos.size();
  p.in_range_steps = in_range.size();
  p.position_median = median(pos);
  p.position_p95 = quantile(pos, 0.95);
  p.position_max = maxOf(pos);
  p.fraction_position_below_10cm = fractionBelow(pos, 0.10);
  p.in_range_median = median(in_range);
  p.in_range_p95 = quantile(in_range, 0.95);
  p.in_range_max = maxOf(in_range);
  p.yaw_median_deg = median(yaw);
  p.fraction_yaw_below_5deg = fractionBelow(yaw, 5.0);
  p.roll_median_deg = median(roll);
  p.pitch_median_deg = median(pitch);
  p.mean_nees = mean(nees_values);
  return p;
}

struct MonteCarloSummary {
  std::vector<RunMetrics> runs;
  std::size_t successes = 0;
  double success_rate = 0.0;
  PooledStatistics pooled;
};

/// Run `index` uses seed `base_seed + index`; results do not depend on the
/// number of worker threads.
inline MonteCarloSummary runMonteCarlo(const ScenarioConfig& base, std::size_t n_runs, unsigned threads = 0) {
  if (n_runs < 1) throw std::invalid_argument("runMonteCarlo: need at least one run");
  base.validate();
  MonteCarloSummary out;
  out.runs.resize(n_runs);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_runs));

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n_runs; i = next++) {
      ScenarioConfig cfg = base;
      cfg.seed = base.seed + i;
      cfg.record_log = false;
      out.runs[i] = runDocking(cfg).metrics;
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  pool.clear();

  std::vector<const RunMetrics*> ptrs;
  for (const auto& r : out.runs) {
    ptrs.push_back(&r);
    if (r.success) ++out.successes;
  }
  out.success_rate = static_cast<double>(out.successes) / static_cast<double>(n_runs);
  out.pooled = poolStatistics(ptrs);
  return out;
}

}  // namespace dockekf
