#pragma once

// Self-checks of the filter: analytic Jacobians against central finite
// differences, covariance health over a long randomized soak, and NEES
// consistency on a hover scenario with matched noise.

#include "dockekf/estimator.hpp"
#include "dockekf/filter.hpp"
#include "dockekf/sensors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace dockekf {

/// Deliberate defects for exercising the checks themselves.
enum class VerifyFault { None, ProcessJacobian, MeasurementJacobian, Covariance, Nees };

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double lower = 0.0;  // acceptance interval [lower, upper]
  double upper = 0.0;
  std::string detail;

  /// Distance to the nearest bound; negative when violated.
  double margin() const { return std::min(value - lower, upper - value); }
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

// --- random configurations ---------------------------------------------------

inline Vec3 uniformVec3(RngStream& rng, double half_width) {
  return {half_width * (2.0 * rng.uniform() - 1.0), half_width * (2.0 * rng.uniform() - 1.0),
          half_width * (2.0 * rng.uniform() - 1.0)};
}

/// Rotation with a uniformly drawn axis and an angle below pi.
inline Mat3 randomRotation(RngStream& rng, double max_angle = 0.999 * std::numbers::pi) {
  Vec3 axis = rng.gaussian3();
  while (axis.norm() < 1e-6) axis = rng.gaussian3();
  return expMap(Vec3(axis.normalized() * (max_angle * rng.uniform())));
}

struct JacobianConfiguration {
  EstimatorState state;
  ImuSample imu;
  double dt = 0.002;
  Extrinsics extrinsics;
  Mat3 passive_attitude = Mat3::Identity();
};

inline JacobianConfiguration randomJacobianConfiguration(RngStream& rng) {
  JacobianConfiguration c;
  c.state.position = uniformVec3(rng, 1.0);
  c.state.velocity = uniformVec3(rng, 1.0);
  c.state.reference_attitude = randomRotation(rng);
  c.imu.accel = uniformVec3(rng, 10.0);
  c.imu.gyro = uniformVec3(rng, 3.0);
  c.dt = 1e-3 + 9e-3 * rng.uniform();
  c.extrinsics.camera_from_body = randomRotation(rng);
  c.extrinsics.marker_from_passive = randomRotation(rng);
  c.extrinsics.body_from_camera = uniformVec3(rng, 0.1);
  c.extrinsics.passive_from_marker = uniformVec3(rng, 0.1);
  c.passive_attitude = randomRotation(rng, 0.5);
  return c;
}

// --- Jacobians ---------------------------------------------------------------

inline EstimatorState perturbed(const EstimatorState& s, const Vec9& dx) {
  EstimatorState out = s;
  out.position += dx.segment<3>(kPos);
  out.velocity += dx.segment<3>(kVel);
  out.attitude_error += dx.segment<3>(kAtt);
  return out;
}

/// Measurement (t_MC, sigma) as a function of the error state, with sigma
/// taken against the reference orientation of `nominal`.
inline Vec6 measurementFunction(const EstimatorState& nominal, const Vec9& dx, const Extrinsics& ex,
                                const Mat3& passive_attitude) {
  const EstimatorState s = perturbed(nominal, dx);
  const Mat3 r = s.reference_attitude * expMap(s.attitude_error);
  const Mat3 r_mc = ex.marker_from_passive * passive_attitude.transpose() * r * ex.camera_from_body.transpose();
  Vec6 z;
  z << predictedMarkerPosition(s, ex, passive_attitude),
      logMap(predictedRelativeOrientation(nominal, ex, passive_attitude).transpose() * r_mc).vector;
  return z;
}

template <int Rows, typename F>
Eigen::Matrix<double, Rows, 9> centralDifference(F&& f, double h) {
  Eigen::Matrix<double, Rows, 9> j;
  for (int k = 0; k < 9; ++k) {
    const Vec9 step = Vec9::Unit(k) * h;
    j.col(k) = (f(step) - f(Vec9(-step))) / (2.0 * h);
  }
  return j;
}

template <typename Derived, typename Other>
double relativeError(const Eigen::MatrixBase<Derived>& analytic, const Eigen::MatrixBase<Other>& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
}

inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kJacobianTolerance = 1e-5;

struct JacobianErrors {
  double process = 0.0;
  double measurement = 0.0;
};

inline JacobianErrors jacobianErrors(const JacobianConfiguration& c, VerifyFault fault = VerifyFault::None) {
  const WorldParams world;
  Mat9 a = processJacobian(c.state, c.imu, c.dt);
  if (fault == VerifyFault::ProcessJacobian) a.block<3, 3>(kVel, kAtt) *= -1.0;
  const auto a_fd = centralDifference<9>(
      [&](const Vec9& dx) { return propagateErrorState(perturbed(c.state, dx), c.imu, c.dt, world); },
      kFiniteDifferenceStep);

  Mat69 h = measurementJacobian(c.state, c.extrinsics, c.passive_attitude);
  if (fault == VerifyFault::MeasurementJacobian) h.block<3, 3>(0, kAtt) *= -1.0;
  const auto h_fd = centralDifference<6>(
      [&](const Vec9& dx) { return measurementFunction(c.state, dx, c.extrinsics, c.passive_attitude); },
      kFiniteDifferenceStep);

  return {relativeError(a, a_fd), relativeError(h, h_fd)};
}

inline std::vector<CheckResult> checkJacobians(std::size_t configurations = 100, std::uint64_t seed = 7,
                                               VerifyFault fault = VerifyFault::None) {
  RngStream rng(seed, 11);
  double worst_a = 0.0;
  double worst_h = 0.0;
  for (std::size_t i = 0; i < configurations; ++i) {
    const JacobianErrors e = jacobianErrors(randomJacobianConfiguration(rng), fault);
    worst_a = std::max(worst_a, e.process);
    worst_h = std::max(worst_h, e.measurement);
  }
  const std::string detail = "worst relative error over " + std::to_string(configurations) + " configurations";
  return {{"process-jacobian", worst_a <= kJacobianTolerance, worst_a, 0.0, kJacobianTolerance, detail},
          {"measurement-jacobian", worst_h <= kJacobianTolerance, worst_h, 0.0, kJacobianTolerance, detail}};
}

// --- covariance soak ---------------------------------------------------------

struct SoakStatistics {
  double max_asymmetry = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t predicts = 0;
  std::size_t updates = 0;
};

/// Alternating predict/update with randomized samples, timing and geometry.
inline SoakStatistics covarianceSoak(std::size_t steps = 100000, std::uint64_t seed = 5,
                                     VerifyFault fault = VerifyFault::None) {
  RngStream rng(seed, 12);
  const ProcessNoise noise;
  const MeasurementNoiseModel meas_noise;
  const WorldParams world;
  Extrinsics ex;
  ex.camera_from_body = expMap(Vec3(0.0, 0.0, -std::numbers::pi / 2.0));

  Belief b = initialize(Vec3(0.0, 0.0, -0.6), Vec3::Zero(), Mat3::Identity(),
                        diagonalCovariance(Vec3(0.05, 0.05, 0.1)));
  SoakStatistics st;
  st.min_eigenvalue = minEigenvalue(b.covariance);
  auto observe = [&](const Mat9& p) {
    st.max_asymmetry = std::max(st.max_asymmetry, (p - p.transpose()).cwiseAbs().maxCoeff());
    st.min_eigenvalue = std::min(st.min_eigenvalue, minEigenvalue(p));
  };

  for (std::size_t i = 0; i < steps; ++i) {
    if (i % 2 == 0) {
      ImuSample imu;
      imu.accel = currentEstimate(b.state).attitude.transpose() * (-world.gravity) + uniformVec3(rng, 3.0);
      imu.gyro = uniformVec3(rng, 2.0);
      const double dt = 1e-3 + 9e-3 * rng.uniform();
      imu.t = b.state.t + dt;
      b = predict(b, imu, dt, noise, world);
      ++st.predicts;
    } else {
      // Measurements scattered around a vehicle hanging below the marker,
      // with the estimate pulled back there so the geometry stays sane.
      const Mat3 passive = randomRotation(rng, 0.3);
      EstimatorState truth = b.state;
      truth.position = Vec3(0.3 * (2.0 * rng.uniform() - 1.0), 0.3 * (2.0 * rng.uniform() - 1.0),
                            -0.15 - 0.8 * rng.uniform());
      truth.reference_attitude = randomRotation(rng, 0.4);
      b.state.position = truth.position + uniformVec3(rng, 0.05);
      b.state.reference_attitude = reorthonormalize(truth.reference_attitude * expMap(uniformVec3(rng, 0.05)));
      RelativePoseMeasurement m;
      m.t = b.state.t;
      m.position = predictedMarkerPosition(truth, ex, passive) + 0.02 * rng.gaussian3();
      m.orientation = predictedRelativeOrientation(truth, ex, passive) * expMap(Vec3(0.05 * rng.gaussian3()));
      b = update(b, m, ex, passive, meas_noise).belief;
      ++st.updates;
      if (fault == VerifyFault::Covariance && i + 1 == steps) b.covariance(0, 1) += 1e-6;
    }
    observe(b.covariance);
  }
  return st;
}

inline std::vector<CheckResult> checkCovarianceHealth(std::size_t steps = 100000, std::uint64_t seed = 5,
                                                      VerifyFault fault = VerifyFault::None) {
  const SoakStatistics st = covarianceSoak(steps, seed, fault);
  const std::string detail = std::to_string(st.predicts) + " predicts, " + std::to_string(st.updates) + " updates";
  return {{"covariance-symmetry", st.max_asymmetry <= kSymmetryTolerance, st.max_asymmetry, 0.0, kSymmetryTolerance,
           detail},
          {"covariance-min-eigenvalue", st.min_eigenvalue >= -kSymmetryTolerance, st.min_eigenvalue,
           -kSymmetryTolerance, std::numeric_limits<double>::infinity(), detail}};
}

// --- NEES on hover -------------------------------------------------------------

struct HoverConfig {
  double duration = 10.0;          // s
  double imu_rate = 500.0;         // Hz
  double camera_rate = 30.0;       // Hz
  double dropout_probability = 0.05;
  Vec3 relative_position{0.0, 0.0, -0.6};
  Vec3 attitude_rotation_vector{0.03, -0.02, 0.4};  // small tilt plus yaw
  Vec3 initial_std{0.05, 0.05, 0.1};                // position, velocity, attitude
  ProcessNoise imu_noise;
  MeasurementNoiseModel marker_noise;
  /// Filter-side noise; equal to the sensor noise for a consistent filter.
  ProcessNoise filter_process_noise;
  MeasurementNoiseModel filter_measurement_noise;
};

/// NEES at the end of one hover run with a stationary truth.
inline double hoverNees(const HoverConfig& cfg, std::uint64_t seed) {
  RngStream imu_rng(seed, 1);
  RngStream cam_rng(seed, 2);
  RngStream init_rng(seed, 4);

  Extrinsics ex;
  ex.camera_from_body = expMap(Vec3(0.0, 0.0, -std::numbers::pi / 2.0));
  ex.body_from_camera = ex.camera_from_body * Vec3(0.0, 0.0, -0.04);
  ex.marker_from_passive = expMap(Vec3(std::numbers::pi, 0.0, 0.0));
  ex.passive_from_marker = Vec3(0.0, 0.0, 0.03);
  const WorldParams world;

  BodyTruth passive;
  passive.position = Vec3(0.0, 0.0, 1.5);
  BodyTruth active;
  active.position = passive.position + cfg.relative_position;
  active.attitude = expMap(cfg.attitude_rotation_vector);

  CameraModel camera;
  camera.frame_rate = cfg.camera_rate;
  camera.dropout_probability = cfg.dropout_probability;

  const Vec3& sd = cfg.initial_std;
  const Vec3 p0 = cfg.relative_position + sd(0) * init_rng.gaussian3();
  const Vec3 v0 = sd(1) * init_rng.gaussian3();
  const Mat3 r0 = active.attitude * expMap(Vec3(sd(2) * init_rng.gaussian3()));

  RelativeStateFilter filter(FilterConfig{ex, cfg.filter_process_noise, cfg.filter_measurement_noise, world, {}});
  filter.initialize(initialize(p0, v0, r0, diagonalCovariance(sd), 0.0));
  filter.onPassiveAttitude(passive.attitude);

  const auto n_imu = static_cast<long>(std::lround(cfg.duration * cfg.imu_rate));
  long frames = 0;
  for (long k = 0; k <= n_imu; ++k) {
    const double t = static_cast<double>(k) / cfg.imu_rate;
    active.t = t;
    passive.t = t;
    filter.onImu(synthesizeImu(active, cfg.imu_noise, world.gravity, imu_rng));
    if (static_cast<long>(std::floor(t * cfg.camera_rate + 1e-9)) >= frames) {
      ++frames;
      if (const auto m = synthesizeMarkerMeasurement(active, passive, ex, camera, cfg.marker_noise, cam_rng)) {
        filter.onMarker(*m);
      }
    }
  }
  return nees(filter.belief(), cfg.relative_position, Vec3::Zero(), active.attitude);
}

struct NeesInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Two-sided interval for the mean of `runs` independent chi-square(dof) draws.
inline NeesInterval averageNeesInterval(std::size_t runs, int dof = 9, double confidence = 0.95) {
  const double n = static_cast<double>(runs);
  const boost::math::chi_squared dist(n * dof);
  const double tail = 0.5 * (1.0 - confidence);
  return {boost::math::quantile(dist, tail) / n, boost::math::quantile(boost::math::complement(dist, tail)) / n};
}

inline CheckResult checkNeesConsistency(std::size_t runs = 50, std::uint64_t seed = 1,
                                        VerifyFault fault = VerifyFault::None, HoverConfig cfg = {}) {
  if (fault == VerifyFault::Nees) {
    // Overconfident filter: claims ten times less accelerometer noise.
    cfg.filter_process_noise.accel_std *= 0.1;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < runs; ++i) sum += hoverNees(cfg, seed + i);
  const double average = sum / static_cast<double>(runs);
  const NeesInterval bounds = averageNeesInterval(runs);
  return {"nees-consistency", average >= bounds.lower && average <= bounds.upper, average, bounds.lower,
          bounds.upper, "mean NEES over " + std::to_string(runs) + " hover runs, 9 dof, 95% two-sided"};
}

struct VerifyOptions {
  VerifyFault fault = VerifyFault::None;
  std::size_t jacobian_configurations = 100;
  std::size_t soak_steps = 100000;
  std::size_t nees_runs = 50;
};

inline VerificationReport runVerification(const VerifyOptions& options = {}) {
  VerificationReport report;
  for (auto& c : checkJacobians(options.jacobian_configurations, 7, options.fault)) report.checks.push_back(c);
  for (auto& c : checkCovarianceHealth(options.soak_steps, 5, options.fault)) report.checks.push_back(c);
  report.checks.push_back(checkNeesConsistency(options.nees_runs, 1, options.fault));
  return report;
}

}  // namespace dockekf
