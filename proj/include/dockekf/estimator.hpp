#pragma once

// Error-state EKF for the pose of the active vehicle relative to the passive
// one. The nine error states are relative position and velocity (in E) and a
// body-frame attitude error delta with R_EQ = R_ref * exp(delta). delta is
// folded into R_ref and zeroed after every prediction and every update, so
// it is always zero between calls.

#include "dockekf/geometry.hpp"
#include "dockekf/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dockekf {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat69 = Eigen::Matrix<double, 6, 9>;
using Mat96 = Eigen::Matrix<double, 9, 6>;

/// Block offsets inside the error state.
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kAtt = 6;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kMaxInnovationCondition = 1e12;

/// chi-square(6) 0.999 quantile, used by the optional innovation gate.
inline constexpr double kChi2Gate6 = 22.457744484825323;

class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimatorState {
  Vec3 position = Vec3::Zero();        // t_QF in E
  Vec3 velocity = Vec3::Zero();        // v_QF in E
  Vec3 attitude_error = Vec3::Zero();  // delta, body frame
  Mat3 reference_attitude = Mat3::Identity();
  double t = 0.0;
};

using Covariance = Mat9;

struct Belief {
  EstimatorState state;
  Covariance covariance = Covariance::Zero();
};

struct PoseEstimate {
  Vec3 position;
  Vec3 velocity;
  Mat3 attitude;
};

inline Mat9 symmetrized(const Mat9& p) { return 0.5 * (p + p.transpose()); }

inline bool isSymmetric(const Mat9& p, double tol = kSymmetryTolerance) {
  return (p - p.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline double minEigenvalue(const Mat9& p) {
  const Eigen::SelfAdjointEigenSolver<Mat9> es(symmetrized(p), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline bool isCovarianceHealthy(const Mat9& p, double tol = kSymmetryTolerance) {
  return p.allFinite() && isSymmetric(p, tol) && minEigenvalue(p) >= -tol;
}

inline Belief initialize(const Vec3& p0, const Vec3& v0, const Mat3& r0, const Covariance& p_init,
                         double t0 = 0.0) {
  if (!p0.allFinite() || !v0.allFinite()) throw std::invalid_argument("initialize: non-finite state");
  if (!isRotation(r0)) throw std::invalid_argument("initialize: R0 is not a rotation");
  if (!p_init.allFinite() || !isSymmetric(p_init)) {
    throw std::invalid_argument("initialize: P0 must be symmetric");
  }
  if (minEigenvalue(p_init) < -kSymmetryTolerance) {
    throw std::invalid_argument("initialize: P0 must be positive semidefinite");
  }
  Belief b;
  b.state.position = p0;
  b.state.velocity = v0;
  b.state.reference_attitude = r0;
  b.state.t = t0;
  b.covariance = symmetrized(p_init);
  return b;
}

/// Block-isotropic covariance from standard deviations of position,
/// velocity and attitude error.
inline Covariance diagonalCovariance(const Vec3& stds) {
  Vec9 d;
  d << Vec3::Constant(stds(0) * stds(0)), Vec3::Constant(stds(1) * stds(1)), Vec3::Constant(stds(2) * stds(2));
  return d.asDiagonal();
}

inline PoseEstimate currentEstimate(const EstimatorState& s) {
  return {s.position, s.velocity, s.reference_attitude * expMap(s.attitude_error)};
}

/// Covariance realignment after folding `delta` into the reference attitude.
inline Mat9 resetJacobian(const Vec3& delta) {
  Mat9 t = Mat9::Identity();
  t.block<3, 3>(kAtt, kAtt) = expMap(Vec3(-0.5 * delta));
  return t;
}

/// d(x_pred)/d(x) of the prediction map before the attitude reset.
inline Mat9 processJacobian(const EstimatorState& s, const ImuSample& imu, double dt) {
  Mat9 a = Mat9::Identity();
  a.block<3, 3>(kPos, kVel) = Mat3::Identity() * dt;
  a.block<3, 3>(kVel, kAtt) = -s.reference_attitude * skew(imu.accel) * dt;
  a.block<3, 3>(kAtt, kAtt) = Mat3::Identity() - 0.5 * skew(imu.gyro) * dt;
  return a;
}

/// Discrete noise added per step for a sample held over `dt`.
inline Mat9 processNoiseCovariance(const ProcessNoise& noise, double dt) {
  Mat9 w = Mat9::Zero();
  const double va = noise.accel_std * noise.accel_std * dt * dt;
  const double vw = noise.gyro_std * noise.gyro_std * dt * dt;
  w.block<3, 3>(kVel, kVel) = Mat3::Identity() * va;
  w.block<3, 3>(kAtt, kAtt) = Mat3::Identity() * vw;
  return w;
}

/// Mean propagation without the reset: returns (p, v, delta) after `dt`.
inline Vec9 propagateErrorState(const EstimatorState& s, const ImuSample& imu, double dt,
                                const WorldParams& world) {
  Vec9 x;
  x.segment<3>(kPos) = s.position + s.velocity * dt;
  x.segment<3>(kVel) =
      s.velocity + (s.reference_attitude * expMap(s.attitude_error) * imu.accel + world.gravity) * dt;
  x.segment<3>(kAtt) = s.attitude_error + (imu.gyro - 0.5 * skew(imu.gyro) * s.attitude_error) * dt;
  return x;
}

inline Belief predict(const Belief& in, const ImuSample& imu, double dt, const ProcessNoise& noise,
                      const WorldParams& world) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("predict: dt must be positive");
  if (!imu.accel.allFinite() || !imu.gyro.allFinite()) {
    throw std::invalid_argument("predict: non-finite IMU sample");
  }
  if (!in.state.attitude_error.isZero(0.0)) {
    throw std::logic_error("predict: attitude error must be reset before prediction");
  }
  const Vec9 x = propagateErrorState(in.state, imu, dt, world);
  const Mat9 a = processJacobian(in.state, imu, dt);
  const Mat9 p_pred = symmetrized(a * in.covariance * a.transpose() + processNoiseCovariance(noise, dt));

  const Vec3 delta = x.segment<3>(kAtt);
  const Mat9 t = resetJacobian(delta);

  Belief out;
  out.state.position = x.segment<3>(kPos);
  out.state.velocity = x.segment<3>(kVel);
  out.state.reference_attitude = reorthonormalize(in.state.reference_attitude * expMap(delta));
  out.state.t = in.state.t + dt;
  out.covariance = symmetrized(t * p_pred * t.transpose());
  return out;
}

/// R_MC we expect to measure given the reference attitude.
inline Mat3 predictedRelativeOrientation(const EstimatorState& s, const Extrinsics& ex,
                                         const Mat3& passive_attitude) {
  return ex.marker_from_passive * passive_attitude.transpose() * s.reference_attitude *
         ex.camera_from_body.transpose();
}

/// Noise-free marker position in the camera frame for the current state.
inline Vec3 predictedMarkerPosition(const EstimatorState& s, const Extrinsics& ex,
                                    const Mat3& passive_attitude) {
  const Mat3 r = s.reference_attitude * expMap(s.attitude_error);
  return -ex.camera_from_body * r.transpose() *
             (s.position + passive_attitude * ex.passive_from_marker) +
         ex.body_from_camera;
}

inline LogResult attitudeInnovationVector(const RelativePoseMeasurement& meas, const Mat3& reference) {
  return logMap(reference.transpose() * meas.orientation);
}

inline Mat69 measurementJacobian(const EstimatorState& s, const Extrinsics& ex,
                                 const Mat3& passive_attitude) {
  const Mat3 rt = s.reference_attitude.transpose();
  const Vec3 lever = rt * (s.position + passive_attitude * ex.passive_from_marker);
  Mat69 h = Mat69::Zero();
  h.block<3, 3>(0, kPos) = -ex.camera_from_body * rt;
  h.block<3, 3>(0, kAtt) = -ex.camera_from_body * skew(lever);
  h.block<3, 3>(3, kAtt) = ex.camera_from_body;
  return h;
}

struct UpdateOptions {
  bool gating = false;
  double gate_threshold = kChi2Gate6;
};

enum class UpdateStatus { Applied, Gated };

struct UpdateResult {
  Belief belief;
  UpdateStatus status = UpdateStatus::Applied;
  double mahalanobis = 0.0;  // e^T S^-1 e
  Vec6 innovation = Vec6::Zero();
};

inline UpdateResult update(const Belief& in, const RelativePoseMeasurement& meas, const Extrinsics& ex,
                           const Mat3& passive_attitude, const MeasurementNoiseModel& noise,
                           const UpdateOptions& options = {}) {
  if (!in.state.attitude_error.isZero(0.0)) {
    throw std::logic_error("update: attitude error must be reset before an update");
  }
  if (meas.t < in.state.t) throw std::invalid_argument("update: measurement older than state");
  if (!meas.position.allFinite() || !isRotation(meas.orientation)) {
    throw std::invalid_argument("update: invalid measurement");
  }

  const EstimatorState& s = in.state;
  const Vec3 predicted = predictedMarkerPosition(s, ex, passive_attitude);
  const LogResult sigma = attitudeInnovationVector(meas, predictedRelativeOrientation(s, ex, passive_attitude));
  if (sigma.ambiguous) throw EstimatorError("update: attitude innovation is ambiguous (angle = pi)");

  Vec6 e;
  e << meas.position - predicted, sigma.vector;

  const auto r = noiseCovarianceAt(std::max(predicted.z(), noise.min_depth), noise);
  Mat6 rm = Mat6::Zero();
  rm.block<3, 3>(0, 0) = r.position;
  rm.block<3, 3>(3, 3) = r.attitude;

  const Mat69 h = measurementJacobian(s, ex, passive_attitude);
  const Mat96 pht = in.covariance * h.transpose();
  Mat6 sm = h * pht + rm;
  sm = 0.5 * (sm + sm.transpose());

  const Eigen::SelfAdjointEigenSolver<Mat6> es(sm, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(5);
  if (!(lo > 0.0) || hi / lo > kMaxInnovationCondition) {
    throw EstimatorError("update: innovation covariance is singular");
  }

  const Eigen::LDLT<Mat6> ldlt(sm);
  UpdateResult out;
  out.innovation = e;
  out.mahalanobis = e.dot(ldlt.solve(e));
  if (options.gating && out.mahalanobis > options.gate_threshold) {
    out.belief = in;
    out.status = UpdateStatus::Gated;
    return out;
  }

  const Mat96 k = ldlt.solve(pht.transpose()).transpose();
  const Vec9 dx = k * e;
  const Mat9 p_m = symmetrized((Mat9::Identity() - k * h) * in.covariance);

  const Vec3 delta = dx.segment<3>(kAtt);
  const Mat9 t = resetJacobian(delta);
  out.belief.state.position = s.position + dx.segment<3>(kPos);
  out.belief.state.velocity = s.velocity + dx.segment<3>(kVel);
  out.belief.state.reference_attitude = reorthonormalize(s.reference_attitude * expMap(delta));
  out.belief.state.t = s.t;
  out.belief.covariance = symmetrized(t * p_m * t.transpose());
  return out;
}

/// Normalized estimation error squared of `b` against a true relative state.
inline double nees(const Belief& b, const Vec3& true_position, const Vec3& true_velocity,
                   const Mat3& true_attitude) {
  Vec9 e;
  e.segment<3>(kPos) = true_position - b.state.position;
  e.segment<3>(kVel) = true_velocity - b.state.velocity;
  e.segment<3>(kAtt) = logMap(currentEstimate(b.state).attitude.transpose() * true_attitude).vector;
  return e.dot(b.covariance.ldlt().solve(e));
}

}  // namespace dockekf
