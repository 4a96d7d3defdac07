#pragma once

// Sensor inputs, rig extrinsics and noise parameters shared by the estimator
// and the measurement synthesizers.
//
// Frames: E inertial (z up), Q active body, C camera on Q, F passive body,
// M marker on F. R_AB maps vectors from B into A; t_AB is the displacement
// from the origin of B to the origin of A.

#include "dockekf/geometry.hpp"

#include <stdexcept>
#include <utility>

namespace dockekf {

inline constexpr double kStandardGravity = 9.80665;

struct ImuSample {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();  // proper acceleration in Q, m/s^2
  Vec3 gyro = Vec3::Zero();   // body rate in Q, rad/s
};

/// Marker pose as seen by the camera: position of M in C and R_MC.
struct RelativePoseMeasurement {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
};

/// Fixed rig geometry, known from the vehicle design.
struct Extrinsics {
  Mat3 camera_from_body = Mat3::Identity();     // R_CQ
  Mat3 marker_from_passive = Mat3::Identity();  // R_MF
  Vec3 body_from_camera = Vec3::Zero();         // t_QC expressed in C
  Vec3 passive_from_marker = Vec3::Zero();      // t_FM expressed in F

  void validate() const {
    if (!isRotation(camera_from_body) || !isRotation(marker_from_passive)) {
      throw std::invalid_argument("extrinsics: rotations must be orthonormal");
    }
    if (!body_from_camera.allFinite() || !passive_from_marker.allFinite()) {
      throw std::invalid_argument("extrinsics: non-finite offset");
    }
  }
};

/// Isotropic white noise on each accelerometer / gyro sample.
struct ProcessNoise {
  double accel_std = 0.5;  // m/s^2
  double gyro_std = 0.1;   // rad/s

  void validate() const {
    if (!(accel_std > 0.0) || !(gyro_std > 0.0)) {
      throw std::invalid_argument("process noise: standard deviations must be positive");
    }
  }
};

/// Camera-marker pose noise. Position variance grows with the square of the
/// depth along the optical axis; attitude variance is constant.
struct MeasurementNoiseModel {
  Vec3 position_std_at_reference{0.2, 0.2, 0.3};  // m, at reference_depth
  double reference_depth = 1.0;                   // m
  Vec3 attitude_std{0.35, 0.35, 0.05};            // rad
  double min_depth = 0.05;                        // m, clamp used by the filter

  void validate() const {
    if ((position_std_at_reference.array() < 0.0).any() || (attitude_std.array() < 0.0).any()) {
      throw std::invalid_argument("measurement noise: negative standard deviation");
    }
    if (!(reference_depth > 0.0) || !(min_depth > 0.0)) {
      throw std::invalid_argument("measurement noise: depths must be positive");
    }
  }
};

struct MeasurementCovariance {
  Mat3 position;
  Mat3 attitude;
};

inline MeasurementCovariance noiseCovarianceAt(double depth, const MeasurementNoiseModel& model) {
  if (!(depth > 0.0)) throw std::invalid_argument("noiseCovarianceAt: depth must be positive");
  const double scale = depth / model.reference_depth;
  MeasurementCovariance out;
  out.position = (model.position_std_at_reference.array().square() * scale * scale).matrix().asDiagonal();
  out.attitude = model.attitude_std.array().square().matrix().asDiagonal();
  return out;
}

struct WorldParams {
  Vec3 gravity{0.0, 0.0, -kStandardGravity};
};

}  // namespace dockekf
