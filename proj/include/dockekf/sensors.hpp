#pragma once

// Synthetic IMU and camera-marker measurements generated from ground truth.

#include "dockekf/geometry.hpp"
#include "dockekf/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

namespace dockekf {

/// Seeded random source. Two streams built from the same (seed, stream id)
/// produce the same draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  double gaussian() {
    ++counter_;
    return normal_(engine_);
  }

  Vec3 gaussian3() {
    const double x = gaussian();
    const double y = gaussian();
    const double z = gaussian();
    return {x, y, z};
  }

  double uniform() {
    ++counter_;
    return uniform_(engine_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

struct CameraModel {
  double fov_half_angle = std::numbers::pi / 6.0;  // 60 deg full cone
  double frame_rate = 30.0;                        // Hz
  double dropout_probability = 0.05;

  void validate() const {
    if (!(fov_half_angle > 0.0 && fov_half_angle < std::numbers::pi / 2.0)) {
      throw std::invalid_argument("camera: fov half angle must be in (0, pi/2)");
    }
    if (!(frame_rate > 0.0)) throw std::invalid_argument("camera: frame rate must be positive");
    if (!(dropout_probability >= 0.0 && dropout_probability <= 1.0)) {
      throw std::invalid_argument("camera: dropout probability must be in [0, 1]");
    }
  }
};

/// Minimal rigid-body truth needed by the sensor models.
struct BodyTruth {
  Vec3 position = Vec3::Zero();      // in E
  Vec3 velocity = Vec3::Zero();      // in E
  Vec3 acceleration = Vec3::Zero();  // in E
  Mat3 attitude = Mat3::Identity();  // R_E<body>
  Vec3 angular_rate = Vec3::Zero();  // body frame
  double t = 0.0;
};

/// Noise-free IMU output for a body moving as `truth`.
inline ImuSample idealImu(const BodyTruth& truth, const Vec3& gravity) {
  return {truth.t, truth.attitude.transpose() * (truth.acceleration - gravity), truth.angular_rate};
}

inline ImuSample synthesizeImu(const BodyTruth& truth, const ProcessNoise& noise, const Vec3& gravity,
                               RngStream& rng) {
  ImuSample s = idealImu(truth, gravity);
  s.accel += noise.accel_std * rng.gaussian3();
  s.gyro += noise.gyro_std * rng.gaussian3();
  return s;
}

/// Exact marker pose in the camera frame from the two vehicles' true poses.
inline RelativePoseMeasurement markerPoseInCamera(const BodyTruth& active, const BodyTruth& passive,
                                                  const Extrinsics& ex) {
  const Vec3 rel = active.position - passive.position;
  RelativePoseMeasurement m;
  m.t = active.t;
  m.position = -ex.camera_from_body * active.attitude.transpose() *
                   (rel + passive.attitude * ex.passive_from_marker) +
               ex.body_from_camera;
  m.orientation = ex.marker_from_passive * passive.attitude.transpose() * active.attitude *
                  ex.camera_from_body.transpose();
  return m;
}

/// Marker center inside the viewing cone and in front of the camera.
inline bool markerInView(const Vec3& marker_in_camera, const CameraModel& camera) {
  if (marker_in_camera.z() <= 0.0) return false;
  const double bearing = std::atan2(marker_in_camera.head<2>().norm(), marker_in_camera.z());
  return bearing <= camera.fov_half_angle;
}

/// Noisy marker measurement, or nullopt when the marker is out of view or the
/// frame is dropped.
inline std::optional<RelativePoseMeasurement> synthesizeMarkerMeasurement(
    const BodyTruth& active, const BodyTruth& passive, const Extrinsics& ex, const CameraModel& camera,
    const MeasurementNoiseModel& noise, RngStream& rng) {
  RelativePoseMeasurement m = markerPoseInCamera(active, passive, ex);
  if (!markerInView(m.position, camera)) return std::nullopt;
  if (rng.uniform() < camera.dropout_probability) return std::nullopt;

  const double scale = m.position.z() / noise.reference_depth;
  const Vec3 pos_noise = (noise.position_std_at_reference * scale).cwiseProduct(rng.gaussian3());
  const Vec3 att_noise = noise.attitude_std.cwiseProduct(rng.gaussian3());
  m.position += pos_noise;
  m.orientation = m.orientation * expMap(att_noise);
  return m;
}

}  // namespace dockekf
