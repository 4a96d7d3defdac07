#include "dockekf/sensors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace dockekf {
namespace {

const Vec3 kGravity(0, 0, -kStandardGravity);

Vec3 sampleStd(const std::vector<Vec3>& xs) {
  Vec3 mean = Vec3::Zero();
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Vec3 var = Vec3::Zero();
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  return (var / static_cast<double>(xs.size() - 1)).cwiseSqrt();
}

TEST(Imu, ProperAccelerationAtRestAndInFreeFall) {
  BodyTruth hover;
  const ImuSample at_rest = idealImu(hover, kGravity);
  EXPECT_EQ(at_rest.accel, Vec3(0, 0, kStandardGravity));
  EXPECT_EQ(at_rest.gyro, Vec3::Zero());

  BodyTruth falling;
  falling.acceleration = kGravity;
  falling.attitude = expMap(Vec3(0.3, -0.2, 1.0));
  EXPECT_LT(idealImu(falling, kGravity).accel.norm(), 1e-15);
}

TEST(Imu, AccelerometerIsExpressedInBodyFrame) {
  BodyTruth b;
  b.attitude = expMap(Vec3(std::numbers::pi / 2, 0, 0));  // roll 90 deg
  const ImuSample s = idealImu(b, kGravity);
  EXPECT_LT((s.accel - Vec3(0, kStandardGravity, 0)).norm(), 1e-12);
}

TEST(Imu, NoiseStandardDeviationMatchesConfiguration) {
  RngStream rng(41);
  const ProcessNoise noise;
  std::vector<Vec3> accel;
  std::vector<Vec3> gyro;
  for (int i = 0; i < 100000; ++i) {
    const ImuSample s = synthesizeImu(BodyTruth{}, noise, kGravity, rng);
    accel.push_back(s.accel);
    gyro.push_back(s.gyro);
  }
  const Vec3 sa = sampleStd(accel);
  const Vec3 sg = sampleStd(gyro);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(sa(k), noise.accel_std, 0.03 * noise.accel_std);
    EXPECT_NEAR(sg(k), noise.gyro_std, 0.03 * noise.gyro_std);
  }
}

TEST(Marker, IdentityRigGivesNegatedRelativePosition) {
  BodyTruth active;
  active.position = Vec3(0, 0, 0.6);
  const BodyTruth passive;
  const auto m = markerPoseInCamera(active, passive, Extrinsics{});
  EXPECT_LT((m.position - Vec3(0, 0, -0.6)).norm(), 1e-15);
  EXPECT_EQ(m.orientation, Mat3::Identity());
}

TEST(Marker, FieldOfViewCone) {
  const CameraModel camera;  // 30 deg half angle
  EXPECT_TRUE(markerInView(Vec3(0, 0, 1), camera));
  EXPECT_FALSE(markerInView(Vec3(1, 0, 1), camera));  // 45 deg off axis
  EXPECT_TRUE(markerInView(Vec3(std::tan(0.5), 0, 1), camera));
  EXPECT_FALSE(markerInView(Vec3(0, 0, -1), camera));
  EXPECT_FALSE(markerInView(Vec3::Zero(), camera));
}

TEST(Marker, OutOfViewProducesNoMeasurement) {
  RngStream rng(42);
  BodyTruth active;
  active.position = Vec3(-1, 0, -1);  // marker 45 deg off the upward optical axis
  const BodyTruth passive;
  const auto m = synthesizeMarkerMeasurement(active, passive, Extrinsics{}, CameraModel{}, MeasurementNoiseModel{}, rng);
  EXPECT_FALSE(m.has_value());
}

TEST(Marker, DropoutOneNeverDetects) {
  RngStream rng(43);
  BodyTruth active;
  active.position = Vec3(0, 0, -1);
  CameraModel camera;
  camera.dropout_probability = 1.0;
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(
        synthesizeMarkerMeasurement(active, BodyTruth{}, Extrinsics{}, camera, MeasurementNoiseModel{}, rng));
  }
}

TEST(Marker, PositionNoiseAtReferenceDepth) {
  RngStream rng(44);
  BodyTruth active;
  active.position = Vec3(0, 0, -1);  // marker 1 m along the optical axis
  CameraModel camera;
  camera.dropout_probability = 0.0;
  camera.fov_half_angle = 1.5;  // keep noisy draws from leaving the cone irrelevant
  const MeasurementNoiseModel noise;
  std::vector<Vec3> pos;
  std::vector<Vec3> att;
  for (int i = 0; i < 10000; ++i) {
    const auto m = synthesizeMarkerMeasurement(active, BodyTruth{}, Extrinsics{}, camera, noise, rng);
    ASSERT_TRUE(m.has_value());
    pos.push_back(m->position);
    att.push_back(logMap(m->orientation).vector);
  }
  const Vec3 sp = sampleStd(pos);
  const Vec3 sr = sampleStd(att);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(sp(k), noise.position_std_at_reference(k), 0.05 * noise.position_std_at_reference(k));
    EXPECT_NEAR(sr(k), noise.attitude_std(k), 0.05 * noise.attitude_std(k));
  }
}

TEST(NoiseCovariance, ScalesQuadraticallyWithDepth) {
  const MeasurementNoiseModel model;
  const auto at1 = noiseCovarianceAt(1.0, model);
  EXPECT_LT((at1.position.diagonal() - Vec3(0.04, 0.04, 0.09)).norm(), 1e-15);
  const auto at05 = noiseCovarianceAt(0.5, model);
  EXPECT_LT((at05.position.diagonal() - Vec3(0.01, 0.01, 0.0225)).norm(), 1e-15);
  EXPECT_LT((at05.attitude.diagonal() - Vec3(0.1225, 0.1225, 0.0025)).norm(), 1e-15);
  EXPECT_EQ(at1.attitude, at05.attitude);
  EXPECT_THROW(noiseCovarianceAt(0.0, model), std::invalid_argument);
}

TEST(RngStream, ReproducibleAndIndependentStreams) {
  RngStream a(7, 1);
  RngStream b(7, 1);
  RngStream c(7, 2);
  RngStream d(8, 1);
  for (int i = 0; i < 100; ++i) {
    const double x = a.gaussian();
    EXPECT_EQ(x, b.gaussian());
    EXPECT_NE(x, c.gaussian());
    EXPECT_NE(x, d.gaussian());
  }
  EXPECT_EQ(a.counter(), 100u);
}

TEST(CameraModel, Validation) {
  CameraModel c;
  c.dropout_probability = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = CameraModel{};
  c.fov_half_angle = 2.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = CameraModel{};
  c.frame_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace dockekf
