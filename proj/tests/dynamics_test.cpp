#include "dockekf/dynamics.hpp"

#include <gtest/gtest.h>

namespace dockekf {
namespace {

TEST(StepDynamics, ZeroWrenchIsFreeFall) {
  const VehicleParams p = activeVehicleDefaults();
  VehicleTruth s;
  s.velocity = Vec3(0.2, 0, 0);
  const VehicleTruth out = stepDynamics(s, p, WrenchInput{}, 0.001);
  EXPECT_LT((out.velocity - (s.velocity + p.gravity * 0.001)).norm(), 1e-15);
  EXPECT_EQ(out.attitude, Mat3::Identity());
  EXPECT_EQ(out.acceleration, p.gravity);
  EXPECT_DOUBLE_EQ(out.t, 0.001);
}

TEST(StepDynamics, HoverWrenchIsStationary) {
  const VehicleParams p = activeVehicleDefaults();
  WrenchInput w;
  w.propeller_force = -p.mass * p.gravity;
  VehicleTruth s;
  s.position = Vec3(1, 2, 3);
  for (int i = 0; i < 1000; ++i) s = stepDynamics(s, p, w, 0.001);
  EXPECT_LT((s.position - Vec3(1, 2, 3)).norm(), 1e-12);
  EXPECT_LT(s.velocity.norm(), 1e-12);
  EXPECT_EQ(s.attitude, Mat3::Identity());
}

TEST(StepDynamics, PrincipalAxisSpinConservesRate) {
  const VehicleParams p = activeVehicleDefaults();
  VehicleTruth s;
  s.angular_rate = Vec3(0, 0, 3.0);
  for (int i = 0; i < 10000; ++i) s = stepDynamics(s, p, WrenchInput{}, 0.001);
  EXPECT_NEAR(s.angular_rate.norm(), 3.0, 1e-9);
  EXPECT_TRUE(isRotation(s.attitude));
}

TEST(StepDynamics, TorqueFreeTumbleConservesEnergyAndMomentum) {
  VehicleParams p = activeVehicleDefaults();
  p.inertia = Vec3(0.004, 0.006, 0.011).asDiagonal();
  VehicleTruth s;
  s.angular_rate = Vec3(1.0, 0.5, 2.0);
  const auto energy = [&](const VehicleTruth& v) { return 0.5 * v.angular_rate.dot(p.inertia * v.angular_rate); };
  const auto momentum = [&](const VehicleTruth& v) { return Vec3(v.attitude * p.inertia * v.angular_rate); };
  const double e0 = energy(s);
  const Vec3 l0 = momentum(s);
  for (int i = 0; i < 5000; ++i) s = stepDynamics(s, p, WrenchInput{}, 0.001);
  EXPECT_NEAR(energy(s), e0, 1e-9 * e0);
  // Attitude uses a first-order exponential step, so momentum drifts slowly.
  EXPECT_LT((momentum(s) - l0).norm(), 1e-3 * l0.norm());
}

TEST(StepDynamics, RejectsNonPositiveStep) {
  EXPECT_THROW(stepDynamics(VehicleTruth{}, activeVehicleDefaults(), WrenchInput{}, 0.0), std::invalid_argument);
}

TEST(Controller, EquilibriumGivesHoverWrench) {
  const VehicleParams p = activeVehicleDefaults();
  const WrenchInput w = computeControl(ControlState{}, Setpoint{}, p, ControlGains{});
  EXPECT_LT((w.propeller_force + p.mass * p.gravity).norm(), 1e-9);
  EXPECT_LT(w.propeller_torque.norm(), 1e-12);
}

TEST(Controller, BelowSetpointThrustsUp) {
  const VehicleParams p = activeVehicleDefaults();
  ControlState est;
  est.position = Vec3(0, 0, -0.1);
  const WrenchInput w = computeControl(est, Setpoint{}, p, ControlGains{});
  EXPECT_GT(w.propeller_force.z(), -p.mass * p.gravity.z());
}

TEST(Controller, SaturatesAtActuatorLimits) {
  const VehicleParams p = activeVehicleDefaults();
  ControlState est;
  est.position = Vec3(0, 0, -100);
  est.attitude = expMap(Vec3(0.5, 0, 0));
  const WrenchInput w = computeControl(est, Setpoint{}, p, ControlGains{});
  EXPECT_LE(w.propeller_force.norm(), p.max_thrust + 1e-12);
  EXPECT_TRUE((w.propeller_torque.cwiseAbs().array() <= p.max_torque.array() + 1e-12).all());
}

TEST(Controller, ClosedLoopSettlesFromOffset) {
  for (const VehicleParams& p : {activeVehicleDefaults(), passiveVehicleDefaults()}) {
    VehicleTruth s;
    s.position = Vec3(0.2, 0, 0);
    double settled_at = -1.0;
    for (int i = 0; i < 10000; ++i) {
      const ControlState est{s.position, s.velocity, s.attitude, s.angular_rate};
      s = stepDynamics(s, p, computeControl(est, Setpoint{}, p, ControlGains{}), 0.001);
      const bool inside = s.position.norm() <= 0.02 * 0.2;
      if (inside && settled_at < 0.0) settled_at = s.t;
      if (!inside) settled_at = -1.0;
    }
    EXPECT_GE(settled_at, 0.0);
    EXPECT_LT(settled_at, 5.0);
  }
}

TEST(Disturbance, DisabledIsZero) {
  RngStream rng(51);
  DisturbanceConfig cfg;
  cfg.enabled = false;
  const Disturbance d = injectDisturbance(Vec3(0, 0, -0.3), cfg, rng);
  EXPECT_EQ(d.force, Vec3::Zero());
  EXPECT_EQ(d.torque, Vec3::Zero());
}

TEST(Disturbance, PeakDirectlyBelowAndDecaysLaterally) {
  RngStream rng(52);
  DisturbanceConfig cfg;
  cfg.force_noise_std = 0.0;
  const Disturbance below = injectDisturbance(Vec3(0, 0, -0.3), cfg, rng);
  EXPECT_NEAR(below.force.z(), -cfg.peak_force, 1e-15);
  EXPECT_EQ(below.force.head<2>(), Eigen::Vector2d::Zero());

  const Disturbance far = injectDisturbance(Vec3(10 * cfg.radius, 0, -0.3), cfg, rng);
  EXPECT_LT(far.force.norm(), 0.01 * cfg.peak_force);

  const Disturbance deeper = injectDisturbance(Vec3(0, 0, -0.3 - cfg.vertical_decay), cfg, rng);
  EXPECT_NEAR(deeper.force.z(), -cfg.peak_force * std::exp(-1.0), 1e-15);

  const Disturbance above = injectDisturbance(Vec3(0, 0, 0.2), cfg, rng);
  EXPECT_EQ(above.force, Vec3::Zero());
}

TEST(VehicleParams, Validation) {
  VehicleParams p = activeVehicleDefaults();
  EXPECT_NO_THROW(p.validate());
  p.mass = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = activeVehicleDefaults();
  p.inertia(0, 1) = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ThinDiskInertia, DefaultVehicles) {
  EXPECT_NEAR(activeVehicleDefaults().inertia(2, 2), 0.0112303125, 1e-15);
  EXPECT_NEAR(passiveVehicleDefaults().inertia(0, 0), 0.00013456, 1e-15);
}

}  // namespace
}  // namespace dockekf
