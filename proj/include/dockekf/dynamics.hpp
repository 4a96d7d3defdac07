#pragma once

// Ground-truth multirotor model (Newton-Euler with a rotation-matrix
// attitude), a cascaded PD setpoint controller and a synthetic downwash
// disturbance acting on the lower vehicle.

#include "dockekf/geometry.hpp"
#include "dockekf/sensors.hpp"
#include "dockekf/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dockekf {

using VehicleTruth = BodyTruth;

struct VehicleParams {
  double mass = 1.0;                  // kg
  Mat3 inertia = Mat3::Identity();    // kg m^2, body frame
  Vec3 gravity{0.0, 0.0, -kStandardGravity};
  double max_thrust = 20.0;           // N
  Vec3 max_torque{1.0, 1.0, 0.2};     // N m, per body axis

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("vehicle: mass must be positive");
    if ((inertia - inertia.transpose()).norm() > 1e-12 || inertia.llt().info() != Eigen::Success) {
      throw std::invalid_argument("vehicle: inertia must be symmetric positive definite");
    }
    if (!(max_thrust > 0.0) || (max_torque.array() <= 0.0).any()) {
      throw std::invalid_argument("vehicle: actuator limits must be positive");
    }
  }
};

/// Thin uniform disk whose radius is the arm length. Only an approximation;
/// real inertia values for the vehicles are not available.
inline Mat3 thinDiskInertia(double mass, double radius) {
  const double planar = 0.25 * mass * radius * radius;
  return Vec3(planar, planar, 2.0 * planar).asDiagonal();
}

/// 825 g vehicle with 165 mm arms carrying the camera.
inline VehicleParams activeVehicleDefaults() {
  VehicleParams p;
  p.mass = 0.825;
  p.inertia = thinDiskInertia(p.mass, 0.165);
  p.max_thrust = 2.5 * p.mass * kStandardGravity;
  p.max_torque = Vec3(0.5, 0.5, 0.1);
  return p;
}

/// 160 g vehicle with 58 mm arms carrying the marker.
inline VehicleParams passiveVehicleDefaults() {
  VehicleParams p;
  p.mass = 0.160;
  p.inertia = thinDiskInertia(p.mass, 0.058);
  p.max_thrust = 2.5 * p.mass * kStandardGravity;
  p.max_torque = Vec3(0.05, 0.05, 0.01);
  return p;
}

/// Forces in E, torques in the body frame.
struct WrenchInput {
  Vec3 propeller_force = Vec3::Zero();
  Vec3 propeller_torque = Vec3::Zero();
  Vec3 disturbance_force = Vec3::Zero();
  Vec3 disturbance_torque = Vec3::Zero();
};

inline Vec3 linearAcceleration(const VehicleParams& params, const WrenchInput& w) {
  return (w.propeller_force + w.disturbance_force) / params.mass + params.gravity;
}

inline Vec3 angularAcceleration(const VehicleParams& params, const Vec3& torque, const Vec3& omega) {
  return params.inertia.ldlt().solve(torque - omega.cross(params.inertia * omega));
}

inline VehicleTruth stepDynamics(const VehicleTruth& in, const VehicleParams& params, const WrenchInput& w,
                                 double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("stepDynamics: dt must be positive");
  VehicleTruth out = in;
  const Vec3 a = linearAcceleration(params, w);
  const Vec3 torque = w.propeller_torque + w.disturbance_torque;

  // Euler's rotation equations with RK4; translation with semi-implicit Euler.
  const Vec3& om = in.angular_rate;
  const Vec3 k1 = angularAcceleration(params, torque, om);
  const Vec3 k2 = angularAcceleration(params, torque, om + 0.5 * dt * k1);
  const Vec3 k3 = angularAcceleration(params, torque, om + 0.5 * dt * k2);
  const Vec3 k4 = angularAcceleration(params, torque, om + dt * k3);
  out.angular_rate = om + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  out.acceleration = a;
  out.velocity = in.velocity + a * dt;
  out.position = in.position + out.velocity * dt;
  out.attitude = reorthonormalize(in.attitude * expMap(Vec3(out.angular_rate * dt)));
  out.t = in.t + dt;
  return out;
}

struct Setpoint {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // feedforward
  double yaw = 0.0;
};

struct ControlGains {
  Vec3 position_kp{9.0, 9.0, 9.0};    // 1/s^2
  Vec3 position_kd{5.4, 5.4, 5.4};    // 1/s
  double attitude_kp = 400.0;         // 1/s^2
  double attitude_kd = 40.0;          // 1/s
  double max_horizontal_accel = 4.0;  // m/s^2
};

/// What the controller gets to see of its own vehicle.
struct ControlState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Identity();
  Vec3 angular_rate = Vec3::Zero();
};

inline WrenchInput computeControl(const ControlState& est, const Setpoint& sp, const VehicleParams& params,
                                  const ControlGains& gains) {
  Vec3 acc = -gains.position_kp.cwiseProduct(est.position - sp.position) -
             gains.position_kd.cwiseProduct(est.velocity - sp.velocity);
  const double horizontal = acc.head<2>().norm();
  if (horizontal > gains.max_horizontal_accel) acc.head<2>() *= gains.max_horizontal_accel / horizontal;

  const Vec3 force = params.mass * (acc - params.gravity);
  const Vec3 body_z = est.attitude.col(2);
  const double thrust = std::clamp(force.dot(body_z), 0.0, params.max_thrust);

  Vec3 z_des = force.norm() > 1e-9 ? Vec3(force.normalized()) : Vec3::UnitZ();
  if (z_des.z() <= 0.0) z_des = Vec3::UnitZ();
  const Vec3 heading(std::cos(sp.yaw), std::sin(sp.yaw), 0.0);
  const Vec3 y_des = z_des.cross(heading).normalized();
  const Vec3 x_des = y_des.cross(z_des);
  Mat3 r_des;
  r_des << x_des, y_des, z_des;

  const Mat3& r = est.attitude;
  const Vec3 e_r = vee(Mat3(r_des.transpose() * r - r.transpose() * r_des));
  const Vec3& om = est.angular_rate;
  Vec3 torque = params.inertia * (-gains.attitude_kp * e_r - gains.attitude_kd * om) +
                om.cross(params.inertia * om);
  torque = torque.cwiseMax(-params.max_torque).cwiseMin(params.max_torque);

  WrenchInput w;
  w.propeller_force = thrust * body_z;
  w.propeller_torque = torque;
  return w;
}

/// Axisymmetric downwash pushing the lower vehicle down. Full strength when
/// directly below within `near_field_gap`, Gaussian falloff with lateral
/// offset, exponential falloff with extra vertical gap.
struct DisturbanceConfig {
  bool enabled = true;
  double peak_force = 0.4;        // N
  double radius = 0.12;           // m, lateral std of the bump
  double near_field_gap = 0.3;    // m
  double vertical_decay = 0.4;    // m
  double force_noise_std = 0.02;  // N
  double torque_noise_std = 0.0;  // N m
};

struct Disturbance {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

/// `relative_position` is the active vehicle's position relative to the
/// passive one, in E.
inline Disturbance injectDisturbance(const Vec3& relative_position, const DisturbanceConfig& cfg,
                                     RngStream& rng) {
  Disturbance d;
  if (!cfg.enabled) return d;
  const double gap = -relative_position.z();
  if (gap > 0.0) {
    const double r2 = relative_position.head<2>().squaredNorm();
    const double lateral = std::exp(-0.5 * r2 / (cfg.radius * cfg.radius));
    const double vertical =
        gap <= cfg.near_field_gap ? 1.0 : std::exp(-(gap - cfg.near_field_gap) / cfg.vertical_decay);
    d.force.z() = -cfg.peak_force * lateral * vertical;
  }
  if (cfg.force_noise_std > 0.0) d.force += cfg.force_noise_std * rng.gaussian3();
  if (cfg.torque_noise_std > 0.0) d.torque += cfg.torque_noise_std * rng.gaussian3();
  return d;
}

}  // namespace dockekf
