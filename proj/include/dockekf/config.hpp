#pragma once

// YAML scenario configuration. Every key is optional and falls back to the
// ScenarioConfig default; unknown keys and malformed values are errors that
// name the full key path (e.g. `camera.frame_rate`).
//
// Angles are given in degrees: `*_deg` scalars, and rotations as rotation
// vectors in degrees. Inertia accepts a 3-list (principal moments) or a 3x3
// nested list.

#include "dockekf/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dockekf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Walks a ScenarioConfig field by field; the same walk drives loading and
/// saving so the two cannot drift apart.
template <typename V>
void visitGains(V& v, ControlGains& g) {
  v.field("position_kp", g.position_kp);
  v.field("position_kd", g.position_kd);
  v.field("attitude_kp", g.attitude_kp);
  v.field("attitude_kd", g.attitude_kd);
  v.field("max_horizontal_accel", g.max_horizontal_accel);
}

template <typename V>
void visitVehicle(V& v, VehicleParams& p) {
  v.field("mass", p.mass);
  v.inertia("inertia", p.inertia);
  v.field("gravity", p.gravity);
  v.field("max_thrust", p.max_thrust);
  v.field("max_torque", p.max_torque);
}

template <typename V>
void visitScenario(V& v, ScenarioConfig& c) {
  v.field("seed", c.seed);
  v.field("duration", c.duration);
  v.section("rates", [&] {
    v.field("physics", c.physics_rate);
    v.field("imu", c.imu_rate);
    v.field("passive_attitude", c.passive_attitude_rate);
  });
  v.section("camera", [&] {
    v.angle("fov_half_angle_deg", c.camera.fov_half_angle);
    v.field("frame_rate", c.camera.frame_rate);
    v.field("dropout_probability", c.camera.dropout_probability);
  });
  v.section("vehicles", [&] {
    v.section("active", [&] { visitVehicle(v, c.active); });
    v.section("passive", [&] { visitVehicle(v, c.passive); });
  });
  v.section("control", [&] {
    v.section("active", [&] { visitGains(v, c.active_gains); });
    v.section("passive", [&] { visitGains(v, c.passive_gains); });
  });
  v.section("disturbance", [&] {
    v.field("enabled", c.disturbance.enabled);
    v.field("peak_force", c.disturbance.peak_force);
    v.field("radius", c.disturbance.radius);
    v.field("near_field_gap", c.disturbance.near_field_gap);
    v.field("vertical_decay", c.disturbance.vertical_decay);
    v.field("force_noise_std", c.disturbance.force_noise_std);
    v.field("torque_noise_std", c.disturbance.torque_noise_std);
  });
  v.section("extrinsics", [&] {
    v.rotation("camera_from_body_deg", c.extrinsics.camera_from_body);
    v.field("body_from_camera", c.extrinsics.body_from_camera);
    v.rotation("marker_from_passive_deg", c.extrinsics.marker_from_passive);
    v.field("passive_from_marker", c.extrinsics.passive_from_marker);
  });
  v.section("sensor_noise", [&] {
    v.field("accel_std", c.imu_noise.accel_std);
    v.field("gyro_std", c.imu_noise.gyro_std);
    v.field("position_std_at_reference", c.marker_noise.position_std_at_reference);
    v.field("reference_depth", c.marker_noise.reference_depth);
    v.field("attitude_std", c.marker_noise.attitude_std);
  });
  v.section("filter", [&] {
    v.field("accel_std", c.filter_process_noise.accel_std);
    v.field("gyro_std", c.filter_process_noise.gyro_std);
    v.field("position_std_at_reference", c.filter_measurement_noise.position_std_at_reference);
    v.field("reference_depth", c.filter_measurement_noise.reference_depth);
    v.field("attitude_std", c.filter_measurement_noise.attitude_std);
    v.field("min_depth", c.filter_measurement_noise.min_depth);
    v.field("gating", c.filter_update.gating);
    v.field("gate_threshold", c.filter_update.gate_threshold);
    v.field("initial_std", c.initial_std);
  });
  v.section("docking", [&] {
    v.field("vertical_gap_max", c.thresholds.vertical_gap_max);
    v.field("horizontal_offset_max", c.thresholds.horizontal_offset_max);
    v.field("contact_separation", c.thresholds.contact_separation);
    v.field("criterion_dwell", c.criterion_dwell);
    v.field("capture_tolerance", c.capture_tolerance);
    v.field("capture_timeout", c.capture_timeout);
  });
  v.section("mission", [&] {
    v.field("passive_hover_position", c.passive_hover_position);
    v.field("active_start_offset", c.active_start_offset);
    v.field("rendezvous_offset", c.rendezvous_offset);
    v.field("approach_speed", c.approach_speed);
    v.field("settle_time", c.settle_time);
    v.field("ascent_speed", c.ascent_speed);
    v.field("target_gap", c.target_gap);
    v.field("marker_timeout", c.marker_timeout);
    v.field("offboard_error_std", c.offboard_error_std);
  });
  v.section("undock", [&] {
    v.field("enabled", c.undock);
    v.field("docked_dwell", c.docked_dwell);
    v.field("undock_duration", c.undock_duration);
  });
}

class YamlReader {
 public:
  explicit YamlReader(const YAML::Node& root) { push(root, ""); }

  void finish() { pop(); }

  template <typename T>
  void field(const char* key, T& out) {
    if (const auto n = child(key)) out = scalar<T>(n, key);
  }

  void field(const char* key, Vec3& out) {
    if (const auto n = child(key)) out = vec3(n, key);
  }

  void angle(const char* key, double& radians) {
    if (const auto n = child(key)) radians = scalar<double>(n, key) * kDeg;
  }

  void rotation(const char* key, Mat3& out) {
    if (const auto n = child(key)) out = expMap(Vec3(vec3(n, key) * kDeg));
  }

  void inertia(const char* key, Mat3& out) {
    const auto n = child(key);
    if (!n) return;
    if (n.IsSequence() && n.size() == 3 && n[0].IsScalar()) {
      out = vec3(n, key).asDiagonal();
      return;
    }
    if (!n.IsSequence() || n.size() != 3) fail(key, "expected 3 principal moments or a 3x3 nested list");
    for (int r = 0; r < 3; ++r) {
      if (!n[r].IsSequence() || n[r].size() != 3) fail(key, "expected 3 principal moments or a 3x3 nested list");
      for (int col = 0; col < 3; ++col) out(r, col) = scalar<double>(n[r][col], key);
    }
  }

  void section(const char* key, const std::function<void()>& body) {
    const auto n = child(key);
    if (!n) return;
    push(n, path(key));
    body();
    pop();
  }

 private:
  struct Frame {
    YAML::Node node;
    std::string path;
    std::set<std::string> seen;
  };

  std::string path(const char* key) const {
    return frames_.back().path.empty() ? std::string(key) : frames_.back().path + "." + key;
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("config: " + path(key) + ": " + what);
  }

  void push(const YAML::Node& n, std::string p) {
    if (!n.IsMap() && !n.IsNull()) {
      throw ConfigError("config: " + (p.empty() ? std::string("<root>") : p) + ": expected a mapping");
    }
    frames_.push_back({n, std::move(p), {}});
  }

  void pop() {
    const Frame& f = frames_.back();
    if (f.node.IsMap()) {
      for (const auto& kv : f.node) {
        const auto name = kv.first.as<std::string>();
        if (!f.seen.count(name)) {
          throw ConfigError("config: " + (f.path.empty() ? name : f.path + "." + name) + ": unknown key");
        }
      }
    }
    frames_.pop_back();
  }

  YAML::Node child(const char* key) {
    Frame& f = frames_.back();
    f.seen.insert(key);
    if (!f.node.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node n = f.node[key];
    return n.IsDefined() ? n : YAML::Node(YAML::NodeType::Undefined);
  }

  template <typename T>
  T scalar(const YAML::Node& n, const char* key) const {
    if (!n.IsScalar()) fail(key, "expected a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      if constexpr (std::is_same_v<T, bool>) {
        fail(key, "expected true or false");
      } else {
        fail(key, "expected a number, got '" + n.Scalar() + "'");
      }
    }
  }

  Vec3 vec3(const YAML::Node& n, const char* key) const {
    if (!n.IsSequence() || n.size() != 3) fail(key, "expected a list of 3 numbers");
    return {scalar<double>(n[0], key), scalar<double>(n[1], key), scalar<double>(n[2], key)};
  }

  std::vector<Frame> frames_;
};

class YamlWriter {
 public:
  YamlWriter() {
    out_.SetDoublePrecision(17);
    out_ << YAML::BeginMap;
  }

  std::string finish() {
    out_ << YAML::EndMap;
    return std::string(out_.c_str()) + "\n";
  }

  template <typename T>
  void field(const char* key, const T& value) {
    out_ << YAML::Key << key << YAML::Value << value;
  }

  void field(const char* key, const Vec3& v) { list(key, v); }

  void angle(const char* key, const double& radians) { field(key, radians / kDeg); }

  void rotation(const char* key, const Mat3& r) { list(key, Vec3(logMap(r).vector / kDeg)); }

  void inertia(const char* key, const Mat3& j) {
    if (Mat3(j.diagonal().asDiagonal()) == j) {
      list(key, Vec3(j.diagonal()));
      return;
    }
    out_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (int r = 0; r < 3; ++r) {
      out_ << YAML::Flow << YAML::BeginSeq << j(r, 0) << j(r, 1) << j(r, 2) << YAML::EndSeq;
    }
    out_ << YAML::EndSeq;
  }

  void section(const char* key, const std::function<void()>& body) {
    out_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    body();
    out_ << YAML::EndMap;
  }

 private:
  void list(const char* key, const Vec3& v) {
    out_ << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z()
         << YAML::EndSeq;
  }

  YAML::Emitter out_;
};

}  // namespace detail

/// Applies the keys of `yaml` on top of `base` and validates the result.
inline ScenarioConfig parseScenarioConfig(const std::string& yaml, ScenarioConfig base = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: YAML syntax error: ") + e.what());
  }
  detail::YamlReader reader(root);
  detail::visitScenario(reader, base);
  reader.finish();
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return base;
}

inline ScenarioConfig loadScenarioConfig(const std::filesystem::path& path, ScenarioConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parseScenarioConfig(ss.str(), std::move(base));
}

/// Full configuration as YAML; parsing it back reproduces `cfg`.
inline std::string scenarioConfigToYaml(ScenarioConfig cfg) {
  detail::YamlWriter writer;
  detail::visitScenario(writer, cfg);
  return writer.finish();
}

}  // namespace dockekf
