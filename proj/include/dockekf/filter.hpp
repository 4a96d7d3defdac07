#pragma once

// Stream driver around the EKF functions: holds the belief, the last IMU
// sample and the most recent passive-vehicle attitude (zero-order hold), and
// enforces timestamp ordering. Live simulation and log replay both go through
// this class so that they produce the same state sequence.

#include "dockekf/estimator.hpp"

#include <optional>

namespace dockekf {

struct FilterConfig {
  Extrinsics extrinsics;
  ProcessNoise process;
  MeasurementNoiseModel measurement;
  WorldParams world;
  UpdateOptions update;
};

enum class MarkerOutcome { Applied, Gated, Stale, Rejected, NotInitialized, NoPassiveAttitude };

class RelativeStateFilter {
 public:
  explicit RelativeStateFilter(FilterConfig config) : config_(std::move(config)) {
    config_.extrinsics.validate();
    config_.process.validate();
    config_.measurement.validate();
  }

  const FilterConfig& config() const { return config_; }

  void initialize(const Belief& initial) {
    if (!isCovarianceHealthy(initial.covariance)) {
      throw std::invalid_argument("filter: initial covariance is not symmetric PSD");
    }
    belief_ = initial;
  }

  bool initialized() const { return belief_.has_value(); }
  const Belief& belief() const { return belief_.value(); }
  const std::optional<Mat3>& passiveAttitude() const { return passive_attitude_; }

  /// Feeds one IMU sample. The previous sample is held over the interval up
  /// to this one. Returns true when a prediction was made.
  bool onImu(const ImuSample& imu) {
    if (last_imu_ && imu.t <= last_imu_->t) {
      throw std::invalid_argument("filter: IMU timestamps must be strictly increasing");
    }
    bool predicted = false;
    if (belief_ && last_imu_) {
      const double dt = imu.t - belief_->state.t;
      if (dt > 0.0) {
        belief_ = predict(*belief_, *last_imu_, dt, config_.process, config_.world);
        predicted = true;
      }
    }
    last_imu_ = imu;
    return predicted;
  }

  void onPassiveAttitude(const Mat3& attitude) {
    if (!isRotation(attitude)) throw std::invalid_argument("filter: passive attitude is not a rotation");
    passive_attitude_ = attitude;
  }

  MarkerOutcome onMarker(const RelativePoseMeasurement& meas) {
    if (!belief_) return MarkerOutcome::NotInitialized;
    if (!passive_attitude_) return MarkerOutcome::NoPassiveAttitude;
    if (meas.t < belief_->state.t) return MarkerOutcome::Stale;
    // Bring the belief up to the measurement time with the held IMU sample;
    // the next IMU sample then propagates only the remainder of its interval.
    if (last_imu_ && meas.t > belief_->state.t) {
      belief_ = predict(*belief_, *last_imu_, meas.t - belief_->state.t, config_.process, config_.world);
    }
    try {
      UpdateResult r = update(*belief_, meas, config_.extrinsics, *passive_attitude_,
                              config_.measurement, config_.update);
      if (r.status == UpdateStatus::Gated) return MarkerOutcome::Gated;
      belief_ = std::move(r.belief);
      return MarkerOutcome::Applied;
    } catch (const EstimatorError&) {
      return MarkerOutcome::Rejected;
    }
  }

 private:
  FilterConfig config_;
  std::optional<Belief> belief_;
  std::optional<ImuSample> last_imu_;
  std::optional<Mat3> passive_attitude_;
};

}  // namespace dockekf
