#pragma once

// SO(3) helpers shared by the estimator, the sensor models and the simulator.
// Rotations are plain 3x3 matrices; a rotation vector is an axis scaled by
// its angle in radians.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dockekf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Frobenius / determinant tolerance for something to count as a rotation.
inline constexpr double kRotationTolerance = 1e-9;

/// Below this angle exp/log switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-7;

/// Within this distance of pi the rotation axis sign is undetermined.
inline constexpr double kPiAmbiguity = 1e-8;

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> skew(const Eigen::MatrixBase<Derived>& a) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, 3, 3> m;
  m << S(0), -a(2), a(1),
       a(2), S(0), -a(0),
       -a(1), a(0), S(0);
  return m;
}

/// Inverse of skew() on the antisymmetric part of `m`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> vee(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  return Eigen::Matrix<S, 3, 1>(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) / S(2);
}

/// Rodrigues formula. Continuous through zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> expMap(const Eigen::MatrixBase<Derived>& v) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using S = typename Derived::Scalar;
  const S theta2 = v.squaredNorm();
  const S theta = std::sqrt(theta2);
  S a;
  S b;
  if (theta < S(kSmallAngle)) {
    a = S(1) - theta2 / S(6) + theta2 * theta2 / S(120);
    b = S(0.5) - theta2 / S(24) + theta2 * theta2 / S(720);
  } else {
    a = std::sin(theta) / theta;
    b = (S(1) - std::cos(theta)) / theta2;
  }
  const Eigen::Matrix<S, 3, 3> k = skew(v);
  return Eigen::Matrix<S, 3, 3>::Identity() + a * k + b * k * k;
}

template <typename Derived>
bool isRotation(const Eigen::MatrixBase<Derived>& r, double tol = kRotationTolerance) {
  using S = typename Derived::Scalar;
  const Eigen::Matrix<S, 3, 3> m = r;
  if (!m.allFinite()) return false;
  const S orth = (m.transpose() * m - Eigen::Matrix<S, 3, 3>::Identity()).norm();
  return orth <= S(tol) && std::abs(m.determinant() - S(1)) <= S(tol);
}

struct LogResult {
  Vec3 vector = Vec3::Zero();
  /// Angle is pi (to kPiAmbiguity); both `vector` and `-vector` are valid.
  bool ambiguous = false;
};

/// Rotation vector of `r` with angle in [0, pi]. At exactly pi the
/// representative with its first nonzero component positive is returned and
/// the result is flagged ambiguous.
inline LogResult logMap(const Mat3& r) {
  if (!isRotation(r)) {
    throw std::invalid_argument("logMap: input is not a rotation matrix");
  }
  const Vec3 axis_sin = vee(r);  // sin(theta) * n
  const double s = axis_sin.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);

  LogResult out;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    out.vector = axis_sin * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
    return out;
  }
  if (std::numbers::pi - theta > 1e-2) {
    out.vector = axis_sin * (theta / s);
    return out;
  }

  // Near pi: recover the axis from the symmetric part, n n^T = (R_sym - cI)/(1-c).
  const Mat3 nnt = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k = 0;
  nnt.diagonal().maxCoeff(&k);
  Vec3 n = nnt.col(k) / std::sqrt(std::max(nnt(k, k), 0.0));
  n.normalize();
  out.ambiguous = (std::numbers::pi - theta) < kPiAmbiguity;
  if (out.ambiguous) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(n(i)) > 1e-12) {
        if (n(i) < 0.0) n = -n;
        break;
      }
    }
  } else if (n.dot(axis_sin) < 0.0) {
    n = -n;
  }
  out.vector = theta * n;
  return out;
}

/// Nearest rotation (orthogonal polar factor) to a slightly drifted one.
inline Mat3 reorthonormalize(const Mat3& r) {
  if (!r.allFinite()) throw std::invalid_argument("reorthonormalize: non-finite input");
  if ((r.transpose() * r - Mat3::Identity()).norm() >= 0.1) {
    throw std::invalid_argument("reorthonormalize: input too far from a rotation");
  }
  if (r.determinant() <= 0.0) {
    throw std::invalid_argument("reorthonormalize: non-positive determinant");
  }
  const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

/// Z-Y-X (yaw, pitch, roll) angles of a body-to-world rotation, in radians.
inline Vec3 yawPitchRoll(const Mat3& r) {
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {yaw, pitch, roll};
}

inline double wrapAngle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace dockekf
