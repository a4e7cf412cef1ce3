#pragma once

// Frames, the range/azimuth/elevation measurement function, its Jacobian and
// first-order reflection geometry. Everything here is templated on the scalar
// type so that tests can run the same code in long double.

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "vtslam/errors.hpp"

namespace vtslam {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Point3 = Vector3<double>;

/// Guard distance below which h and its inverse are treated as undefined, meters.
inline constexpr double kRangeEpsilon = 1e-6;

/// Vehicle position in the local ENU frame plus yaw/pitch/roll.
template <typename Scalar = double>
struct PoseT {
  Vector3<Scalar> position = Vector3<Scalar>::Zero();
  /// (yaw, pitch, roll), radians.
  Vector3<Scalar> orientation = Vector3<Scalar>::Zero();

  Scalar yaw() const { return orientation(0); }
  Scalar pitch() const { return orientation(1); }
  Scalar roll() const { return orientation(2); }

  template <typename Other>
  PoseT<Other> cast() const {
    return {position.template cast<Other>(), orientation.template cast<Other>()};
  }

  bool operator==(const PoseT&) const = default;
};

/// One multipath component: pseudorange d (m), azimuth and elevation of arrival (rad).
template <typename Scalar = double>
struct MpcMeasurementT {
  Scalar range = 0;
  Scalar azimuth = 0;
  Scalar elevation = 0;

  Vector3<Scalar> vector() const { return {range, azimuth, elevation}; }
  static MpcMeasurementT from_vector(const Vector3<Scalar>& v) { return {v(0), v(1), v(2)}; }

  bool operator==(const MpcMeasurementT&) const = default;
};

using Pose = PoseT<double>;
using MpcMeasurement = MpcMeasurementT<double>;

/// Maps an angle onto (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  using std::remainder;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  if (angle > -pi && angle <= pi) {
    return angle;
  }
  const Scalar two_pi = Scalar(2) * pi;
  Scalar wrapped = remainder(angle, two_pi);
  if (wrapped <= -std::numbers::pi_v<Scalar>) {
    wrapped += two_pi;
  }
  return wrapped;
}

/// Measurement difference a - b with both angular components wrapped.
template <typename Scalar>
Vector3<Scalar> measurement_residual(const MpcMeasurementT<Scalar>& a, const MpcMeasurementT<Scalar>& b) {
  return {a.range - b.range, wrap_angle(a.azimuth - b.azimuth), wrap_angle(a.elevation - b.elevation)};
}

/// World-to-body rotation for intrinsic Z-Y-X (yaw, pitch, roll) Euler angles.
template <typename Scalar>
Matrix3<Scalar> rotation_matrix(Scalar yaw, Scalar pitch, Scalar roll) {
  using std::cos;
  using std::sin;
  const Scalar cy = cos(yaw), sy = sin(yaw);
  const Scalar cp = cos(pitch), sp = sin(pitch);
  const Scalar cr = cos(roll), sr = sin(roll);
  // Body-to-world is Rz(yaw) * Ry(pitch) * Rx(roll); this returns its transpose.
  Matrix3<Scalar> body_to_world;
  body_to_world << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,  //
      sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,               //
      -sp, cp * sr, cp * cr;
  return body_to_world.transpose();
}

template <typename Scalar>
Matrix3<Scalar> rotation_matrix(const PoseT<Scalar>& pose) {
  return rotation_matrix(pose.yaw(), pose.pitch(), pose.roll());
}

/// Landmark position expressed in the receiver body frame.
template <typename Scalar>
Vector3<Scalar> to_body(const Vector3<Scalar>& point, const PoseT<Scalar>& pose) {
  return rotation_matrix(pose) * (point - pose.position);
}

/// h(vt, pose) with the world-to-body rotation of the pose supplied by the caller.
template <typename Scalar>
MpcMeasurementT<Scalar> predict_measurement(const Vector3<Scalar>& vt, const PoseT<Scalar>& pose,
                                            const Matrix3<Scalar>& rotation) {
  using std::atan2;
  using std::hypot;
  const Vector3<Scalar> body = rotation * (vt - pose.position);
  const Scalar range = body.norm();
  if (!(range > Scalar(kRangeEpsilon))) {
    throw DegenerateGeometry("virtual transmitter coincides with the receiver");
  }
  const Scalar horizontal = hypot(body.x(), body.y());
  return {range, atan2(body.y(), body.x()), atan2(body.z(), horizontal)};
}

/// h(vt, pose): range, four-quadrant azimuth and elevation above the body horizontal plane.
template <typename Scalar>
MpcMeasurementT<Scalar> predict_measurement(const Vector3<Scalar>& vt, const PoseT<Scalar>& pose) {
  return predict_measurement(vt, pose, rotation_matrix(pose));
}

/// d h / d vt with a precomputed world-to-body rotation.
template <typename Scalar>
Matrix3<Scalar> measurement_jacobian(const Vector3<Scalar>& vt, const PoseT<Scalar>& pose,
                                     const Matrix3<Scalar>& rotation) {
  using std::sqrt;
  const Vector3<Scalar> body = rotation * (vt - pose.position);
  const Scalar range2 = body.squaredNorm();
  const Scalar range = sqrt(range2);
  const Scalar horizontal2 = body.x() * body.x() + body.y() * body.y();
  const Scalar horizontal = sqrt(horizontal2);
  if (!(range > Scalar(kRangeEpsilon)) || !(horizontal > Scalar(kRangeEpsilon))) {
    throw DegenerateGeometry("measurement Jacobian undefined at zenith or coincident geometry");
  }
  Matrix3<Scalar> body_jacobian;
  body_jacobian.row(0) = body.transpose() / range;
  body_jacobian.row(1) << -body.y() / horizontal2, body.x() / horizontal2, Scalar(0);
  body_jacobian.row(2) << -body.x() * body.z() / (range2 * horizontal), -body.y() * body.z() / (range2 * horizontal),
      horizontal / range2;
  return body_jacobian * rotation;
}

/// d h / d vt, rows ordered (range, azimuth, elevation).
template <typename Scalar>
Matrix3<Scalar> measurement_jacobian(const Vector3<Scalar>& vt, const PoseT<Scalar>& pose) {
  return measurement_jacobian(vt, pose, rotation_matrix(pose));
}

/// Inverse of h: the world point that produces measurement z from pose.
template <typename Scalar>
Vector3<Scalar> invert_measurement(const MpcMeasurementT<Scalar>& z, const PoseT<Scalar>& pose) {
  using std::cos;
  using std::sin;
  const Scalar ce = cos(z.elevation);
  const Vector3<Scalar> body{z.range * ce * cos(z.azimuth), z.range * ce * sin(z.azimuth), z.range * sin(z.elevation)};
  return pose.position + rotation_matrix(pose).transpose() * body;
}

/// d invert_measurement / d z; the inverse of measurement_jacobian at the same point.
template <typename Scalar>
Matrix3<Scalar> inversion_jacobian(const MpcMeasurementT<Scalar>& z, const PoseT<Scalar>& pose) {
  using std::cos;
  using std::sin;
  const Scalar ca = cos(z.azimuth), sa = sin(z.azimuth);
  const Scalar ce = cos(z.elevation), se = sin(z.elevation);
  const Scalar r = z.range;
  Matrix3<Scalar> spherical;
  spherical << ce * ca, -r * ce * sa, -r * se * ca,  //
      ce * sa, r * ce * ca, -r * se * sa,             //
      se, Scalar(0), r * ce;
  return rotation_matrix(pose).transpose() * spherical;
}

/// Point where a first-order reflection from `bs` via mirror image `vt` hits the
/// reflecting surface on its way to `vehicle`. The surface is the perpendicular
/// bisector plane of bs-vt.
template <typename Scalar>
Vector3<Scalar> reflector_point(const Vector3<Scalar>& vt, const Vector3<Scalar>& bs, const Vector3<Scalar>& vehicle) {
  using std::abs;
  const Vector3<Scalar> normal = vt - bs;
  if (!(normal.norm() > Scalar(kRangeEpsilon))) {
    throw LosPath("virtual transmitter coincides with its base station");
  }
  const Vector3<Scalar> midpoint = (vt + bs) / Scalar(2);
  const Vector3<Scalar> direction = vehicle - vt;
  const Scalar denominator = normal.dot(direction);
  if (abs(denominator) <= Scalar(1e-12) * normal.norm() * direction.norm()) {
    throw NoIntersection("segment is parallel to the reflecting plane");
  }
  const Scalar s = normal.dot(midpoint - vt) / denominator;
  if (s < Scalar(0) || s > Scalar(1)) {
    throw NoIntersection("segment does not cross the reflecting plane");
  }
  return vt + s * direction;
}

}  // namespace vtslam
