#pragma once

#include <Eigen/Core>

#include "vtslam/geometry.hpp"
#include "vtslam/random.hpp"

namespace vtslam {

/// Odometry/IMU input for one snapshot interval.
struct VelocityInput {
  /// Body-frame (longitudinal, lateral, vertical), m/s.
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  /// (yaw, pitch, roll) rates, rad/s.
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  using Vector6 = Eigen::Matrix<double, 6, 1>;
  Vector6 vector() const {
    Vector6 v;
    v << linear, angular;
    return v;
  }
  static VelocityInput from_vector(const Vector6& v) { return {v.head<3>(), v.tail<3>()}; }

  bool operator==(const VelocityInput&) const = default;
};

/// Standard deviation per velocity channel, same layout and units as VelocityInput.
struct MotionNoise {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  bool operator==(const MotionNoise&) const = default;
};

/// Brings an orientation back into the pose domain: yaw and roll wrapped, pitch clamped.
Eigen::Vector3d normalize_orientation(const Eigen::Vector3d& orientation);

/// Forward-Euler pose propagation. The body velocity is rotated into the world
/// frame with the orientation held before the update.
Pose integrate(const Pose& previous, const VelocityInput& u, double dt);

/// Draws one pose from the motion model: Gaussian noise on each of the six
/// velocity channels (exactly six normal draws), then integrate().
Pose sample_motion(const Pose& previous, const VelocityInput& u, double dt, const MotionNoise& noise, Rng& rng);

/// Velocity that makes integrate(previous, u, dt) land on `next`.
VelocityInput velocity_between(const Pose& previous, const Pose& next, double dt);

}  // namespace vtslam
