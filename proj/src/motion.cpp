#include "vtslam/motion.hpp"

#include <algorithm>
#include <numbers>

namespace vtslam {

Eigen::Vector3d normalize_orientation(const Eigen::Vector3d& orientation) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  return {wrap_angle(orientation(0)), std::clamp(orientation(1), -half_pi, half_pi), wrap_angle(orientation(2))};
}

Pose integrate(const Pose& previous, const VelocityInput& u, double dt) {
  Pose next;
  next.orientation = normalize_orientation(previous.orientation + u.angular * dt);
  next.position = previous.position + rotation_matrix(previous).transpose() * (u.linear * dt);
  return next;
}

Pose sample_motion(const Pose& previous, const VelocityInput& u, double dt, const MotionNoise& noise, Rng& rng) {
  VelocityInput noisy = u;
  for (int i = 0; i < 3; ++i) {
    noisy.linear(i) += noise.linear(i) * rng.normal();
  }
  for (int i = 0; i < 3; ++i) {
    noisy.angular(i) += noise.angular(i) * rng.normal();
  }
  return integrate(previous, noisy, dt);
}

VelocityInput velocity_between(const Pose& previous, const Pose& next, double dt) {
  VelocityInput u;
  u.linear = rotation_matrix(previous) * (next.position - previous.position) / dt;
  for (int i = 0; i < 3; ++i) {
    u.angular(i) = wrap_angle(next.orientation(i) - previous.orientation(i)) / dt;
  }
  return u;
}

}  // namespace vtslam
