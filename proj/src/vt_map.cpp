#include "vtslam/vt_map.hpp"

#include <Eigen/LU>

namespace vtslam {

MeasurementNoiseModel MeasurementNoiseModel::from_sigmas(double range_m, double azimuth_rad, double elevation_rad,
                                                         double snr_ref) {
  MeasurementNoiseModel model;
  model.base = Eigen::Vector3d(range_m * range_m, azimuth_rad * azimuth_rad, elevation_rad * elevation_rad).asDiagonal();
  model.snr_ref = snr_ref;
  return model;
}

Eigen::Matrix3d measurement_covariance(const MeasurementNoiseModel& model, double snr) {
  if (!(snr > 0.0)) {
    throw InvalidSnr("SNR must be positive");
  }
  return model.base * (model.snr_ref / snr);
}

VirtualTransmitter init_vt(const MpcMeasurement& z, double snr, const Pose& pose, const MeasurementNoiseModel& model,
                           int port, int bs, std::uint32_t id) {
  return init_vt(z, measurement_covariance(model, snr), pose, port, bs, id);
}

VirtualTransmitter init_vt(const MpcMeasurement& z, const Eigen::Matrix3d& measurement_cov, const Pose& pose, int port,
                           int bs, std::uint32_t id) {
  if (!(z.range > kRangeEpsilon) || !(std::abs(std::cos(z.elevation)) * z.range > kRangeEpsilon)) {
    throw DegenerateGeometry("cannot initialize a transmitter at zero range or at the zenith");
  }
  VirtualTransmitter vt;
  vt.mean = invert_measurement(z, pose);
  const Eigen::Matrix3d g = inversion_jacobian(z, pose);
  vt.covariance = g * measurement_cov * g.transpose();
  vt.covariance = 0.5 * (vt.covariance + vt.covariance.transpose()).eval();
  vt.port = port;
  vt.bs = bs;
  vt.id = id;
  vt.hits = 1;
  vt.misses = 0;
  vt.status = VtStatus::candidate;
  return vt;
}

bool kalman_correct(Point3& mean, Eigen::Matrix3d& covariance, const Eigen::Matrix3d& jacobian,
                    const Eigen::Vector3d& residual, const Eigen::Matrix3d& measurement_cov) {
  const Eigen::Matrix3d hs = jacobian * covariance;
  Eigen::Matrix3d innovation_cov = hs * jacobian.transpose() + measurement_cov;
  innovation_cov = 0.5 * (innovation_cov + innovation_cov.transpose());
  // Sylvester's criterion: all leading principal minors positive.
  const double minor2 = innovation_cov(0, 0) * innovation_cov(1, 1) - innovation_cov(0, 1) * innovation_cov(1, 0);
  const double det = innovation_cov.determinant();
  if (!(innovation_cov(0, 0) > 0.0) || !(minor2 > 0.0) || !(det > 0.0)) {
    return false;
  }
  // K = Sigma H^T S^-1 = (S^-1 H Sigma)^T since S and Sigma are symmetric.
  const Eigen::Matrix3d gain = (innovation_cov.inverse() * hs).transpose();
  if (!gain.allFinite()) {
    return false;
  }
  mean += gain * residual;
  const Eigen::Matrix3d posterior = covariance - gain * hs;
  covariance = 0.5 * (posterior + posterior.transpose());
  return true;
}

VirtualTransmitter ekf_update(const VirtualTransmitter& vt, const MpcMeasurement& z, const MpcMeasurement& predicted,
                              const Eigen::Matrix3d& jacobian, const Eigen::Matrix3d& measurement_cov) {
  VirtualTransmitter updated = vt;
  if (!kalman_correct(updated.mean, updated.covariance, jacobian, measurement_residual(z, predicted), measurement_cov)) {
    throw SingularInnovation("innovation covariance is not positive definite");
  }
  ++updated.hits;
  return updated;
}

VirtualTransmitter ekf_update(const VirtualTransmitter& vt, const MpcMeasurement& z, const Pose& pose,
                              const Eigen::Matrix3d& measurement_cov) {
  const Eigen::Matrix3d rotation = rotation_matrix(pose);
  return ekf_update(vt, z, predict_measurement(vt.mean, pose, rotation), measurement_jacobian(vt.mean, pose, rotation),
                    measurement_cov);
}

VirtualTransmitter miss(const VirtualTransmitter& vt) {
  VirtualTransmitter updated = vt;
  ++updated.misses;
  return updated;
}

Lifecycle prune_or_confirm(const VirtualTransmitter& vt, const LifecyclePolicy& policy) {
  if (vt.status == VtStatus::confirmed) {
    return Lifecycle::keep;
  }
  if (vt.hits >= policy.confirm_hits && vt.hits + vt.misses <= policy.confirm_window) {
    return Lifecycle::promote;
  }
  if (vt.misses >= policy.drop_misses) {
    return Lifecycle::drop;
  }
  return Lifecycle::keep;
}

}  // namespace vtslam
