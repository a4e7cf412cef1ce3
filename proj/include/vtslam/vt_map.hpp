#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "vtslam/geometry.hpp"

namespace vtslam {

enum class VtStatus { candidate, confirmed };

/// Gaussian estimate of one (virtual) transmitter seen on port `port` of base station `bs`.
struct VirtualTransmitter {
  Point3 mean = Point3::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
  int port = 0;
  int bs = 0;
  /// Unique within a particle lineage; assigned at birth.
  std::uint32_t id = 0;
  int hits = 0;
  int misses = 0;
  VtStatus status = VtStatus::candidate;

  bool operator==(const VirtualTransmitter&) const = default;
};

/// Per-MPC measurement covariance: the base covariance applies at `snr_ref`
/// and scales inversely with the linear SNR of the component.
struct MeasurementNoiseModel {
  Eigen::Matrix3d base = Eigen::Matrix3d::Identity();
  double snr_ref = 1.0;

  static MeasurementNoiseModel from_sigmas(double range_m, double azimuth_rad, double elevation_rad, double snr_ref);

  bool operator==(const MeasurementNoiseModel&) const = default;
};

/// Q * (snr_ref / snr). Throws InvalidSnr for snr <= 0.
Eigen::Matrix3d measurement_covariance(const MeasurementNoiseModel& model, double snr);

/// Births a candidate at the inverted measurement with covariance G Q_t G^T.
VirtualTransmitter init_vt(const MpcMeasurement& z, double snr, const Pose& pose, const MeasurementNoiseModel& model,
                           int port, int bs, std::uint32_t id = 0);

/// Same as above with an explicit measurement covariance.
VirtualTransmitter init_vt(const MpcMeasurement& z, const Eigen::Matrix3d& measurement_cov, const Pose& pose, int port,
                           int bs, std::uint32_t id = 0);

/// Linear Kalman correction of a 3-state Gaussian given Jacobian, residual and
/// measurement covariance. Returns false if the innovation covariance is singular.
bool kalman_correct(Point3& mean, Eigen::Matrix3d& covariance, const Eigen::Matrix3d& jacobian,
                    const Eigen::Vector3d& residual, const Eigen::Matrix3d& measurement_cov);

/// Standard EKF correction of one transmitter; innovation angles are wrapped.
/// Throws SingularInnovation if H Sigma H^T + Q_t cannot be factorized.
VirtualTransmitter ekf_update(const VirtualTransmitter& vt, const MpcMeasurement& z, const Pose& pose,
                              const Eigen::Matrix3d& measurement_cov);

/// Same update with the prediction h(mean, pose) and its Jacobian already evaluated.
VirtualTransmitter ekf_update(const VirtualTransmitter& vt, const MpcMeasurement& z, const MpcMeasurement& predicted,
                              const Eigen::Matrix3d& jacobian, const Eigen::Matrix3d& measurement_cov);

/// No associated measurement while in view: estimate frozen, miss counted.
VirtualTransmitter miss(const VirtualTransmitter& vt);

enum class Lifecycle { keep, promote, drop };

/// M-of-N confirmation: `confirm_hits` hits within the first `confirm_window`
/// opportunities promote a candidate, `drop_misses` misses before promotion drop it.
struct LifecyclePolicy {
  int confirm_hits = 3;
  int confirm_window = 5;
  int drop_misses = 3;

  bool operator==(const LifecyclePolicy&) const = default;
};

Lifecycle prune_or_confirm(const VirtualTransmitter& vt, const LifecyclePolicy& policy = {});

}  // namespace vtslam
