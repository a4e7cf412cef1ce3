#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vtslam/geometry.hpp"

namespace vtslam {

/// chi-square 0.99 quantile with 3 degrees of freedom.
inline constexpr double kDefaultGate = 11.345;

/// H Sigma H^T + Q_t.
Eigen::Matrix3d innovation_covariance(const Eigen::Matrix3d& jacobian, const Eigen::Matrix3d& covariance,
                                      const Eigen::Matrix3d& measurement_cov);

/// Quadratic form and Gaussian log-density of one innovation.
struct InnovationTerms {
  double mahalanobis2 = 0.0;
  double log_likelihood = 0.0;
};

/// Throws SingularInnovation if `innovation_cov` is not positive definite.
InnovationTerms evaluate_innovation(const Eigen::Vector3d& residual, const Eigen::Matrix3d& innovation_cov);

/// nu^T S^-1 nu with angle components of nu wrapped.
double mahalanobis2(const MpcMeasurement& z, const MpcMeasurement& predicted, const Eigen::Matrix3d& innovation_cov);

/// -1/2 ln|2 pi S| - 1/2 mahalanobis2.
double log_likelihood(const MpcMeasurement& z, const MpcMeasurement& predicted, const Eigen::Matrix3d& innovation_cov);

/// Minimum-cost matching of size min(rows, cols).
struct Assignment {
  /// Column assigned to each row, -1 when the row is left unmatched.
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Kuhn-Munkres with potentials (shortest augmenting paths), O(n^2 m).
Assignment hungarian(const Eigen::MatrixXd& cost);

struct AssignmentResult {
  /// (transmitter index, measurement index)
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_vts;
  std::vector<int> unmatched_measurements;
};

/// Gated assignment on a precomputed cost matrix (rows: transmitters, cols:
/// measurements). Entries above `gate` are never paired.
AssignmentResult assign_gated(const Eigen::MatrixXd& cost, double gate);

/// Predicted measurement of one transmitter and its projected covariance H Sigma H^T.
struct Prediction {
  MpcMeasurement z;
  Eigen::Matrix3d projected_cov = Eigen::Matrix3d::Zero();
};

/// Observed component with its own measurement covariance Q_t.
struct Observation {
  MpcMeasurement z;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

/// Maximum-likelihood assignment for one (port, base station) group. The cost
/// of pairing transmitter l with measurement m is the squared Mahalanobis
/// distance under S = H Sigma H^T + Q_t(m). When `terms` is non-null it
/// receives every pairwise InnovationTerms in row-major (l, m) order; pairs
/// rejected by the range term alone carry that lower bound and a -inf likelihood.
AssignmentResult associate(std::span<const Prediction> predictions, std::span<const Observation> observations,
                           double gate, std::vector<InnovationTerms>* terms = nullptr);

}  // namespace vtslam
