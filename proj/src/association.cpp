#include "vtslam/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>


namespace vtslam {

Eigen::Matrix3d innovation_covariance(const Eigen::Matrix3d& jacobian, const Eigen::Matrix3d& covariance,
                                      const Eigen::Matrix3d& measurement_cov) {
  const Eigen::Matrix3d s = jacobian * covariance * jacobian.transpose() + measurement_cov;
  return 0.5 * (s + s.transpose());
}

InnovationTerms evaluate_innovation(const Eigen::Vector3d& residual, const Eigen::Matrix3d& innovation_cov) {
  // Closed-form 3x3 Cholesky factor S = L L^T.
  const Eigen::Matrix3d& s = innovation_cov;
  const double l00 = std::sqrt(s(0, 0));
  const double l10 = s(1, 0) / l00;
  const double l20 = s(2, 0) / l00;
  const double d11 = s(1, 1) - l10 * l10;
  const double l11 = std::sqrt(d11);
  const double l21 = (s(2, 1) - l20 * l10) / l11;
  const double d22 = s(2, 2) - l20 * l20 - l21 * l21;
  const double l22 = std::sqrt(d22);
  if (!(s(0, 0) > 0.0) || !(d11 > 0.0) || !(d22 > 0.0)) {
    throw SingularInnovation("innovation covariance is not positive definite");
  }
  const double w0 = residual(0) / l00;
  const double w1 = (residual(1) - l10 * w0) / l11;
  const double w2 = (residual(2) - l20 * w0 - l21 * w1) / l22;
  const double log_det = 2.0 * (std::log(l00) + std::log(l11) + std::log(l22));
  InnovationTerms terms;
  terms.mahalanobis2 = w0 * w0 + w1 * w1 + w2 * w2;
  terms.log_likelihood = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det) - 0.5 * terms.mahalanobis2;
  if (!std::isfinite(terms.mahalanobis2) || !std::isfinite(terms.log_likelihood)) {
    throw SingularInnovation("innovation covariance is numerically singular");
  }
  return terms;
}

double mahalanobis2(const MpcMeasurement& z, const MpcMeasurement& predicted, const Eigen::Matrix3d& innovation_cov) {
  return evaluate_innovation(measurement_residual(z, predicted), innovation_cov).mahalanobis2;
}

double log_likelihood(const MpcMeasurement& z, const MpcMeasurement& predicted, const Eigen::Matrix3d& innovation_cov) {
  return evaluate_innovation(measurement_residual(z, predicted), innovation_cov).log_likelihood;
}

namespace {

// Rows must not outnumber columns. Returns the column of each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), min_slack(m + 1);
  std::vector<int> owner(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int row = 1; row <= n; ++row) {
    owner[0] = row;
    int col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int row0 = owner[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= m; ++col) {
        if (used[col]) {
          continue;
        }
        const double slack = a(row0 - 1, col - 1) - u[row0] - v[col];
        if (slack < min_slack[col]) {
          min_slack[col] = slack;
          way[col] = col0;
        }
        if (min_slack[col] < delta) {
          delta = min_slack[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= m; ++col) {
        if (used[col]) {
          u[owner[col]] += delta;
          v[col] -= delta;
        } else {
          min_slack[col] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const int col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int col = 1; col <= m; ++col) {
    if (owner[col] != 0) {
      row_to_col[owner[col] - 1] = col - 1;
    }
  }
  return row_to_col;
}

}  // namespace

Assignment hungarian(const Eigen::MatrixXd& cost) {
  Assignment result;
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  result.row_to_col.assign(rows, -1);
  if (rows == 0 || cols == 0) {
    return result;
  }
  if (rows <= cols) {
    result.row_to_col = solve_assignment(cost);
  } else {
    const std::vector<int> col_to_row = solve_assignment(cost.transpose());
    for (int col = 0; col < cols; ++col) {
      result.row_to_col[col_to_row[col]] = col;
    }
  }
  for (int row = 0; row < rows; ++row) {
    if (result.row_to_col[row] >= 0) {
      result.cost += cost(row, result.row_to_col[row]);
    }
  }
  return result;
}

AssignmentResult assign_gated(const Eigen::MatrixXd& cost, double gate) {
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  // Larger than any total of in-gate costs, so gated pairs never displace feasible ones.
  const double sentinel = (std::max(gate, 1.0) + 1.0) * static_cast<double>(std::min(rows, cols) + 1) * 1e3;
  Eigen::MatrixXd gated = cost;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(cost(r, c) <= gate)) {
        gated(r, c) = sentinel;
      }
    }
  }
  const Assignment assignment = hungarian(gated);
  AssignmentResult result;
  std::vector<char> measurement_used(cols, 0);
  for (int r = 0; r < rows; ++r) {
    const int c = assignment.row_to_col[r];
    if (c >= 0 && cost(r, c) <= gate) {
      result.pairs.emplace_back(r, c);
      measurement_used[c] = 1;
    } else {
      result.unmatched_vts.push_back(r);
    }
  }
  for (int c = 0; c < cols; ++c) {
    if (!measurement_used[c]) {
      result.unmatched_measurements.push_back(c);
    }
  }
  return result;
}

AssignmentResult associate(std::span<const Prediction> predictions, std::span<const Observation> observations,
                           double gate, std::vector<InnovationTerms>* terms) {
  const auto rows = static_cast<Eigen::Index>(predictions.size());
  const auto cols = static_cast<Eigen::Index>(observations.size());
  Eigen::MatrixXd cost(rows, cols);
  if (terms != nullptr) {
    terms->resize(predictions.size() * observations.size());
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Vector3d residual = measurement_residual(observations[c].z, predictions[r].z);
      const Eigen::Matrix3d s = predictions[r].projected_cov + observations[c].cov;
      // The range term alone bounds the quadratic form from below; far pairs are gated without factorizing.
      const double range_bound = residual(0) * residual(0) / s(0, 0);
      if (s(0, 0) > 0.0 && range_bound > gate) {
        cost(r, c) = range_bound;
        if (terms != nullptr) {
          (*terms)[r * cols + c] = {range_bound, -std::numeric_limits<double>::infinity()};
        }
        continue;
      }
      const InnovationTerms t = evaluate_innovation(residual, s);
      cost(r, c) = t.mahalanobis2;
      if (terms != nullptr) {
        (*terms)[r * cols + c] = t;
      }
    }
  }
  return assign_gated(cost, gate);
}

}  // namespace vtslam
