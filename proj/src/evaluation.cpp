#include "vtslam/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace vtslam {

double horizontal_error(const Pose& truth, const Pose& estimate) {
  return (truth.position.head<2>() - estimate.position.head<2>()).norm();
}

RunReport evaluate(const std::vector<PoseRow>& truth, const std::vector<PoseRow>& estimate, double runtime_s) {
  if (truth.size() != estimate.size()) {
    throw IoError("estimate has " + std::to_string(estimate.size()) + " snapshots, truth has " +
                  std::to_string(truth.size()));
  }
  RunReport report;
  report.rows.reserve(truth.size());
  double sum_h = 0.0;
  double sum_3d = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].t != estimate[i].t) {
      throw IoError("snapshot grids differ at row " + std::to_string(i) + ": t=" + std::to_string(estimate[i].t) +
                    " vs t=" + std::to_string(truth[i].t));
    }
    if (i > 0 && truth[i].t <= truth[i - 1].t) {
      throw IoError("truth rows are not ordered by t");
    }
    ErrorRow row;
    row.t = truth[i].t;
    row.truth = truth[i].pose;
    row.estimate = estimate[i].pose;
    row.horizontal_error_m = horizontal_error(row.truth, row.estimate);
    row.error_3d_m = (row.truth.position - row.estimate.position).norm();
    row.ess = estimate[i].ess;
    row.particles = estimate[i].particles;
    sum_h += row.horizontal_error_m * row.horizontal_error_m;
    sum_3d += row.error_3d_m * row.error_3d_m;
    report.summary.max_horizontal_m = std::max(report.summary.max_horizontal_m, row.horizontal_error_m);
    report.rows.push_back(row);
  }
  report.summary.snapshots = report.rows.size();
  report.summary.runtime_s = runtime_s;
  if (!report.rows.empty()) {
    const double n = static_cast<double>(report.rows.size());
    report.summary.final_horizontal_m = report.rows.back().horizontal_error_m;
    report.summary.rmse_horizontal_m = std::sqrt(sum_h / n);
    report.summary.rmse_3d_m = std::sqrt(sum_3d / n);
  }
  return report;
}

CsvTable errors_table(const RunReport& report) {
  CsvTable table;
  table.header = {"t",         "x_true_m",  "y_true_m",  "z_true_m",           "yaw_true_rad", "x_est_m",
                  "y_est_m",   "z_est_m",   "yaw_est_rad", "horizontal_error_m", "error_3d_m",   "ess",
                  "particles"};
  for (const ErrorRow& r : report.rows) {
    table.rows.push_back({std::to_string(r.t), format_double(r.truth.position.x()), format_double(r.truth.position.y()),
                          format_double(r.truth.position.z()), format_double(r.truth.yaw()),
                          format_double(r.estimate.position.x()), format_double(r.estimate.position.y()),
                          format_double(r.estimate.position.z()), format_double(r.estimate.yaw()),
                          format_double(r.horizontal_error_m), format_double(r.error_3d_m), format_double(r.ess),
                          std::to_string(r.particles)});
  }
  return table;
}

std::vector<ErrorRow> error_rows_from_table(const CsvTable& table) {
  std::vector<ErrorRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    ErrorRow r;
    r.t = static_cast<std::int64_t>(table.number(i, "t"));
    r.truth.position = {table.number(i, "x_true_m"), table.number(i, "y_true_m"), table.number(i, "z_true_m")};
    r.truth.orientation.x() = table.number(i, "yaw_true_rad");
    r.estimate.position = {table.number(i, "x_est_m"), table.number(i, "y_est_m"), table.number(i, "z_est_m")};
    r.estimate.orientation.x() = table.number(i, "yaw_est_rad");
    r.horizontal_error_m = table.number(i, "horizontal_error_m");
    r.error_3d_m = table.number(i, "error_3d_m");
    r.ess = table.number(i, "ess");
    r.particles = static_cast<int>(table.number(i, "particles"));
    rows.push_back(r);
  }
  return rows;
}

CsvTable associations_table(const std::vector<AssociationRow>& rows) {
  CsvTable table;
  table.header = {"t", "bs", "port", "vt_id", "measurement_index", "range_m", "mahalanobis2"};
  for (const AssociationRow& a : rows) {
    table.rows.push_back({std::to_string(a.t), std::to_string(a.record.bs), std::to_string(a.record.port),
                          std::to_string(a.record.vt_id), std::to_string(a.record.measurement_index),
                          format_double(a.record.range_m), format_double(a.record.mahalanobis2)});
  }
  return table;
}

nlohmann::ordered_json report_json(const RunReport& report) {
  const ErrorSummary& s = report.summary;
  nlohmann::ordered_json out;
  out["summary"] = {{"max_horizontal_error_m", s.max_horizontal_m},
                    {"final_horizontal_error_m", s.final_horizontal_m},
                    {"rmse_horizontal_m", s.rmse_horizontal_m},
                    {"rmse_3d_m", s.rmse_3d_m},
                    {"runtime_s", s.runtime_s},
                    {"snapshots", s.snapshots}};
  out["field_trial_reference"] = {
      {"slam", {{"max_horizontal_error_m", 6.0}, {"final_horizontal_error_m", 3.0}}},
      {"proprioception", {{"max_horizontal_error_m", 20.0}, {"final_horizontal_error_m", 15.0}}}};
  return out;
}

}  // namespace vtslam
