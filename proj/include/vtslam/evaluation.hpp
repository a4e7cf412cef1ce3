#pragma once

// Trajectory error metrics of an estimate against ground truth.

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "vtslam/io.hpp"

namespace vtslam {

struct ErrorRow {
  std::int64_t t = 0;
  Pose truth;
  Pose estimate;
  double horizontal_error_m = 0.0;
  double error_3d_m = 0.0;
  double ess = 1.0;
  int particles = 1;
};

struct ErrorSummary {
  double max_horizontal_m = 0.0;
  double final_horizontal_m = 0.0;
  double rmse_horizontal_m = 0.0;
  double rmse_3d_m = 0.0;
  double runtime_s = 0.0;
  std::size_t snapshots = 0;
};

/// One accepted pairing of the reported particle, tagged with its snapshot index.
struct AssociationRow {
  std::int64_t t = 0;
  AssociationRecord record;
};

struct RunReport {
  std::vector<ErrorRow> rows;
  ErrorSummary summary;
  std::vector<AssociationRow> associations;
};

/// Horizontal error of a single pose pair, ||(dx, dy)||.
double horizontal_error(const Pose& truth, const Pose& estimate);

/// Pairs estimate and truth rows by t. Throws IoError when the t grids differ.
RunReport evaluate(const std::vector<PoseRow>& truth, const std::vector<PoseRow>& estimate, double runtime_s = 0.0);

CsvTable errors_table(const RunReport& report);
std::vector<ErrorRow> error_rows_from_table(const CsvTable& table);

CsvTable associations_table(const std::vector<AssociationRow>& rows);

/// Summary plus reference figures of the field trial, for context.
nlohmann::ordered_json report_json(const RunReport& report);

}  // namespace vtslam
