#pragma once

// File formats: the JSON configuration document, the JSON Lines measurement
// log and the fixed-header CSV tables.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "vtslam/filter.hpp"
#include "vtslam/simulator.hpp"

namespace vtslam {

/// Filter settings plus the pose every particle starts from.
struct FilterSection {
  FilterConfig config;
  Pose initial_pose;

  bool operator==(const FilterSection&) const = default;
};

/// The single configuration document shared by all subcommands.
struct RunConfig {
  double snapshot_interval_s = 0.075;
  std::optional<Scenario> scenario;
  std::optional<FilterSection> filter;

  bool operator==(const RunConfig&) const = default;
};

/// Strict parse: unknown keys and missing keys raise ConfigError naming the key.
RunConfig parse_config(const nlohmann::json& document);
nlohmann::ordered_json config_to_json(const RunConfig& config);

/// Reads a config file, or a built-in one: "builtin:lund-like" or "builtin:lund-like-noiseless".
RunConfig load_config(const std::string& path);

/// Built-in configurations by name (without the "builtin:" prefix).
RunConfig builtin_config(const std::string& name);

/// Fills a missing filter section from the scenario and its first true pose.
RunConfig resolve_config(RunConfig config);

/// One line of the measurement log.
struct LogEntry {
  VelocityInput u;
  Snapshot snapshot;

  bool operator==(const LogEntry&) const = default;
};

nlohmann::ordered_json log_entry_to_json(const LogEntry& entry);
LogEntry log_entry_from_json(const nlohmann::json& line);

void write_measurement_log(std::ostream& out, const std::vector<LogEntry>& entries);
/// Throws IoError on unreadable lines or non-increasing t.
std::vector<LogEntry> read_measurement_log(std::istream& in);
std::vector<LogEntry> read_measurement_log_file(const std::string& path);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Minimal CSV table with a header row; no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws IoError if the column is absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

/// A pose at one snapshot index, with the filter's ESS and particle count when known.
struct PoseRow {
  std::int64_t t = 0;
  Pose pose;
  double ess = 1.0;
  int particles = 1;
};

/// truth.csv: t,x_m,y_m,z_m,yaw_rad,pitch_rad,roll_rad
CsvTable truth_table(const std::vector<PoseRow>& rows);
/// estimate.csv: truth columns followed by ess,particles
CsvTable estimate_table(const std::vector<PoseRow>& rows);
std::vector<PoseRow> pose_rows_from_table(const CsvTable& table);

/// Writes text to a file, raising IoError on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace vtslam
