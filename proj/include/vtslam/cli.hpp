#pragma once

// Subcommand implementations behind the command-line tool.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vtslam/evaluation.hpp"
#include "vtslam/filter.hpp"
#include "vtslam/io.hpp"

namespace vtslam {

/// Flags shared by all subcommands.
struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string config = "builtin:lund-like";
  std::optional<int> particles;
  /// 0 selects every hardware thread.
  unsigned threads = 1;
};

/// Output of a filter pass over a measurement log.
struct FilterRun {
  std::vector<PoseRow> estimates;
  std::vector<AssociationRow> associations;
  /// Maps of the heaviest particle at the last snapshot.
  std::vector<VtGroup> maps;
  Pose final_pose;
  double runtime_s = 0.0;
  int failed_particle_updates = 0;
};

/// Runs the filter over `entries`; the first entry carries the initial pose and no motion.
FilterRun run_filter(const std::vector<LogEntry>& entries, const FilterSection& filter, double snapshot_interval_s,
                     std::uint64_t seed, unsigned threads);

/// Log entries of a simulation, odometry riding with each snapshot.
std::vector<LogEntry> log_entries(const Simulation& simulation);

/// Final transmitter table with reflector points where the geometry defines one.
CsvTable vts_table(const std::vector<VtGroup>& maps, const Pose& vehicle);

void cmd_simulate(const CommonOptions& options);
void cmd_run(const std::string& measurements_path, const CommonOptions& options);
RunReport cmd_eval(const std::string& estimate_path, const std::string& truth_path, const std::string& out_dir);
void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

/// Parses arguments, dispatches, and maps failures to exit codes
/// (2 configuration, 3 input/output, 4 numerical).
int run_cli(int argc, char** argv);

}  // namespace vtslam
