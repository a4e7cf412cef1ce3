#include "vtslam/cli.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

namespace vtslam {

namespace fs = std::filesystem;

namespace {

fs::path prepare_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw IoError("cannot create output directory '" + out + "'");
  }
  return fs::path(out);
}

unsigned resolve_threads(unsigned threads) {
  if (threads == 0) {
    return std::max(1u, std::thread::hardware_concurrency());
  }
  return threads;
}

RunConfig load_with_overrides(const CommonOptions& options) {
  RunConfig config = load_config(options.config);
  if (options.particles && config.filter) {
    config.filter->config.particles = *options.particles;
    config.filter->config.validate();
  }
  return config;
}

std::vector<PoseRow> pose_rows(const std::vector<Pose>& poses) {
  std::vector<PoseRow> rows(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    rows[t].t = static_cast<std::int64_t>(t);
    rows[t].pose = poses[t];
  }
  return rows;
}

CsvTable true_vts_table(const std::vector<TrueVtGroup>& groups) {
  CsvTable table;
  table.header = {"id", "bs", "port", "wall", "x_m", "y_m", "z_m"};
  for (const TrueVtGroup& group : groups) {
    for (const TrueVt& vt : group.vts) {
      table.rows.push_back({std::to_string(vt.id), std::to_string(vt.bs), std::to_string(group.port),
                            std::to_string(vt.wall), format_double(vt.position.x()), format_double(vt.position.y()),
                            format_double(vt.position.z())});
    }
  }
  return table;
}

std::string read_runtime(const fs::path& run_info) {
  std::ifstream in(run_info);
  if (!in) {
    return {};
  }
  try {
    const auto doc = nlohmann::json::parse(in);
    return format_double(doc.at("runtime_s").get<double>());
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

fs::path require_file(const fs::path& dir, const std::string& name) {
  const fs::path path = dir / name;
  if (!fs::is_regular_file(path)) {
    throw IoError("missing input '" + path.string() + "'");
  }
  return path;
}

/// Appends every row of `source` behind a run id column.
void append_tagged(CsvTable& target, const std::string& run_id, const CsvTable& source,
                   const std::vector<std::string>& columns) {
  std::vector<std::size_t> index;
  for (const std::string& c : columns) {
    index.push_back(source.column(c));
  }
  for (const auto& row : source.rows) {
    std::vector<std::string> out{run_id};
    for (std::size_t i : index) {
      out.push_back(row[i]);
    }
    target.rows.push_back(std::move(out));
  }
}

}  // namespace

std::vector<LogEntry> log_entries(const Simulation& simulation) {
  std::vector<LogEntry> entries(simulation.snapshots.size());
  for (std::size_t t = 0; t < entries.size(); ++t) {
    entries[t].u = simulation.odometry.odometry[t];
    entries[t].snapshot = simulation.snapshots[t];
  }
  return entries;
}

FilterRun run_filter(const std::vector<LogEntry>& entries, const FilterSection& filter, double snapshot_interval_s,
                     std::uint64_t seed, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  FilterConfig config = filter.config;
  config.seed = seed;
  ParticleFilter pf(config, filter.initial_pose, resolve_threads(threads));

  FilterRun run;
  run.final_pose = filter.initial_pose;
  run.estimates.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const LogEntry& entry = entries[i];
    const double dt =
        i == 0 ? 0.0 : static_cast<double>(entry.snapshot.t - entries[i - 1].snapshot.t) * snapshot_interval_s;
    const bool last = i + 1 == entries.size();
    StepReport report = pf.step(entry.u, entry.snapshot, dt, last);
    run.failed_particle_updates += report.failed_particles;
    run.estimates.push_back({entry.snapshot.t, report.estimate, report.ess, config.particles});
    for (const AssociationRecord& record : report.associations) {
      run.associations.push_back({entry.snapshot.t, record});
    }
    run.final_pose = report.estimate;
    if (last) {
      run.maps = std::move(report.maps);
    }
  }
  run.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

CsvTable vts_table(const std::vector<VtGroup>& maps, const Pose& vehicle) {
  CsvTable table;
  table.header = {"bs",     "port",   "vt_id",  "status", "hits",   "misses", "x_m",          "y_m",
                  "z_m",    "cov_xx", "cov_xy", "cov_xz", "cov_yy", "cov_yz", "cov_zz",       "reflector_x_m",
                  "reflector_y_m", "reflector_z_m"};
  for (const VtGroup& group : maps) {
    // The confirmed transmitter closest to the vehicle stands in for the base station.
    const VirtualTransmitter* direct = nullptr;
    for (const VirtualTransmitter& vt : group.vts) {
      if (vt.status == VtStatus::confirmed &&
          (direct == nullptr ||
           (vt.mean - vehicle.position).norm() < (direct->mean - vehicle.position).norm())) {
        direct = &vt;
      }
    }
    for (const VirtualTransmitter& vt : group.vts) {
      std::vector<std::string> row{std::to_string(group.bs),
                                   std::to_string(group.port),
                                   std::to_string(vt.id),
                                   vt.status == VtStatus::confirmed ? "confirmed" : "candidate",
                                   std::to_string(vt.hits),
                                   std::to_string(vt.misses)};
      for (int i = 0; i < 3; ++i) {
        row.push_back(format_double(vt.mean(i)));
      }
      for (int r = 0; r < 3; ++r) {
        for (int c = r; c < 3; ++c) {
          row.push_back(format_double(vt.covariance(r, c)));
        }
      }
      std::array<std::string, 3> reflector;
      if (direct != nullptr && vt.status == VtStatus::confirmed && &vt != direct) {
        try {
          const Point3 p = reflector_point(vt.mean, direct->mean, vehicle.position);
          for (int i = 0; i < 3; ++i) {
            reflector[i] = format_double(p(i));
          }
        } catch (const Error&) {
          // no reflector for this geometry
        }
      }
      row.insert(row.end(), reflector.begin(), reflector.end());
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void cmd_simulate(const CommonOptions& options) {
  RunConfig config = load_with_overrides(options);
  if (!config.scenario) {
    throw ConfigError("config: missing key 'scenario'");
  }
  config = resolve_config(std::move(config));
  if (options.particles) {
    config.filter->config.particles = *options.particles;
    config.filter->config.validate();
  }
  const fs::path out = prepare_out_dir(options.out);
  const Simulation sim = simulate(*config.scenario, options.seed);

  std::ostringstream log;
  write_measurement_log(log, log_entries(sim));
  write_text_file((out / "measurements.jsonl").string(), log.str());
  write_csv_file((out / "truth.csv").string(), truth_table(pose_rows(sim.truth.poses)));
  write_csv_file((out / "deadreckoning.csv").string(), estimate_table(pose_rows(sim.odometry.poses)));
  write_csv_file((out / "vts_true.csv").string(), true_vts_table(sim.vts));
  write_text_file((out / "scenario.resolved.json").string(), config_to_json(config).dump(2) + "\n");
}

void cmd_run(const std::string& measurements_path, const CommonOptions& options) {
  RunConfig config = load_with_overrides(options);
  if (!config.filter) {
    throw ConfigError("config: missing key 'filter'");
  }
  const std::vector<LogEntry> entries = read_measurement_log_file(measurements_path);
  const fs::path out = prepare_out_dir(options.out);
  const FilterRun run = run_filter(entries, *config.filter, config.snapshot_interval_s, options.seed, options.threads);

  write_csv_file((out / "estimate.csv").string(), estimate_table(run.estimates));
  write_csv_file((out / "associations.csv").string(), associations_table(run.associations));
  write_csv_file((out / "vts.csv").string(), vts_table(run.maps, run.final_pose));
  nlohmann::ordered_json info{{"runtime_s", run.runtime_s},
                              {"snapshots", run.estimates.size()},
                              {"particles", config.filter->config.particles},
                              {"threads", resolve_threads(options.threads)},
                              {"seed", options.seed},
                              {"failed_particle_updates", run.failed_particle_updates}};
  write_text_file((out / "run_info.json").string(), info.dump(2) + "\n");
}

RunReport cmd_eval(const std::string& estimate_path, const std::string& truth_path, const std::string& out_dir) {
  const auto estimate = pose_rows_from_table(read_csv_file(estimate_path));
  const auto truth = pose_rows_from_table(read_csv_file(truth_path));
  double runtime_s = 0.0;
  const std::string runtime = read_runtime(fs::path(estimate_path).parent_path() / "run_info.json");
  if (!runtime.empty()) {
    runtime_s = std::stod(runtime);
  }
  RunReport report = evaluate(truth, estimate, runtime_s);
  const fs::path out = prepare_out_dir(out_dir);
  write_csv_file((out / "errors.csv").string(), errors_table(report));
  write_text_file((out / "report.json").string(), report_json(report).dump(2) + "\n");
  return report;
}

void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) {
    throw IoError("report needs at least one evaluated run directory");
  }
  CsvTable overlay{{"run_id", "t", "x_true_m", "y_true_m", "x_est_m", "y_est_m"}, {}};
  CsvTable errors{{"run_id", "t", "horizontal_error_m", "error_3d_m", "ess"}, {}};
  CsvTable timeline{{"run_id", "t", "bs", "port", "vt_id", "measurement_index", "range_m", "mahalanobis2"}, {}};
  CsvTable reflectors{{"run_id", "bs", "port", "vt_id", "x_m", "y_m", "z_m", "reflector_x_m", "reflector_y_m",
                       "reflector_z_m"},
                      {}};
  for (const std::string& dir : run_dirs) {
    const fs::path path(dir);
    std::string run_id = fs::weakly_canonical(path).filename().string();
    const CsvTable error_rows = read_csv_file(require_file(path, "errors.csv").string());
    const CsvTable associations = read_csv_file(require_file(path, "associations.csv").string());
    const CsvTable vts = read_csv_file(require_file(path, "vts.csv").string());
    append_tagged(overlay, run_id, error_rows, {"t", "x_true_m", "y_true_m", "x_est_m", "y_est_m"});
    append_tagged(errors, run_id, error_rows, {"t", "horizontal_error_m", "error_3d_m", "ess"});
    append_tagged(timeline, run_id, associations,
                  {"t", "bs", "port", "vt_id", "measurement_index", "range_m", "mahalanobis2"});
    CsvTable mapped;
    mapped.header = vts.header;
    const std::size_t rx = vts.column("reflector_x_m");
    for (const auto& row : vts.rows) {
      if (!row[rx].empty()) {
        mapped.rows.push_back(row);
      }
    }
    append_tagged(reflectors, run_id, mapped,
                  {"bs", "port", "vt_id", "x_m", "y_m", "z_m", "reflector_x_m", "reflector_y_m", "reflector_z_m"});
  }
  const fs::path out = prepare_out_dir(out_dir);
  write_csv_file((out / "trajectory_overlay.csv").string(), overlay);
  write_csv_file((out / "error_timeseries.csv").string(), errors);
  write_csv_file((out / "association_timeline.csv").string(), timeline);
  write_csv_file((out / "reflectors.csv").string(), reflectors);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Multipath-assisted vehicle positioning with virtual-transmitter SLAM"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonOptions options;
  std::optional<int> particles;
  app.add_option("--seed", options.seed, "Master seed");
  app.add_option("--out", options.out, "Output directory");
  app.add_option("--config", options.config, "Config file or builtin:lund-like[-noiseless]");
  app.add_option("--particles", particles, "Particle count (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--threads", options.threads, "Worker threads, 0 for all cores");

  auto* simulate_cmd = app.add_subcommand("simulate", "Synthesize a measurement log and ground truth");
  auto* run_cmd = app.add_subcommand("run", "Run the filter over a measurement log");
  std::string measurements;
  run_cmd->add_option("measurements", measurements, "measurements.jsonl")->required();
  auto* eval_cmd = app.add_subcommand("eval", "Compare an estimate with ground truth");
  std::string estimate_path;
  std::string truth_path;
  eval_cmd->add_option("estimate", estimate_path, "estimate.csv")->required();
  eval_cmd->add_option("truth", truth_path, "truth.csv")->required();
  auto* report_cmd = app.add_subcommand("report", "Emit plot data for evaluated runs");
  std::vector<std::string> run_dirs;
  report_cmd->add_option("runs", run_dirs, "Evaluated run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  options.particles = particles;

  try {
    if (simulate_cmd->parsed()) {
      cmd_simulate(options);
    } else if (run_cmd->parsed()) {
      cmd_run(measurements, options);
    } else if (eval_cmd->parsed()) {
      const RunReport report = cmd_eval(estimate_path, truth_path, options.out);
      std::cout << report_json(report).dump(2) << '\n';
    } else if (report_cmd->parsed()) {
      cmd_report(run_dirs, options.out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace vtslam
