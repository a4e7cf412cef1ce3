#include "vtslam/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace vtslam {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Tracks which keys of a JSON object were read so that leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) {
      throw ConfigError("config: '" + display() + "' must be an object");
    }
  }

  const json& require(const std::string& key) {
    const auto it = object_.find(key);
    if (it == object_.end()) {
      throw ConfigError("config: missing key '" + qualified(key) + "'");
    }
    seen_.insert(key);
    return *it;
  }

  const json* optional(const std::string& key) {
    const auto it = object_.find(key);
    if (it == object_.end()) {
      return nullptr;
    }
    seen_.insert(key);
    return &*it;
  }

  double number(const std::string& key) {
    const json& value = require(key);
    if (!value.is_number()) {
      throw ConfigError("config: '" + qualified(key) + "' must be a number");
    }
    return value.get<double>();
  }

  std::int64_t integer(const std::string& key) {
    const json& value = require(key);
    if (!value.is_number_integer()) {
      throw ConfigError("config: '" + qualified(key) + "' must be an integer");
    }
    return value.get<std::int64_t>();
  }

  bool boolean(const std::string& key) {
    const json& value = require(key);
    if (!value.is_boolean()) {
      throw ConfigError("config: '" + qualified(key) + "' must be true or false");
    }
    return value.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& value = require(key);
    if (!value.is_string()) {
      throw ConfigError("config: '" + qualified(key) + "' must be a string");
    }
    return value.get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vector(const std::string& key) {
    return to_vector<N>(require(key), qualified(key));
  }

  ObjectReader child(const std::string& key) { return ObjectReader(require(key), qualified(key)); }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Rejects every key that was never read.
  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError("config: unknown key '" + qualified(key) + "'");
      }
    }
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> to_vector(const json& value, const std::string& where) {
    if (!value.is_array() || value.size() != N) {
      throw ConfigError("config: '" + where + "' must be an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!value[i].is_number()) {
        throw ConfigError("config: '" + where + "' must contain numbers only");
      }
      out(i) = value[i].get<double>();
    }
    return out;
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

const json& require_array(const json& value, const std::string& where) {
  if (!value.is_array()) {
    throw ConfigError("config: '" + where + "' must be an array");
  }
  return value;
}

Pose pose_from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  Pose pose;
  pose.position = v.head<3>();
  pose.orientation = v.tail<3>();
  return pose;
}

ordered_json pose_to_json(const Pose& pose) {
  return {pose.position.x(), pose.position.y(), pose.position.z(), pose.yaw(), pose.pitch(), pose.roll()};
}

template <typename Vector>
ordered_json vector_to_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

MeasurementNoiseModel parse_measurement_noise(ObjectReader reader) {
  const double range = reader.number("sigma_range_m");
  const double azimuth = reader.number("sigma_azimuth_rad");
  const double elevation = reader.number("sigma_elevation_rad");
  const double snr_ref = reader.number("snr_ref_linear");
  reader.finish();
  return MeasurementNoiseModel::from_sigmas(range, azimuth, elevation, snr_ref);
}

ordered_json measurement_noise_to_json(const MeasurementNoiseModel& model) {
  const Eigen::Vector3d sigma = model.base.diagonal().cwiseSqrt();
  return {{"sigma_range_m", sigma(0)},
          {"sigma_azimuth_rad", sigma(1)},
          {"sigma_elevation_rad", sigma(2)},
          {"snr_ref_linear", model.snr_ref}};
}

MotionNoise parse_motion_noise(ObjectReader reader) {
  MotionNoise noise;
  noise.linear = reader.vector<3>("sigma_linear_mps");
  noise.angular = reader.vector<3>("sigma_angular_radps");
  reader.finish();
  return noise;
}

ordered_json motion_noise_to_json(const MotionNoise& noise) {
  return {{"sigma_linear_mps", vector_to_json(noise.linear)}, {"sigma_angular_radps", vector_to_json(noise.angular)}};
}

Scenario parse_scenario(ObjectReader reader, double interval) {
  Scenario s;
  s.snapshot_interval_s = interval;
  const json& stations = require_array(reader.require("base_stations"), reader.qualified("base_stations"));
  for (std::size_t i = 0; i < stations.size(); ++i) {
    ObjectReader bs(stations[i], reader.qualified("base_stations[" + std::to_string(i) + "]"));
    BaseStation station;
    station.id = static_cast<int>(bs.integer("id"));
    station.position = bs.vector<3>("position_m");
    station.cell_label = bs.text("cell_label");
    station.clock_offset_s = bs.number("clock_offset_s");
    bs.finish();
    s.base_stations.push_back(station);
  }
  const json& walls = require_array(reader.require("walls"), reader.qualified("walls"));
  for (std::size_t i = 0; i < walls.size(); ++i) {
    ObjectReader w(walls[i], reader.qualified("walls[" + std::to_string(i) + "]"));
    Wall wall;
    wall.start = w.vector<2>("start_m");
    wall.end = w.vector<2>("end_m");
    wall.height_m = w.number("height_m");
    wall.infinite = w.boolean("infinite");
    w.finish();
    s.walls.push_back(wall);
  }
  {
    ObjectReader traj = reader.child("trajectory");
    if (const json* poses = traj.optional("poses_m_rad")) {
      PoseSequence sequence;
      const json& list = require_array(*poses, traj.qualified("poses_m_rad"));
      for (const json& p : list) {
        sequence.poses.push_back(pose_from_vector(ObjectReader::to_vector<6>(p, traj.qualified("poses_m_rad"))));
      }
      s.trajectory = sequence;
    } else {
      WaypointRoute route;
      const json& list = require_array(traj.require("waypoints_m"), traj.qualified("waypoints_m"));
      for (const json& p : list) {
        route.waypoints.push_back(ObjectReader::to_vector<2>(p, traj.qualified("waypoints_m")));
      }
      route.speed_mps = traj.number("speed_mps");
      route.turn_radius_m = traj.number("turn_radius_m");
      route.height_m = traj.number("height_m");
      route.path_length_m = traj.number("path_length_m");
      s.trajectory = route;
    }
    traj.finish();
  }
  s.ports_per_bs = static_cast<int>(reader.integer("ports_per_bs"));
  s.measurement_noise = parse_measurement_noise(reader.child("measurement_noise"));
  s.odometry_noise = parse_motion_noise(reader.child("odometry_noise"));
  s.clutter_rate = reader.number("clutter_rate_per_group");
  s.detection_probability = reader.number("detection_probability");
  {
    ObjectReader snr = reader.child("snr_model");
    s.snr_model.ref_at_1m = snr.number("ref_snr_at_1m_linear");
    s.snr_model.path_loss_exponent = snr.number("path_loss_exponent");
    s.snr_model.floor = snr.number("floor_linear");
    snr.finish();
  }
  reader.finish();
  s.validate();
  return s;
}

ordered_json scenario_to_json(const Scenario& s) {
  ordered_json out;
  ordered_json stations = ordered_json::array();
  for (const BaseStation& bs : s.base_stations) {
    stations.push_back({{"id", bs.id},
                        {"position_m", vector_to_json(bs.position)},
                        {"cell_label", bs.cell_label},
                        {"clock_offset_s", bs.clock_offset_s}});
  }
  out["base_stations"] = stations;
  ordered_json walls = ordered_json::array();
  for (const Wall& w : s.walls) {
    walls.push_back({{"start_m", vector_to_json(w.start)},
                     {"end_m", vector_to_json(w.end)},
                     {"height_m", w.height_m},
                     {"infinite", w.infinite}});
  }
  out["walls"] = walls;
  if (const auto* route = std::get_if<WaypointRoute>(&s.trajectory)) {
    ordered_json waypoints = ordered_json::array();
    for (const auto& p : route->waypoints) {
      waypoints.push_back(vector_to_json(p));
    }
    out["trajectory"] = {{"waypoints_m", waypoints},
                         {"speed_mps", route->speed_mps},
                         {"turn_radius_m", route->turn_radius_m},
                         {"height_m", route->height_m},
                         {"path_length_m", route->path_length_m}};
  } else {
    ordered_json poses = ordered_json::array();
    for (const Pose& p : std::get<PoseSequence>(s.trajectory).poses) {
      poses.push_back(pose_to_json(p));
    }
    out["trajectory"] = {{"poses_m_rad", poses}};
  }
  out["ports_per_bs"] = s.ports_per_bs;
  out["measurement_noise"] = measurement_noise_to_json(s.measurement_noise);
  out["odometry_noise"] = motion_noise_to_json(s.odometry_noise);
  out["clutter_rate_per_group"] = s.clutter_rate;
  out["detection_probability"] = s.detection_probability;
  out["snr_model"] = {{"ref_snr_at_1m_linear", s.snr_model.ref_at_1m},
                      {"path_loss_exponent", s.snr_model.path_loss_exponent},
                      {"floor_linear", s.snr_model.floor}};
  return out;
}

FilterSection parse_filter(ObjectReader reader) {
  FilterSection section;
  FilterConfig& c = section.config;
  c.particles = static_cast<int>(reader.integer("particles"));
  c.motion_noise = parse_motion_noise(reader.child("motion_noise"));
  c.measurement_noise = parse_measurement_noise(reader.child("measurement_noise"));
  c.gate = reader.number("gate_mahalanobis2");
  c.resample_threshold = reader.number("resample_ess_fraction");
  c.bias_sigma_m = reader.number("bias_sigma_m");
  const json& ids = require_array(reader.require("base_station_ids"), reader.qualified("base_station_ids"));
  for (const json& id : ids) {
    if (!id.is_number_integer()) {
      throw ConfigError("config: '" + reader.qualified("base_station_ids") + "' must contain integers");
    }
    c.base_station_ids.push_back(id.get<int>());
  }
  c.ports_per_bs = static_cast<int>(reader.integer("ports_per_bs"));
  {
    ObjectReader lifecycle = reader.child("lifecycle");
    c.lifecycle.confirm_hits = static_cast<int>(lifecycle.integer("confirm_hits"));
    c.lifecycle.confirm_window = static_cast<int>(lifecycle.integer("confirm_window"));
    c.lifecycle.drop_misses = static_cast<int>(lifecycle.integer("drop_misses"));
    lifecycle.finish();
  }
  c.keep_trajectory = reader.boolean("keep_trajectory");
  section.initial_pose = pose_from_vector(reader.vector<6>("initial_pose_m_rad"));
  reader.finish();
  c.validate();
  return section;
}

ordered_json filter_to_json(const FilterSection& section) {
  const FilterConfig& c = section.config;
  return {{"particles", c.particles},
          {"motion_noise", motion_noise_to_json(c.motion_noise)},
          {"measurement_noise", measurement_noise_to_json(c.measurement_noise)},
          {"gate_mahalanobis2", c.gate},
          {"resample_ess_fraction", c.resample_threshold},
          {"bias_sigma_m", c.bias_sigma_m},
          {"base_station_ids", c.base_station_ids},
          {"ports_per_bs", c.ports_per_bs},
          {"lifecycle",
           {{"confirm_hits", c.lifecycle.confirm_hits},
            {"confirm_window", c.lifecycle.confirm_window},
            {"drop_misses", c.lifecycle.drop_misses}}},
          {"keep_trajectory", c.keep_trajectory},
          {"initial_pose_m_rad", pose_to_json(section.initial_pose)}};
}

std::vector<std::string> split(const std::string& line, char separator) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, separator)) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == separator) {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace

RunConfig parse_config(const json& document) {
  ObjectReader reader(document, "");
  RunConfig config;
  config.snapshot_interval_s = reader.number("snapshot_interval_s");
  if (!(config.snapshot_interval_s > 0.0)) {
    throw ConfigError("config: 'snapshot_interval_s' must be positive");
  }
  if (const json* scenario = reader.optional("scenario")) {
    config.scenario = parse_scenario(ObjectReader(*scenario, "scenario"), config.snapshot_interval_s);
  }
  if (const json* filter = reader.optional("filter")) {
    config.filter = parse_filter(ObjectReader(*filter, "filter"));
  }
  reader.finish();
  return config;
}

ordered_json config_to_json(const RunConfig& config) {
  ordered_json out;
  out["snapshot_interval_s"] = config.snapshot_interval_s;
  if (config.scenario) {
    out["scenario"] = scenario_to_json(*config.scenario);
  }
  if (config.filter) {
    out["filter"] = filter_to_json(*config.filter);
  }
  return out;
}

RunConfig resolve_config(RunConfig config) {
  if (!config.filter) {
    if (!config.scenario) {
      throw ConfigError("config: missing key 'filter'");
    }
    FilterSection section;
    section.config = default_filter_config(*config.scenario);
    section.initial_pose = ground_truth(*config.scenario).poses.front();
    config.filter = section;
  }
  return config;
}

RunConfig builtin_config(const std::string& name) {
  RunConfig config;
  Scenario scenario = lund_like_scenario();
  config.snapshot_interval_s = scenario.snapshot_interval_s;
  FilterSection filter;
  filter.config = default_filter_config(scenario);
  filter.initial_pose = ground_truth(scenario).poses.front();
  if (name == "lund-like") {
    // defaults as constructed
  } else if (name == "lund-like-noiseless") {
    scenario.measurement_noise.base.setZero();
    scenario.odometry_noise = MotionNoise{};
    scenario.clutter_rate = 0.0;
    scenario.detection_probability = 1.0;
    for (BaseStation& bs : scenario.base_stations) {
      bs.clock_offset_s = 0.0;
    }
    filter.config.particles = 64;
    // Exact inputs: a small jitter keeps the particles distinct, and the
    // measurement noise floor keeps the innovation covariance regular.
    filter.config.motion_noise.linear = Eigen::Vector3d(1e-3, 1e-3, 0.0);
    filter.config.motion_noise.angular = Eigen::Vector3d(1e-3, 0.0, 0.0);
    filter.config.measurement_noise = MeasurementNoiseModel::from_sigmas(
        0.3, 0.2 * std::numbers::pi / 180.0, 0.2 * std::numbers::pi / 180.0, scenario.measurement_noise.snr_ref);
  } else {
    throw ConfigError("config: unknown built-in configuration '" + name + "'");
  }
  config.scenario = scenario;
  config.filter = filter;
  return config;
}

RunConfig load_config(const std::string& path) {
  constexpr std::string_view prefix = "builtin:";
  if (path.starts_with(prefix)) {
    return builtin_config(path.substr(prefix.size()));
  }
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file '" + path + "'");
  }
  json document;
  try {
    document = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(document);
}

ordered_json log_entry_to_json(const LogEntry& entry) {
  ordered_json out;
  out["t"] = entry.snapshot.t;
  out["u"] = vector_to_json(entry.u.vector());
  ordered_json groups = ordered_json::array();
  for (const MeasurementGroup& group : entry.snapshot.groups) {
    ordered_json mpcs = ordered_json::array();
    for (const MpcObservation& mpc : group.mpcs) {
      mpcs.push_back({{"d", mpc.z.range}, {"az", mpc.z.azimuth}, {"el", mpc.z.elevation}, {"snr", mpc.snr}});
    }
    groups.push_back({{"k", group.bs}, {"j", group.port}, {"mpcs", mpcs}});
  }
  out["groups"] = groups;
  return out;
}

LogEntry log_entry_from_json(const json& line) {
  try {
    LogEntry entry;
    entry.snapshot.t = line.at("t").get<std::int64_t>();
    const json& u = line.at("u");
    if (!u.is_array() || u.size() != 6) {
      throw IoError("'u' must hold 6 velocities");
    }
    VelocityInput::Vector6 velocity;
    for (int i = 0; i < 6; ++i) {
      velocity(i) = u[i].get<double>();
    }
    entry.u = VelocityInput::from_vector(velocity);
    for (const json& g : line.at("groups")) {
      MeasurementGroup group;
      group.bs = g.at("k").get<int>();
      group.port = g.at("j").get<int>();
      for (const json& m : g.at("mpcs")) {
        MpcObservation mpc;
        mpc.z.range = m.at("d").get<double>();
        mpc.z.azimuth = m.at("az").get<double>();
        mpc.z.elevation = m.at("el").get<double>();
        mpc.snr = m.at("snr").get<double>();
        if (!(mpc.snr > 0.0) || !(mpc.z.range > 0.0)) {
          throw IoError("component with non-positive range or SNR");
        }
        group.mpcs.push_back(mpc);
      }
      entry.snapshot.groups.push_back(std::move(group));
    }
    return entry;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed log entry: ") + e.what());
  }
}

void write_measurement_log(std::ostream& out, const std::vector<LogEntry>& entries) {
  for (const LogEntry& entry : entries) {
    out << log_entry_to_json(entry).dump() << '\n';
  }
}

std::vector<LogEntry> read_measurement_log(std::istream& in) {
  std::vector<LogEntry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("measurement log line " + std::to_string(number) + ": " + e.what());
    }
    LogEntry entry;
    try {
      entry = log_entry_from_json(parsed);
    } catch (const IoError& e) {
      throw IoError("measurement log line " + std::to_string(number) + ": " + e.what());
    }
    if (!entries.empty() && entry.snapshot.t <= entries.back().snapshot.t) {
      throw IoError("measurement log line " + std::to_string(number) + ": t is not strictly increasing");
    }
    if (entry.snapshot.t < 0) {
      throw IoError("measurement log line " + std::to_string(number) + ": negative t");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<LogEntry> read_measurement_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open measurement log '" + path + "'");
  }
  return read_measurement_log(in);
}

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw IoError("CSV column '" + name + "' not found");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& cell = rows.at(row).at(column(name));
  double value = 0.0;
  const auto result = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (result.ec != std::errc() || result.ptr != cell.data() + cell.size()) {
    throw IoError("CSV cell '" + cell + "' in column '" + name + "' is not a number");
  }
  return value;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("CSV file is empty");
  }
  table.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != table.header.size()) {
      throw IoError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                    std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i == 0 ? "" : ",") << row[i];
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) {
    write_row(row);
  }
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ostringstream text;
  write_csv(text, table);
  write_text_file(path, text.str());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  out << text;
  if (!out) {
    throw IoError("failed writing '" + path + "'");
  }
}

namespace {

std::vector<std::string> pose_fields(const PoseRow& row) {
  const Pose& p = row.pose;
  return {std::to_string(row.t),        format_double(p.position.x()), format_double(p.position.y()),
          format_double(p.position.z()), format_double(p.yaw()),        format_double(p.pitch()),
          format_double(p.roll())};
}

}  // namespace

CsvTable truth_table(const std::vector<PoseRow>& rows) {
  CsvTable table;
  table.header = {"t", "x_m", "y_m", "z_m", "yaw_rad", "pitch_rad", "roll_rad"};
  for (const PoseRow& row : rows) {
    table.rows.push_back(pose_fields(row));
  }
  return table;
}

CsvTable estimate_table(const std::vector<PoseRow>& rows) {
  CsvTable table;
  table.header = {"t", "x_m", "y_m", "z_m", "yaw_rad", "pitch_rad", "roll_rad", "ess", "particles"};
  for (const PoseRow& row : rows) {
    auto fields = pose_fields(row);
    fields.push_back(format_double(row.ess));
    fields.push_back(std::to_string(row.particles));
    table.rows.push_back(std::move(fields));
  }
  return table;
}

std::vector<PoseRow> pose_rows_from_table(const CsvTable& table) {
  std::vector<PoseRow> rows;
  const bool has_filter_columns =
      std::find(table.header.begin(), table.header.end(), "ess") != table.header.end() &&
      std::find(table.header.begin(), table.header.end(), "particles") != table.header.end();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    PoseRow row;
    row.t = static_cast<std::int64_t>(table.number(r, "t"));
    row.pose.position = {table.number(r, "x_m"), table.number(r, "y_m"), table.number(r, "z_m")};
    row.pose.orientation = {table.number(r, "yaw_rad"), table.number(r, "pitch_rad"), table.number(r, "roll_rad")};
    if (has_filter_columns) {
      row.ess = table.number(r, "ess");
      row.particles = static_cast<int>(table.number(r, "particles"));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace vtslam
