#include "vtslam/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vtslam {

double SnrModel::snr(double range_m) const {
  return std::max(floor, ref_at_1m * std::pow(std::max(range_m, 1.0), -path_loss_exponent));
}

void Scenario::validate() const {
  if (!(snapshot_interval_s > 0.0)) {
    throw ConfigError("snapshot_interval_s must be positive");
  }
  if (!(detection_probability > 0.0 && detection_probability <= 1.0)) {
    throw ConfigError("detection_probability must lie in (0, 1]");
  }
  if (!(clutter_rate >= 0.0)) {
    throw ConfigError("clutter rate must be non-negative");
  }
  if (base_stations.empty()) {
    throw ConfigError("scenario needs at least one base station");
  }
  for (std::size_t i = 0; i < base_stations.size(); ++i) {
    for (std::size_t j = i + 1; j < base_stations.size(); ++j) {
      if (base_stations[i].id == base_stations[j].id) {
        throw ConfigError("duplicate base station id " + std::to_string(base_stations[i].id));
      }
    }
  }
  if (ports_per_bs < 1) {
    throw ConfigError("ports_per_bs must be at least 1");
  }
  if (!(measurement_noise.snr_ref > 0.0) || (measurement_noise.base.diagonal().array() < 0.0).any()) {
    throw ConfigError("measurement noise must be non-negative with a positive reference SNR");
  }
  if (!(snr_model.floor > 0.0) || !(snr_model.ref_at_1m > 0.0)) {
    throw ConfigError("SNR model values must be positive");
  }
  if ((odometry_noise.linear.array() < 0.0).any() || (odometry_noise.angular.array() < 0.0).any()) {
    throw ConfigError("odometry noise must be non-negative");
  }
}

Point3 mirror_across(const Wall& wall, const Point3& point) {
  const Eigen::Vector2d along = wall.end - wall.start;
  if (!(along.norm() > kRangeEpsilon)) {
    throw DegenerateWall("wall has zero extent");
  }
  const Eigen::Vector2d normal = Eigen::Vector2d(-along.y(), along.x()).normalized();
  const double offset = normal.dot(point.head<2>() - wall.start);
  Point3 image = point;
  image.head<2>() -= 2.0 * offset * normal;
  return image;
}

bool reflection_visible(const Wall& wall, const Point3& vt, const Point3& bs, const Point3& vehicle) {
  Point3 hit;
  try {
    hit = reflector_point(vt, bs, vehicle);
  } catch (const NoIntersection&) {
    return false;
  } catch (const LosPath&) {
    return false;
  }
  if (wall.infinite) {
    return true;
  }
  const Eigen::Vector2d along = wall.end - wall.start;
  const double s = along.dot(hit.head<2>() - wall.start) / along.squaredNorm();
  return s >= 0.0 && s <= 1.0 && hit.z() >= 0.0 && hit.z() <= wall.height_m;
}

std::vector<TrueVtGroup> derive_vts(const Scenario& scenario) {
  std::vector<TrueVt> per_bs_ordered;
  int next_id = 0;
  for (const BaseStation& bs : scenario.base_stations) {
    per_bs_ordered.push_back({next_id++, bs.id, -1, bs.position});
    for (std::size_t w = 0; w < scenario.walls.size(); ++w) {
      per_bs_ordered.push_back({next_id++, bs.id, static_cast<int>(w), mirror_across(scenario.walls[w], bs.position)});
    }
  }
  std::vector<TrueVtGroup> groups;
  for (const BaseStation& bs : scenario.base_stations) {
    std::vector<TrueVt> vts;
    std::copy_if(per_bs_ordered.begin(), per_bs_ordered.end(), std::back_inserter(vts),
                 [&](const TrueVt& vt) { return vt.bs == bs.id; });
    for (int port = 0; port < scenario.ports_per_bs; ++port) {
      groups.push_back({bs.id, port, vts});
    }
  }
  return groups;
}

namespace {

struct HeadingSegment {
  double start_s = 0.0;
  double length = 0.0;
  double start_heading = 0.0;
  double curvature = 0.0;
};

std::vector<HeadingSegment> heading_profile(const WaypointRoute& route) {
  const auto& wp = route.waypoints;
  if (wp.size() < 2) {
    throw ConfigError("trajectory needs at least two waypoints");
  }
  if (!(route.speed_mps > 0.0) || !(route.turn_radius_m >= 0.0)) {
    throw ConfigError("trajectory speed must be positive and turn radius non-negative");
  }
  const std::size_t legs = wp.size() - 1;
  std::vector<double> headings(legs), lengths(legs), turns(wp.size(), 0.0), tangents(wp.size(), 0.0);
  for (std::size_t i = 0; i < legs; ++i) {
    const Eigen::Vector2d d = wp[i + 1] - wp[i];
    lengths[i] = d.norm();
    if (!(lengths[i] > kRangeEpsilon)) {
      throw ConfigError("repeated waypoint in trajectory");
    }
    headings[i] = std::atan2(d.y(), d.x());
  }
  for (std::size_t i = 1; i < legs; ++i) {
    turns[i] = wrap_angle(headings[i] - headings[i - 1]);
    tangents[i] = route.turn_radius_m * std::tan(std::abs(turns[i]) / 2.0);
  }
  std::vector<HeadingSegment> segments;
  double s = 0.0;
  double heading = headings[0];
  for (std::size_t i = 0; i < legs; ++i) {
    const double straight = lengths[i] - tangents[i] - tangents[i + 1];
    if (straight < -1e-9) {
      throw ConfigError("turn radius too large for trajectory leg " + std::to_string(i));
    }
    if (straight > 0.0) {
      segments.push_back({s, straight, heading, 0.0});
      s += straight;
    }
    if (i + 1 < legs && turns[i + 1] != 0.0) {
      const double arc = route.turn_radius_m * std::abs(turns[i + 1]);
      const double curvature = route.turn_radius_m > 0.0 ? std::copysign(1.0 / route.turn_radius_m, turns[i + 1]) : 0.0;
      if (arc > 0.0) {
        segments.push_back({s, arc, heading, curvature});
        s += arc;
      }
      heading += turns[i + 1];
    }
  }
  return segments;
}

double heading_at(const std::vector<HeadingSegment>& segments, double s, std::size_t& cursor) {
  while (cursor + 1 < segments.size() && s >= segments[cursor + 1].start_s) {
    ++cursor;
  }
  const HeadingSegment& seg = segments[cursor];
  const double into = std::min(s - seg.start_s, seg.length);
  return seg.start_heading + seg.curvature * into;
}

}  // namespace

GroundTruth ground_truth(const Scenario& scenario) {
  const double dt = scenario.snapshot_interval_s;
  GroundTruth truth;
  if (const auto* route = std::get_if<WaypointRoute>(&scenario.trajectory)) {
    const std::vector<HeadingSegment> segments = heading_profile(*route);
    const double total = segments.back().start_s + segments.back().length;
    if (route->path_length_m > total + 1e-9 || !(route->path_length_m > 0.0)) {
      throw ConfigError("path_length_m must be positive and no longer than the waypoint route");
    }
    const double step_length = route->speed_mps * dt;
    const auto steps = static_cast<std::size_t>(std::llround(route->path_length_m / step_length));
    Pose pose;
    pose.position = Point3(route->waypoints[0].x(), route->waypoints[0].y(), route->height_m);
    std::size_t cursor = 0;
    pose.orientation(0) = wrap_angle(heading_at(segments, 0.0, cursor));
    truth.poses.push_back(pose);
    truth.velocities.emplace_back();
    double previous_heading = heading_at(segments, 0.0, cursor);
    for (std::size_t t = 1; t <= steps; ++t) {
      const double heading = heading_at(segments, std::min(static_cast<double>(t) * step_length, total), cursor);
      VelocityInput u;
      u.linear(0) = route->speed_mps;
      u.angular(0) = (heading - previous_heading) / dt;
      previous_heading = heading;
      pose = integrate(pose, u, dt);
      truth.poses.push_back(pose);
      truth.velocities.push_back(u);
    }
  } else {
    const auto& given = std::get<PoseSequence>(scenario.trajectory).poses;
    if (given.empty()) {
      throw ConfigError("trajectory pose list is empty");
    }
    truth.poses.push_back(given.front());
    truth.velocities.emplace_back();
    for (std::size_t t = 1; t < given.size(); ++t) {
      const VelocityInput u = velocity_between(given[t - 1], given[t], dt);
      truth.poses.push_back(integrate(truth.poses.back(), u, dt));
      truth.velocities.push_back(u);
    }
  }
  return truth;
}

std::pair<Snapshot, TruthRecord> generate_snapshot(const Scenario& scenario, const std::vector<TrueVtGroup>& vts,
                                                   const Pose& pose_true, std::int64_t t, Rng& rng) {
  Snapshot snapshot;
  snapshot.t = t;
  TruthRecord record;
  record.t = t;
  record.pose = pose_true;
  for (const TrueVtGroup& group : vts) {
    const auto bs_it = std::find_if(scenario.base_stations.begin(), scenario.base_stations.end(),
                                    [&](const BaseStation& b) { return b.id == group.bs; });
    const BaseStation& bs = *bs_it;
    MeasurementGroup out{group.bs, group.port, {}};
    GroupTruth truth{group.bs, group.port, {}, {}};
    for (const TrueVt& vt : group.vts) {
      GroupTruth::Entry entry;
      entry.vt_id = vt.id;
      entry.visible = vt.is_los() || reflection_visible(scenario.walls[vt.wall], vt.position, bs.position,
                                                        pose_true.position);
      if ((vt.position - pose_true.position).norm() <= kRangeEpsilon) {
        entry.visible = false;
      }
      if (entry.visible) {
        entry.z = predict_measurement(vt.position, pose_true);
        if (rng.uniform() < scenario.detection_probability) {
          const double snr = scenario.snr_model.snr(entry.z.range);
          const Eigen::Vector3d sigma = measurement_covariance(scenario.measurement_noise, snr).diagonal().cwiseSqrt();
          MpcMeasurement z = entry.z;
          z.range += kSpeedOfLight * bs.clock_offset_s;
          z.range += sigma(0) * rng.normal();
          z.azimuth = wrap_angle(z.azimuth + sigma(1) * rng.normal());
          z.elevation = std::clamp(z.elevation + sigma(2) * rng.normal(), -std::numbers::pi / 2.0,
                                   std::numbers::pi / 2.0);
          z.range = std::max(z.range, 1e-3);
          out.mpcs.push_back({z, snr});
          truth.sources.push_back(vt.id);
        }
      }
      truth.entries.push_back(entry);
    }
    const int false_alarms = rng.poisson(scenario.clutter_rate);
    for (int f = 0; f < false_alarms; ++f) {
      MpcMeasurement z;
      z.range = rng.uniform(10.0, 800.0);
      z.azimuth = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
      z.elevation = rng.uniform(-std::numbers::pi / 6.0, std::numbers::pi / 6.0);
      out.mpcs.push_back({z, scenario.snr_model.floor});
      truth.sources.push_back(-1);
    }
    // Fisher-Yates so that component order carries no information about the source.
    for (std::size_t i = out.mpcs.size(); i > 1; --i) {
      const std::size_t j = rng.below(i);
      std::swap(out.mpcs[i - 1], out.mpcs[j]);
      std::swap(truth.sources[i - 1], truth.sources[j]);
    }
    snapshot.groups.push_back(std::move(out));
    record.groups.push_back(std::move(truth));
  }
  return {std::move(snapshot), std::move(record)};
}

DeadReckoning dead_reckoning(const Scenario& scenario, const GroundTruth& truth, Rng& rng) {
  DeadReckoning dr;
  dr.poses.push_back(truth.poses.front());
  dr.odometry.emplace_back();
  for (std::size_t t = 1; t < truth.poses.size(); ++t) {
    VelocityInput u = truth.velocities[t];
    for (int i = 0; i < 3; ++i) {
      u.linear(i) += scenario.odometry_noise.linear(i) * rng.normal();
    }
    for (int i = 0; i < 3; ++i) {
      u.angular(i) += scenario.odometry_noise.angular(i) * rng.normal();
    }
    dr.poses.push_back(integrate(dr.poses.back(), u, scenario.snapshot_interval_s));
    dr.odometry.push_back(u);
  }
  return dr;
}

DeadReckoning dead_reckoning(const Scenario& scenario, Rng& rng) {
  return dead_reckoning(scenario, ground_truth(scenario), rng);
}

Scenario lund_like_scenario() {
  Scenario s;
  s.snapshot_interval_s = 0.075;
  s.ports_per_bs = 2;
  s.base_stations = {
      {1, Point3(215.0, -60.0, 25.0), "A", 0.0},
      {2, Point3(60.0, 300.0, 30.0), "B", 0.0},
  };
  s.walls = {
      // Far facade 230 m behind base station A; its image source stays in view for the whole loop.
      {{-15.0, -200.0}, {-15.0, 200.0}, 40.0, false},
      {{-10.0, -25.0}, {190.0, -25.0}, 20.0, false},
      {{-10.0, 115.0}, {190.0, 115.0}, 20.0, false},
      {{200.0, -20.0}, {200.0, 110.0}, 20.0, false},
      // Facades of the block enclosed by the loop.
      {{15.0, 12.0}, {160.0, 12.0}, 20.0, false},
      {{15.0, 78.0}, {160.0, 78.0}, 20.0, false},
  };
  WaypointRoute route;
  route.waypoints = {{0.0, 0.0}, {175.0, 0.0}, {175.0, 90.0}, {0.0, 90.0}, {0.0, 0.0}, {60.0, 0.0}};
  route.speed_mps = 1.0;
  route.turn_radius_m = 8.0;
  route.height_m = 2.0;
  route.path_length_m = 530.0;
  s.trajectory = route;
  constexpr double deg = std::numbers::pi / 180.0;
  s.snr_model = {1e6, 2.0, 1e6 / (800.0 * 800.0)};
  // Base sigmas hold at 250 m; nearer paths are cleaner, farther ones noisier.
  s.measurement_noise = MeasurementNoiseModel::from_sigmas(3.0, 2.0 * deg, 2.0 * deg, s.snr_model.snr(250.0));
  s.odometry_noise.linear = Eigen::Vector3d(0.05, 0.05, 0.0);
  s.odometry_noise.angular = Eigen::Vector3d(0.035, 0.0, 0.0);
  s.clutter_rate = 0.5;
  s.detection_probability = 0.9;
  return s;
}

FilterConfig default_filter_config(const Scenario& scenario) {
  FilterConfig config;
  config.particles = 512;
  config.motion_noise = scenario.odometry_noise;
  config.measurement_noise = scenario.measurement_noise;
  for (const BaseStation& bs : scenario.base_stations) {
    config.base_station_ids.push_back(bs.id);
  }
  config.ports_per_bs = scenario.ports_per_bs;
  return config;
}

Simulation simulate(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  Simulation sim;
  sim.truth = ground_truth(scenario);
  Rng odometry_rng(derive_seed(seed, "simulator.odometry"));
  sim.odometry = dead_reckoning(scenario, sim.truth, odometry_rng);
  sim.vts = derive_vts(scenario);
  Rng measurement_rng(derive_seed(seed, "simulator.measurements"));
  sim.snapshots.reserve(sim.truth.poses.size());
  sim.records.reserve(sim.truth.poses.size());
  for (std::size_t t = 0; t < sim.truth.poses.size(); ++t) {
    auto [snapshot, record] =
        generate_snapshot(scenario, sim.vts, sim.truth.poses[t], static_cast<std::int64_t>(t), measurement_rng);
    sim.snapshots.push_back(std::move(snapshot));
    sim.records.push_back(std::move(record));
  }
  return sim;
}

}  // namespace vtslam
