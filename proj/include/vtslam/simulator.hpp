#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "vtslam/filter.hpp"
#include "vtslam/geometry.hpp"
#include "vtslam/motion.hpp"
#include "vtslam/random.hpp"
#include "vtslam/vt_map.hpp"

namespace vtslam {

/// Speed of light used for pseudorange conversion, m/s.
inline constexpr double kSpeedOfLight = 3.0e8;

struct BaseStation {
  int id = 0;
  Point3 position = Point3::Zero();
  std::string cell_label;
  /// Receiver-to-BS clock offset, seconds; adds c * offset to every range.
  double clock_offset_s = 0.0;

  bool operator==(const BaseStation&) const = default;
};

/// Vertical reflecting wall through the ground-plane segment start-end.
struct Wall {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d end = Eigen::Vector2d::Zero();
  double height_m = 0.0;
  /// Treat the wall as an unbounded vertical plane for visibility.
  bool infinite = false;

  bool operator==(const Wall&) const = default;
};

/// Constant-speed drive along a polyline with circular corners.
struct WaypointRoute {
  std::vector<Eigen::Vector2d> waypoints;
  double speed_mps = 1.0;
  double turn_radius_m = 8.0;
  double height_m = 2.0;
  double path_length_m = 0.0;

  bool operator==(const WaypointRoute&) const = default;
};

/// Explicit ground-truth poses, one per snapshot.
struct PoseSequence {
  std::vector<Pose> poses;

  bool operator==(const PoseSequence&) const = default;
};

/// Log-distance SNR: max(floor, ref_at_1m * range^-exponent).
struct SnrModel {
  double ref_at_1m = 1e6;
  double path_loss_exponent = 2.0;
  double floor = 1.0;

  double snr(double range_m) const;

  bool operator==(const SnrModel&) const = default;
};

struct Scenario {
  std::vector<BaseStation> base_stations;
  std::vector<Wall> walls;
  std::variant<WaypointRoute, PoseSequence> trajectory;
  double snapshot_interval_s = 0.075;
  /// Noise added to synthetic measurements.
  MeasurementNoiseModel measurement_noise;
  /// Noise corrupting the odometry handed to the filter and the dead-reckoning baseline.
  MotionNoise odometry_noise;
  /// Mean false alarms per (port, BS) group per snapshot.
  double clutter_rate = 0.0;
  double detection_probability = 1.0;
  SnrModel snr_model;
  int ports_per_bs = 1;

  /// Throws ConfigError on violated invariants.
  void validate() const;

  bool operator==(const Scenario&) const = default;
};

/// A transmitter of the scene: the BS itself (wall == -1) or its mirror image across a wall.
struct TrueVt {
  int id = 0;
  int bs = 0;
  int wall = -1;
  Point3 position = Point3::Zero();

  bool is_los() const { return wall < 0; }

  bool operator==(const TrueVt&) const = default;
};

struct TrueVtGroup {
  int bs = 0;
  int port = 0;
  std::vector<TrueVt> vts;
};

/// First-order image sources per (BS, port) group; ports share geometry.
/// Throws DegenerateWall for zero-length walls.
std::vector<TrueVtGroup> derive_vts(const Scenario& scenario);

/// Mirror image of a point across the vertical plane of a wall.
Point3 mirror_across(const Wall& wall, const Point3& point);

/// Whether the reflection of `vt` (mirror of `bs` across `wall`) reaches `vehicle` through the wall segment.
bool reflection_visible(const Wall& wall, const Point3& vt, const Point3& bs, const Point3& vehicle);

struct GroundTruth {
  std::vector<Pose> poses;
  /// velocities[t] moves poses[t-1] to poses[t]; velocities[0] is zero.
  std::vector<VelocityInput> velocities;
};

GroundTruth ground_truth(const Scenario& scenario);

/// Truth of one group in one snapshot.
struct GroupTruth {
  int bs = 0;
  int port = 0;
  /// (vt id, noiseless measurement, visible) for every transmitter of the group.
  struct Entry {
    int vt_id = 0;
    MpcMeasurement z;
    bool visible = false;
  };
  std::vector<Entry> entries;
  /// Source VT id of each emitted component, -1 for clutter; aligned with the snapshot group.
  std::vector<int> sources;
};

struct TruthRecord {
  std::int64_t t = 0;
  Pose pose;
  std::vector<GroupTruth> groups;
};

/// Synthesizes the components received at `pose_true`.
std::pair<Snapshot, TruthRecord> generate_snapshot(const Scenario& scenario, const std::vector<TrueVtGroup>& vts,
                                                   const Pose& pose_true, std::int64_t t, Rng& rng);

struct DeadReckoning {
  /// Corrupted odometry, one entry per snapshot (entry 0 is zero).
  std::vector<VelocityInput> odometry;
  std::vector<Pose> poses;
};

/// Integrates the true velocities corrupted by the odometry noise, without measurements.
DeadReckoning dead_reckoning(const Scenario& scenario, Rng& rng);
DeadReckoning dead_reckoning(const Scenario& scenario, const GroundTruth& truth, Rng& rng);

/// Urban-block loop with two 2-port base stations and six reflecting walls.
Scenario lund_like_scenario();

/// Default filter configuration matched to a scenario.
FilterConfig default_filter_config(const Scenario& scenario);

struct Simulation {
  GroundTruth truth;
  DeadReckoning odometry;
  std::vector<TrueVtGroup> vts;
  std::vector<Snapshot> snapshots;
  std::vector<TruthRecord> records;
};

/// Full run: ground truth, corrupted odometry and one snapshot per pose.
/// Odometry and measurement noise use separate streams derived from `seed`.
Simulation simulate(const Scenario& scenario, std::uint64_t seed);

}  // namespace vtslam
