#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "test_support.hpp"
#include "vtslam/simulator.hpp"

using namespace vtslam;

TEST(Mirror, WallAtXFive) {
  const Wall wall{{5.0, -10.0}, {5.0, 10.0}, 10.0, false};
  const Point3 image = mirror_across(wall, Point3(0, 0, 0));
  EXPECT_NEAR(image.x(), 10.0, 1e-12);
  EXPECT_NEAR(image.y(), 0.0, 1e-12);
  EXPECT_NEAR(image.z(), 0.0, 1e-12);
}

TEST(Mirror, IsAnInvolutionAndKeepsHeight) {
  const Wall wall{{1.0, 2.0}, {7.0, -3.0}, 10.0, false};
  const Point3 p(13.0, -4.0, 21.0);
  const Point3 image = mirror_across(wall, p);
  EXPECT_NEAR(image.z(), 21.0, 1e-12);
  EXPECT_LT((mirror_across(wall, image) - p).norm(), 1e-12);
  // Points on the wall line are equidistant from p and its image.
  const Point3 on_wall(4.0, -0.5, 0.0);
  EXPECT_NEAR((on_wall - p).norm(), (on_wall - image).norm(), 1e-12);
}

TEST(Mirror, DegenerateWall) {
  const Wall wall{{3.0, 3.0}, {3.0, 3.0}, 10.0, false};
  EXPECT_THROW(mirror_across(wall, Point3(0, 0, 0)), DegenerateWall);
  Scenario s = vtslam::testing::small_scenario(3);
  s.walls.push_back(wall);
  EXPECT_THROW(derive_vts(s), DegenerateWall);
}

TEST(DeriveVts, OneLosPlusOneImagePerWallPerGroup) {
  Scenario s = vtslam::testing::two_station_scenario(3);
  s.ports_per_bs = 2;
  const auto groups = derive_vts(s);
  ASSERT_EQ(groups.size(), 4u);
  std::set<int> ids;
  for (const TrueVtGroup& g : groups) {
    ASSERT_EQ(g.vts.size(), 1u + s.walls.size());
    EXPECT_TRUE(g.vts[0].is_los());
    for (const TrueVt& vt : g.vts) {
      EXPECT_EQ(vt.bs, g.bs);
      ids.insert(vt.id);
    }
  }
  EXPECT_EQ(ids.size(), 2 * (1 + s.walls.size()));
  EXPECT_EQ(groups[0].vts, groups[1].vts);
}

TEST(Visibility, SegmentAndHeightLimits) {
  const Wall wall{{5.0, -1.0}, {5.0, 1.0}, 4.0, false};
  const Point3 bs(0, 0, 1);
  const Point3 vt = mirror_across(wall, bs);
  EXPECT_TRUE(reflection_visible(wall, vt, bs, Point3(0, 0, 1)));
  // Specular point at y = 5 misses the 2 m long segment.
  EXPECT_FALSE(reflection_visible(wall, vt, bs, Point3(0, 10, 1)));
  Wall infinite = wall;
  infinite.infinite = true;
  EXPECT_TRUE(reflection_visible(infinite, vt, bs, Point3(0, 10, 1)));
  // Vehicle high above: specular point above the wall top.
  EXPECT_FALSE(reflection_visible(wall, vt, bs, Point3(0, 0, 20)));
  // Vehicle behind the wall.
  EXPECT_FALSE(reflection_visible(wall, vt, bs, Point3(8, 0, 1)));
}

TEST(Snapshot, ZeroNoiseEqualsPrediction) {
  const Scenario s = vtslam::testing::small_scenario(50);
  const Simulation sim = simulate(s, 3);
  for (std::size_t t = 0; t < sim.snapshots.size(); ++t) {
    const MeasurementGroup& group = sim.snapshots[t].groups[0];
    const GroupTruth& truth = sim.records[t].groups[0];
    ASSERT_EQ(group.mpcs.size(), truth.sources.size());
    for (std::size_t m = 0; m < group.mpcs.size(); ++m) {
      ASSERT_GE(truth.sources[m], 0);
      const TrueVt& vt = sim.vts[0].vts[truth.sources[m]];
      const MpcMeasurement h = predict_measurement(vt.position, sim.truth.poses[t]);
      EXPECT_EQ(group.mpcs[m].z, h);
      EXPECT_EQ(group.mpcs[m].snr, s.snr_model.snr(h.range));
    }
    int visible = 0;
    for (const auto& e : truth.entries) {
      visible += e.visible ? 1 : 0;
    }
    EXPECT_EQ(static_cast<int>(group.mpcs.size()), visible);
  }
}

TEST(Snapshot, ClockOffsetShiftsRange) {
  Scenario s = vtslam::testing::small_scenario(2);
  const auto vts = derive_vts(s);
  Pose pose;
  pose.position = {0, 0, 1.5};
  Rng a(1), b(1);
  const Snapshot base = generate_snapshot(s, vts, pose, 0, a).first;
  s.base_stations[0].clock_offset_s = 100e-9;
  const Snapshot shifted = generate_snapshot(s, vts, pose, 0, b).first;
  ASSERT_EQ(base.groups[0].mpcs.size(), shifted.groups[0].mpcs.size());
  ASSERT_FALSE(base.groups[0].mpcs.empty());
  for (std::size_t m = 0; m < base.groups[0].mpcs.size(); ++m) {
    EXPECT_NEAR(shifted.groups[0].mpcs[m].z.range - base.groups[0].mpcs[m].z.range, 30.0, 1e-9);
  }
}

TEST(Snapshot, ClutterRateMatchesPoisson) {
  Scenario s = vtslam::testing::small_scenario(2);
  s.walls.clear();
  s.detection_probability = 1.0;
  s.clutter_rate = 0.5;
  const auto vts = derive_vts(s);
  Pose pose;
  pose.position = {0, 0, 1.5};
  Rng rng(11);
  constexpr int snapshots = 10000;
  double clutter = 0.0;
  for (int t = 0; t < snapshots; ++t) {
    const auto record = generate_snapshot(s, vts, pose, t, rng).second;
    for (const int src : record.groups[0].sources) {
      clutter += src < 0 ? 1.0 : 0.0;
    }
  }
  EXPECT_NEAR(clutter / snapshots, 0.5, 3.0 * std::sqrt(0.5 / snapshots));
}

TEST(Snapshot, DetectionProbability) {
  Scenario s = vtslam::testing::small_scenario(2);
  s.walls.clear();
  s.detection_probability = 0.7;
  const auto vts = derive_vts(s);
  Pose pose;
  pose.position = {0, 0, 1.5};
  Rng rng(12);
  constexpr int snapshots = 10000;
  double detected = 0.0;
  for (int t = 0; t < snapshots; ++t) {
    detected += static_cast<double>(generate_snapshot(s, vts, pose, t, rng).first.groups[0].mpcs.size());
  }
  EXPECT_NEAR(detected / snapshots, 0.7, 3.0 * std::sqrt(0.21 / snapshots));
}

TEST(LundLike, LayoutAndLength) {
  const Scenario s = lund_like_scenario();
  EXPECT_NO_THROW(s.validate());
  const GroundTruth truth = ground_truth(s);
  EXPECT_GE(truth.poses.size(), 6500u);
  EXPECT_LE(truth.poses.size(), 7100u);
  double length = 0.0;
  for (std::size_t t = 1; t < truth.poses.size(); ++t) {
    length += (truth.poses[t].position - truth.poses[t - 1].position).head<2>().norm();
  }
  EXPECT_NEAR(length, 530.0, 1.0);
  std::set<int> ids;
  for (const BaseStation& bs : s.base_stations) {
    ids.insert(bs.id);
  }
  EXPECT_EQ(ids.size(), s.base_stations.size());
  EXPECT_GE(s.base_stations.size(), 2u);
  EXPECT_EQ(s.ports_per_bs, 2);
}

TEST(LundLike, TruthVelocitiesReproducePoses) {
  const Scenario s = lund_like_scenario();
  const GroundTruth truth = ground_truth(s);
  ASSERT_EQ(truth.velocities.size(), truth.poses.size());
  Pose p = truth.poses[0];
  for (std::size_t t = 1; t < truth.poses.size(); ++t) {
    p = integrate(p, truth.velocities[t], s.snapshot_interval_s);
  }
  EXPECT_LT((p.position - truth.poses.back().position).norm(), 1e-6);
}

TEST(DeadReckoning, ZeroNoiseFollowsTruth) {
  Scenario s = lund_like_scenario();
  s.odometry_noise = MotionNoise{};
  Rng rng(1);
  const GroundTruth truth = ground_truth(s);
  const DeadReckoning dr = dead_reckoning(s, truth, rng);
  ASSERT_EQ(dr.poses.size(), truth.poses.size());
  for (std::size_t t = 0; t < truth.poses.size(); t += 97) {
    EXPECT_LT((dr.poses[t].position - truth.poses[t].position).norm(), 1e-6);
  }
  EXPECT_EQ(dr.odometry[5], truth.velocities[5]);
}

TEST(DeadReckoning, DriftsWithOdometryNoise) {
  const Scenario s = lund_like_scenario();
  const Simulation sim = simulate(s, 4);
  const double final_error =
      (sim.odometry.poses.back().position - sim.truth.poses.back().position).head<2>().norm();
  EXPECT_GT(final_error, 1.0);
}

TEST(Simulate, DeterministicPerSeed) {
  Scenario s = vtslam::testing::two_station_scenario(60);
  s.measurement_noise = MeasurementNoiseModel::from_sigmas(1.0, 0.02, 0.02, 10.0);
  s.odometry_noise.linear = {0.1, 0.1, 0};
  s.clutter_rate = 1.0;
  s.detection_probability = 0.8;
  const Simulation a = simulate(s, 77);
  const Simulation b = simulate(s, 77);
  const Simulation c = simulate(s, 78);
  EXPECT_EQ(a.snapshots, b.snapshots);
  EXPECT_EQ(a.odometry.odometry, b.odometry.odometry);
  EXPECT_NE(a.snapshots, c.snapshots);
}

TEST(Scenario, Validation) {
  Scenario s = vtslam::testing::small_scenario(3);
  Scenario bad = s;
  bad.base_stations.push_back(bad.base_stations[0]);
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.detection_probability = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.clutter_rate = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.snapshot_interval_s = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(SnrModel, FloorAndPathLoss) {
  const SnrModel m{1e4, 2.0, 1.0};
  EXPECT_NEAR(m.snr(10.0), 100.0, 1e-9);
  EXPECT_EQ(m.snr(1000.0), 1.0);
}

TEST(Snapshot, RepeatableForSamePoseAndSeed) {
  Scenario s = lund_like_scenario();
  const auto vts = derive_vts(s);
  const Pose pose = ground_truth(s).poses[1234];
  Rng a(21), b(21);
  const auto first = generate_snapshot(s, vts, pose, 5, a);
  const auto second = generate_snapshot(s, vts, pose, 5, b);
  EXPECT_EQ(first.first, second.first);
  EXPECT_EQ(first.second.groups[0].sources, second.second.groups[0].sources);
}

TEST(Snapshot, EmittedComponentsAreValidMeasurements) {
  const Scenario s = lund_like_scenario();
  const Simulation sim = simulate(s, 8);
  for (std::size_t t = 0; t < sim.snapshots.size(); t += 7) {
    for (const MeasurementGroup& g : sim.snapshots[t].groups) {
      for (const MpcObservation& m : g.mpcs) {
        ASSERT_GT(m.z.range, 0.0);
        ASSERT_GT(m.z.azimuth, -std::numbers::pi);
        ASSERT_LE(m.z.azimuth, std::numbers::pi);
        ASSERT_GE(m.z.elevation, -std::numbers::pi / 2);
        ASSERT_LE(m.z.elevation, std::numbers::pi / 2);
        ASSERT_GT(m.snr, 0.0);
      }
    }
  }
}
