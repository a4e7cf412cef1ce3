// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>

#include "test_support.hpp"
#include "vtslam/cli.hpp"

using namespace vtslam;

namespace {

// Tolerances and budgets.
constexpr double kNoiselessFinalError = 0.5;
constexpr double kNoiselessVtError = 1.0;
constexpr double kNoiselessBudgetS = 120.0;
constexpr int kSeeds = 20;
constexpr int kCalibratedParticles = 512;
constexpr double kMedianSlamError = 6.0;
constexpr int kSeedsSlamBeatsDr = 18;
constexpr double kDrMedianLow = 10.0;
constexpr double kDrMedianHigh = 25.0;
constexpr double kCalibratedBudgetS = 30.0 * 60.0;
constexpr int kRandomMatrices = 1000;
constexpr int kMaxDimension = 6;
constexpr int kJacobianConfigs = 1000;
constexpr double kJacobianTolerance = 1e-6;
constexpr int kEkfUpdates = 10000;
constexpr int kResampleTrials = 10000;
constexpr double kClockOffsetS = 100e-9;
constexpr double kClockShiftM = 30.0;
constexpr double kClockTolerance = 1e-6;
constexpr int kDeterminismSnapshots = 1500;
constexpr double kTrackDurationS = 100.0;
constexpr double kTrackRangeSpanM = 150.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

unsigned max_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double final_error(const std::vector<Pose>& truth, const Pose& estimate) {
  return horizontal_error(truth.back(), estimate);
}

Outcome noiseless_consistency() {
  const RunConfig config = builtin_config("lund-like-noiseless");
  const Simulation sim = simulate(*config.scenario, 1);
  const auto start = std::chrono::steady_clock::now();
  const FilterRun run = run_filter(log_entries(sim), *config.filter, config.snapshot_interval_s, 1, max_threads());
  const double runtime = seconds_since(start);
  const double error = final_error(sim.truth.poses, run.final_pose);

  double worst_vt = 0.0;
  int confirmed = 0;
  for (const VtGroup& group : run.maps) {
    const auto truth = std::find_if(sim.vts.begin(), sim.vts.end(),
                                    [&](const TrueVtGroup& g) { return g.bs == group.bs && g.port == group.port; });
    for (const VirtualTransmitter& vt : group.vts) {
      if (vt.status != VtStatus::confirmed) {
        continue;
      }
      ++confirmed;
      double nearest = std::numeric_limits<double>::infinity();
      for (const TrueVt& t : truth->vts) {
        nearest = std::min(nearest, (vt.mean - t.position).norm());
      }
      worst_vt = std::max(worst_vt, nearest);
    }
  }
  return {error < kNoiselessFinalError && confirmed > 0 && worst_vt < kNoiselessVtError && runtime < kNoiselessBudgetS,
          fmt("final error %.3f m, %d confirmed VTs, worst VT offset %.3f m, runtime %.1f s", error, confirmed,
              worst_vt, runtime)};
}

struct CalibratedRuns {
  std::vector<double> slam_final;
  std::vector<double> dr_final;
  double runtime_s = 0.0;
  // Kept from the first seed for the long-track criterion.
  FilterRun first_run;
  Simulation first_sim;
};

CalibratedRuns calibrated_runs() {
  CalibratedRuns out;
  RunConfig config = builtin_config("lund-like");
  config.filter->config.particles = kCalibratedParticles;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    Simulation sim = simulate(*config.scenario, seed);
    FilterRun run = run_filter(log_entries(sim), *config.filter, config.snapshot_interval_s, seed, max_threads());
    out.runtime_s += run.runtime_s;
    out.slam_final.push_back(final_error(sim.truth.poses, run.final_pose));
    out.dr_final.push_back(final_error(sim.truth.poses, sim.odometry.poses.back()));
    std::printf("  seed %2d: slam final %.2f m, dead reckoning final %.2f m, %.1f s\n", seed, out.slam_final.back(),
                out.dr_final.back(), run.runtime_s);
    std::fflush(stdout);
    if (seed == 1) {
      out.first_run = std::move(run);
      out.first_sim = std::move(sim);
    }
  }
  return out;
}

Outcome calibrated_statistics(const CalibratedRuns& runs) {
  int wins = 0;
  for (int i = 0; i < kSeeds; ++i) {
    wins += runs.slam_final[i] < runs.dr_final[i] ? 1 : 0;
  }
  const double slam = median(runs.slam_final);
  const double dr = median(runs.dr_final);
  const bool calibrated = dr >= kDrMedianLow && dr <= kDrMedianHigh;
  return {slam < kMedianSlamError && wins >= kSeedsSlamBeatsDr && calibrated && runs.runtime_s < kCalibratedBudgetS,
          fmt("median slam %.2f m, median dead reckoning %.2f m, slam better in %d/%d seeds, filter runtime %.0f s",
              slam, dr, wins, kSeeds, runs.runtime_s)};
}

Snapshot only_bs(const Snapshot& snapshot, int bs) {
  Snapshot out{snapshot.t, {}};
  for (const MeasurementGroup& g : snapshot.groups) {
    if (g.bs == bs) {
      out.groups.push_back(g);
    }
  }
  return out;
}

Outcome factorization() {
  Scenario s = vtslam::testing::two_station_scenario(300);
  s.measurement_noise = MeasurementNoiseModel::from_sigmas(1.0, 0.02, 0.02, 10.0);
  s.clutter_rate = 0.5;
  s.detection_probability = 0.85;
  s.ports_per_bs = 2;
  const Simulation sim = simulate(s, 3);
  FilterConfig joint = vtslam::testing::config_for(s, 1);
  FilterConfig only7 = joint;
  only7.base_station_ids = {7};
  FilterConfig only9 = joint;
  only9.base_station_ids = {9};
  ParticleFilter a(joint, sim.truth.poses[0]);
  ParticleFilter b(only7, sim.truth.poses[0]);
  ParticleFilter c(only9, sim.truth.poses[0]);
  std::size_t compared = 0;
  for (std::size_t t = 0; t < sim.snapshots.size(); ++t) {
    const double dt = t == 0 ? 0.0 : s.snapshot_interval_s;
    a.step(sim.truth.velocities[t], sim.snapshots[t], dt);
    b.step(sim.truth.velocities[t], only_bs(sim.snapshots[t], 7), dt);
    c.step(sim.truth.velocities[t], only_bs(sim.snapshots[t], 9), dt);
    const auto& joint_maps = a.particles()[0].maps;
    for (int port = 0; port < 2; ++port) {
      if (!(joint_maps[port] == b.particles()[0].maps[port]) ||
          !(joint_maps[2 + port] == c.particles()[0].maps[port])) {
        return {false, fmt("posteriors diverge at snapshot %zu", t)};
      }
      compared += joint_maps[port].vts.size() + joint_maps[2 + port].vts.size();
    }
  }
  return {compared > 0, fmt("%zu snapshots, %zu VT posteriors compared bit-exactly", sim.snapshots.size(), compared)};
}

double brute_force_min(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  std::vector<int> perm(std::max(rows, cols));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<int> row_to_col(rows, -1);
    if (rows <= cols) {
      for (int r = 0; r < rows; ++r) {
        row_to_col[r] = perm[r];
      }
    } else {
      for (int col = 0; col < cols; ++col) {
        row_to_col[perm[col]] = col;
      }
    }
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
      if (row_to_col[r] >= 0) {
        total += cost(r, row_to_col[r]);
      }
    }
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome association_oracle() {
  Rng rng(derive_seed(4, "acceptance.hungarian"));
  int mismatches = 0;
  for (int trial = 0; trial < kRandomMatrices; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(kMaxDimension));
    const int cols = 1 + static_cast<int>(rng.below(kMaxDimension));
    Eigen::MatrixXd cost(rows, cols);
    for (Eigen::Index i = 0; i < cost.size(); ++i) {
      cost(i) = rng.uniform(0.0, 30.0);
    }
    const Assignment a = hungarian(cost);
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
      if (a.row_to_col[r] >= 0) {
        total += cost(r, a.row_to_col[r]);
      }
    }
    mismatches += (a.cost == brute_force_min(cost) && total == a.cost) ? 0 : 1;
  }
  return {mismatches == 0, fmt("%d of %d matrices differ from brute force", mismatches, kRandomMatrices)};
}

Outcome jacobian_oracle() {
  Rng rng(derive_seed(5, "acceptance.jacobian"));
  constexpr long double step = 1e-5L;
  double worst = 0.0;
  for (int i = 0; i < kJacobianConfigs; ++i) {
    Pose pose;
    pose.position = {rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(0, 5)};
    pose.orientation = {rng.uniform(-3.1, 3.1), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    Point3 vt;
    do {
      vt = pose.position + Point3(rng.uniform(-300, 300), rng.uniform(-300, 300), rng.uniform(-30, 30));
    } while ((vt - pose.position).head<2>().norm() < 5.0);
    const Eigen::Matrix3d analytic = measurement_jacobian(vt, pose);
    const PoseT<long double> pose_ld = pose.cast<long double>();
    for (int c = 0; c < 3; ++c) {
      Vector3<long double> plus = vt.cast<long double>(), minus = vt.cast<long double>();
      plus(c) += step;
      minus(c) -= step;
      const MpcMeasurementT<long double> hp = predict_measurement(plus, pose_ld);
      const MpcMeasurementT<long double> hm = predict_measurement(minus, pose_ld);
      const Vector3<long double> diff = measurement_residual(hp, hm) / (2 * step);
      for (int r = 0; r < 3; ++r) {
        worst = std::max(worst, std::abs(static_cast<double>(diff(r)) - analytic(r, c)));
      }
    }
  }
  return {worst < kJacobianTolerance, fmt("max abs error %.3g over %d configurations", worst, kJacobianConfigs)};
}

Outcome ekf_contraction() {
  Rng rng(derive_seed(6, "acceptance.ekf"));
  MeasurementNoiseModel noise = MeasurementNoiseModel::from_sigmas(3.0, 0.035, 0.035, 10.0);
  int updates = 0, violations = 0;
  while (updates < kEkfUpdates) {
    Pose pose;
    pose.position = {rng.uniform(-50, 50), rng.uniform(-50, 50), 2.0};
    pose.orientation = {rng.uniform(-3.1, 3.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    VirtualTransmitter vt;
    vt.mean = pose.position + Point3(rng.uniform(-400, 400), rng.uniform(-400, 400), rng.uniform(-20, 40));
    if ((vt.mean - pose.position).head<2>().norm() < 5.0) {
      continue;
    }
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) {
      a(i) = rng.uniform(-1, 1);
    }
    vt.covariance = rng.uniform(0.01, 50.0) * (a * a.transpose() + 0.05 * Eigen::Matrix3d::Identity());
    const MpcMeasurement h = predict_measurement(vt.mean, pose);
    const MpcMeasurement z{h.range + rng.normal(0, 3), h.azimuth + rng.normal(0, 0.05),
                           h.elevation + rng.normal(0, 0.05)};
    const VirtualTransmitter out = ekf_update(vt, z, pose, measurement_covariance(noise, rng.uniform(0.5, 100.0)));
    const bool chol = Eigen::LLT<Eigen::Matrix3d>(out.covariance).info() == Eigen::Success;
    const bool contracts = out.covariance.trace() <= vt.covariance.trace();
    violations += (chol && contracts) ? 0 : 1;
    ++updates;
  }
  return {violations == 0, fmt("%d of %d updates grew trace or lost positive definiteness", violations, updates)};
}

Outcome resampling() {
  Rng rng(derive_seed(7, "acceptance.resampling"));
  constexpr int n = 16;
  std::vector<double> w(n), lw(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = rng.uniform(0.01, 1.0);
    total += w[i];
    lw[i] = std::log(w[i]);
  }
  std::vector<double> sum(n, 0.0), sum2(n, 0.0);
  for (int trial = 0; trial < kResampleTrials; ++trial) {
    std::vector<int> counts(n, 0);
    for (const std::size_t i : systematic_indices(lw, rng.uniform())) {
      ++counts[i];
    }
    for (int i = 0; i < n; ++i) {
      sum[i] += counts[i];
      sum2[i] += static_cast<double>(counts[i]) * counts[i];
    }
  }
  double worst_z = 0.0;
  int outside = 0;
  for (int i = 0; i < n; ++i) {
    const double mean = sum[i] / kResampleTrials;
    const double expected = n * w[i] / total;
    const double sd = std::sqrt(std::max(0.0, sum2[i] / kResampleTrials - mean * mean));
    const double se = sd / std::sqrt(static_cast<double>(kResampleTrials));
    const double deviation = std::abs(mean - expected);
    // A systematic count takes only floor/ceil of its expectation; zero spread means an exact mean.
    if (se > 0.0) {
      worst_z = std::max(worst_z, deviation / se);
    }
    outside += deviation > 3.0 * se + 1e-12 ? 1 : 0;
  }
  int uniform_failures = 0;
  for (const int size : {1, 7, 64, 512}) {
    const std::vector<double> flat(size, -3.0);
    for (int trial = 0; trial < 100; ++trial) {
      const auto idx = systematic_indices(flat, rng.uniform());
      for (int i = 0; i < size; ++i) {
        uniform_failures += idx[i] == static_cast<std::size_t>(i) ? 0 : 1;
      }
    }
  }
  return {outside == 0 && uniform_failures == 0,
          fmt("%d of %d particles outside 3 sigma (worst %.2f sigma), %d uniform-weight mismatches", outside, n,
              worst_z, uniform_failures)};
}

Outcome clock_offset() {
  Scenario s = builtin_config("lund-like-noiseless").scenario.value();
  const auto vts = derive_vts(s);
  const Pose pose = ground_truth(s).poses[500];
  Rng a(1), b(1);
  const Snapshot base = generate_snapshot(s, vts, pose, 0, a).first;
  s.base_stations[0].clock_offset_s = kClockOffsetS;
  const Snapshot shifted = generate_snapshot(s, vts, pose, 0, b).first;
  double worst = 0.0;
  int shifted_ranges = 0, untouched = 0;
  for (std::size_t g = 0; g < base.groups.size(); ++g) {
    for (std::size_t m = 0; m < base.groups[g].mpcs.size(); ++m) {
      const double shift = shifted.groups[g].mpcs[m].z.range - base.groups[g].mpcs[m].z.range;
      if (base.groups[g].bs == s.base_stations[0].id) {
        worst = std::max(worst, std::abs(shift - kClockShiftM));
        ++shifted_ranges;
      } else {
        untouched += shift == 0.0 ? 1 : 0;
        worst = std::max(worst, std::abs(shift));
      }
    }
  }
  return {shifted_ranges > 0 && worst <= kClockTolerance,
          fmt("%d ranges shifted, max deviation from 30 m %.3g m, %d other ranges unchanged", shifted_ranges, worst,
              untouched)};
}

Outcome determinism() {
  RunConfig config = builtin_config("lund-like");
  auto log_text = [&] {
    std::ostringstream out;
    write_measurement_log(out, log_entries(simulate(*config.scenario, 9)));
    return out.str();
  };
  const std::string first = log_text();
  const std::string second = log_text();
  std::istringstream in(first);
  std::vector<LogEntry> entries = read_measurement_log(in);
  entries.resize(std::min<std::size_t>(entries.size(), kDeterminismSnapshots));
  const unsigned many = std::max(4u, max_threads());
  auto estimate_text = [&](unsigned threads) {
    const FilterRun run = run_filter(entries, *config.filter, config.snapshot_interval_s, 9, threads);
    std::ostringstream out;
    write_csv(out, estimate_table(run.estimates));
    write_csv(out, associations_table(run.associations));
    return out.str();
  };
  const std::string single = estimate_text(1);
  const std::string parallel = estimate_text(many);
  return {first == second && single == parallel,
          fmt("logs %s (%zu bytes); estimates at 1 and %u threads %s over %zu snapshots",
              first == second ? "identical" : "differ", first.size(), many,
              single == parallel ? "identical" : "differ", entries.size())};
}

Outcome long_lived_track(const CalibratedRuns& runs, double interval_s) {
  struct Track {
    std::int64_t first = 0, last = 0;
    double min_range = std::numeric_limits<double>::infinity();
    double max_range = 0.0;
  };
  std::map<std::tuple<int, int, std::uint32_t>, Track> tracks;
  for (const AssociationRow& row : runs.first_run.associations) {
    auto [it, fresh] = tracks.try_emplace({row.record.bs, row.record.port, row.record.vt_id});
    Track& t = it->second;
    if (fresh) {
      t.first = row.t;
    }
    t.last = row.t;
    t.min_range = std::min(t.min_range, row.record.range_m);
    t.max_range = std::max(t.max_range, row.record.range_m);
  }
  // A track counts as a reflection when its final estimate lies nearest an image source.
  double best_duration = 0.0, best_span = 0.0;
  int qualifying = 0;
  for (const auto& [key, track] : tracks) {
    const auto [bs, port, id] = key;
    const double duration = static_cast<double>(track.last - track.first) * interval_s;
    const double span = track.max_range - track.min_range;
    const VirtualTransmitter* estimate = nullptr;
    for (const VtGroup& g : runs.first_run.maps) {
      if (g.bs == bs && g.port == port) {
        for (const VirtualTransmitter& vt : g.vts) {
          if (vt.id == id) {
            estimate = &vt;
          }
        }
      }
    }
    if (estimate == nullptr) {
      continue;
    }
    const TrueVt* nearest = nullptr;
    for (const TrueVtGroup& g : runs.first_sim.vts) {
      if (g.bs != bs || g.port != port) {
        continue;
      }
      for (const TrueVt& t : g.vts) {
        if (nearest == nullptr || (t.position - estimate->mean).norm() < (nearest->position - estimate->mean).norm()) {
          nearest = &t;
        }
      }
    }
    if (nearest == nullptr || nearest->is_los()) {
      continue;
    }
    if (duration > kTrackDurationS && span > best_span) {
      best_duration = duration;
      best_span = span;
    }
    qualifying += duration > kTrackDurationS && span >= kTrackRangeSpanM ? 1 : 0;
  }
  return {qualifying > 0, fmt("%d reflection tracks qualify; widest lasts %.0f s over a %.0f m range span",
                              qualifying, best_duration, best_span)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& outcome) {
    std::printf("criterion %2d %-28s %s  %s\n", id, name, outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& body) {
    try {
      return body();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "noiseless consistency", guarded(noiseless_consistency));
  CalibratedRuns runs;
  const Outcome shape = guarded([&] {
    runs = calibrated_runs();
    return calibrated_statistics(runs);
  });
  report(2, "calibrated-noise statistics", shape);
  report(3, "factorization oracle", guarded(factorization));
  report(4, "association oracle", guarded(association_oracle));
  report(5, "jacobian oracle", guarded(jacobian_oracle));
  report(6, "ekf contraction", guarded(ekf_contraction));
  report(7, "resampling unbiasedness", guarded(resampling));
  report(8, "clock-offset arithmetic", guarded(clock_offset));
  report(9, "determinism", guarded(determinism));
  report(10, "long-lived reflection track", guarded([&] {
           if (runs.first_run.associations.empty()) {
             return Outcome{false, "no calibrated run available"};
           }
           return long_lived_track(runs, builtin_config("lund-like").snapshot_interval_s);
         }));
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
