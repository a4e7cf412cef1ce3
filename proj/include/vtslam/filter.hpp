#pragma once

// Rao-Blackwellized particle filter over the vehicle path. Every particle
// carries one independent landmark map per (base station, port) group, so the
// transmitters of different groups are never associated with each other.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "vtslam/association.hpp"
#include "vtslam/motion.hpp"
#include "vtslam/parallel.hpp"
#include "vtslam/random.hpp"
#include "vtslam/vt_map.hpp"

namespace vtslam {

/// One extracted multipath component and its linear SNR.
struct MpcObservation {
  MpcMeasurement z;
  double snr = 1.0;

  bool operator==(const MpcObservation&) const = default;
};

/// All components received from port `port` of base station `bs` in one snapshot.
struct MeasurementGroup {
  int bs = 0;
  int port = 0;
  std::vector<MpcObservation> mpcs;

  bool operator==(const MeasurementGroup&) const = default;
};

struct Snapshot {
  std::int64_t t = 0;
  std::vector<MeasurementGroup> groups;

  bool operator==(const Snapshot&) const = default;
};

struct FilterConfig {
  int particles = 512;
  MotionNoise motion_noise;
  MeasurementNoiseModel measurement_noise;
  double gate = kDefaultGate;
  /// Resample when ESS < resample_threshold * particles.
  double resample_threshold = 0.5;
  /// Prior standard deviation of the per-BS range bias c * t_offset, meters.
  double bias_sigma_m = 0.0;
  std::uint64_t seed = 0;
  /// Configured (K, J) grid: base station ids and the number of ports of each.
  std::vector<int> base_station_ids;
  int ports_per_bs = 1;
  LifecyclePolicy lifecycle;
  bool keep_trajectory = false;

  /// Throws ConfigError on violated invariants.
  void validate() const;

  bool operator==(const FilterConfig&) const = default;
};

/// Transmitter map of one (base station, port) group.
struct VtGroup {
  int bs = 0;
  int port = 0;
  std::uint32_t next_id = 0;
  std::vector<VirtualTransmitter> vts;

  bool operator==(const VtGroup&) const = default;
};

/// Immutable linked list of past poses, shared between resampled offspring.
struct TrajectoryNode {
  std::int64_t t = 0;
  Pose pose;
  std::shared_ptr<const TrajectoryNode> previous;
};

struct Particle {
  Pose pose;
  std::shared_ptr<const TrajectoryNode> trajectory;
  /// One entry per configured group, ordered by (base station index, port).
  std::vector<VtGroup> maps;
  /// Range bias per configured base station, meters.
  std::vector<double> bias;
  double log_weight = 0.0;

  /// Poses from the first retained snapshot to the current one (empty when not retained).
  std::vector<Pose> trajectory_poses() const;
};

/// One accepted measurement-to-transmitter pairing.
struct AssociationRecord {
  int bs = 0;
  int port = 0;
  std::uint32_t vt_id = 0;
  int measurement_index = 0;
  /// Bias-corrected measured range, meters.
  double range_m = 0.0;
  double mahalanobis2 = 0.0;
  double log_likelihood = 0.0;
};

/// Updates one particle with a snapshot: proposal, association, map update and
/// log-weight increment. Returns false (weight set to -inf) on numerical failure.
/// `dt <= 0` skips the motion proposal.
bool update_particle(Particle& particle, const VelocityInput& u, double dt, const Snapshot& snapshot,
                     const FilterConfig& config, Rng& rng, std::vector<AssociationRecord>* associations = nullptr);

/// 1 / sum(w_i^2) over normalized weights. Throws AllWeightsDegenerate when no weight is finite.
double effective_sample_size(std::span<const double> log_weights);

/// Systematic resampling indices for pointer offset `u` in [0, 1).
std::vector<std::size_t> systematic_indices(std::span<const double> log_weights, double u);

/// Low-variance resampling with a single uniform draw; offspring weights reset to uniform.
std::vector<Particle> resample(std::span<const Particle> particles, Rng& rng);

struct Estimate {
  Pose pose;
  std::size_t best_particle = 0;
  std::vector<VtGroup> maps;
};

/// Weighted mean position, circular mean orientation, map of the heaviest particle.
Estimate estimate(std::span<const Particle> particles);

/// Same as estimate() without copying the map.
Pose estimate_pose(std::span<const Particle> particles, std::size_t* best_particle = nullptr);

/// Index of a (base station, port) group in Particle::maps, or -1.
int group_index(const FilterConfig& config, int bs, int port);

/// Diagnostics of one filter step.
struct StepReport {
  Pose estimate;
  /// ESS of the weights before any resampling.
  double ess = 0.0;
  bool resampled = false;
  std::size_t best_particle = 0;
  int failed_particles = 0;
  /// Associations made by the heaviest particle in this step.
  std::vector<AssociationRecord> associations;
  /// Maps of the heaviest particle before resampling; filled only on request.
  std::vector<VtGroup> maps;
};

/// Particle set plus its random streams. Stream i belongs to particle slot i
/// and is derived from (seed, i), so results do not depend on `threads`.
class ParticleFilter {
 public:
  ParticleFilter(FilterConfig config, const Pose& initial_pose, unsigned threads = 1);

  StepReport step(const VelocityInput& u, const Snapshot& snapshot, double dt, bool with_maps = false);

  const FilterConfig& config() const { return config_; }
  const std::vector<Particle>& particles() const { return particles_; }
  std::vector<Particle>& mutable_particles() { return particles_; }

 private:
  FilterConfig config_;
  std::vector<Particle> particles_;
  std::vector<Rng> streams_;
  Rng resample_rng_;
  WorkerPool pool_;
  std::vector<std::vector<AssociationRecord>> scratch_;
  std::vector<char> ok_;
};

/// N particles at the initial pose with empty maps and biases drawn from N(0, bias_sigma_m^2).
std::vector<Particle> init_particles(const FilterConfig& config, const Pose& initial_pose, std::vector<Rng>& streams);

}  // namespace vtslam
