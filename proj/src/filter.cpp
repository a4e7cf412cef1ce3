#include "vtslam/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vtslam {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-thread scratch space reused across particle updates.
struct GroupScratch {
  std::vector<Prediction> predictions;
  std::vector<Eigen::Matrix3d> jacobians;
  std::vector<Observation> observations;
  std::vector<int> observation_source;
  std::vector<InnovationTerms> terms;
  std::vector<char> keep;
};

double max_finite(std::span<const double> values) {
  double best = kNegInf;
  for (const double v : values) {
    if (std::isfinite(v) && v > best) {
      best = v;
    }
  }
  if (!std::isfinite(best)) {
    throw AllWeightsDegenerate("no particle has a finite weight");
  }
  return best;
}

// exp(lw - max), zero for -inf entries.
std::vector<double> relative_weights(std::span<const double> log_weights) {
  const double top = max_finite(log_weights);
  std::vector<double> weights(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    weights[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - top) : 0.0;
  }
  return weights;
}

std::vector<double> log_weights_of(std::span<const Particle> particles) {
  std::vector<double> out(particles.size());
  std::transform(particles.begin(), particles.end(), out.begin(), [](const Particle& p) { return p.log_weight; });
  return out;
}

void apply_lifecycle(VtGroup& map, const LifecyclePolicy& policy) {
  auto& vts = map.vts;
  std::erase_if(vts, [&](VirtualTransmitter& vt) {
    switch (prune_or_confirm(vt, policy)) {
      case Lifecycle::promote:
        vt.status = VtStatus::confirmed;
        return false;
      case Lifecycle::drop:
        return true;
      case Lifecycle::keep:
        break;
    }
    return false;
  });
}

}  // namespace

void FilterConfig::validate() const {
  if (particles < 1) {
    throw ConfigError("particle count must be at least 1");
  }
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
    throw ConfigError("resample threshold must lie in (0, 1]");
  }
  if (!(bias_sigma_m >= 0.0)) {
    throw ConfigError("bias prior sigma must be non-negative");
  }
  if (!(gate > 0.0)) {
    throw ConfigError("association gate must be positive");
  }
  if (base_station_ids.empty() || ports_per_bs < 1) {
    throw ConfigError("the (base station, port) grid is empty");
  }
  if ((motion_noise.linear.array() < 0.0).any() || (motion_noise.angular.array() < 0.0).any()) {
    throw ConfigError("motion noise must be non-negative");
  }
  if (!(measurement_noise.snr_ref > 0.0) || !(measurement_noise.base.diagonal().array() > 0.0).all()) {
    throw ConfigError("measurement noise must be positive");
  }
}

std::vector<Pose> Particle::trajectory_poses() const {
  std::vector<Pose> poses;
  for (const TrajectoryNode* node = trajectory.get(); node != nullptr; node = node->previous.get()) {
    poses.push_back(node->pose);
  }
  std::reverse(poses.begin(), poses.end());
  return poses;
}

int group_index(const FilterConfig& config, int bs, int port) {
  const auto it = std::find(config.base_station_ids.begin(), config.base_station_ids.end(), bs);
  if (it == config.base_station_ids.end() || port < 0 || port >= config.ports_per_bs) {
    return -1;
  }
  return static_cast<int>(it - config.base_station_ids.begin()) * config.ports_per_bs + port;
}

bool update_particle(Particle& particle, const VelocityInput& u, double dt, const Snapshot& snapshot,
                     const FilterConfig& config, Rng& rng, std::vector<AssociationRecord>* associations) {
  thread_local GroupScratch scratch;
  try {
    if (dt > 0.0) {
      particle.pose = sample_motion(particle.pose, u, dt, config.motion_noise, rng);
    }
    if (config.keep_trajectory) {
      particle.trajectory = std::make_shared<const TrajectoryNode>(
          TrajectoryNode{snapshot.t, particle.pose, std::move(particle.trajectory)});
    }
    const Eigen::Matrix3d rotation = rotation_matrix(particle.pose);
    double increment = 0.0;
    for (const MeasurementGroup& group : snapshot.groups) {
      if (group.mpcs.empty()) {
        continue;
      }
      const int index = group_index(config, group.bs, group.port);
      if (index < 0) {
        throw Error("snapshot group outside the configured grid");
      }
      VtGroup& map = particle.maps[index];
      const double bias = particle.bias[index / config.ports_per_bs];

      scratch.observations.clear();
      scratch.observation_source.clear();
      for (std::size_t m = 0; m < group.mpcs.size(); ++m) {
        MpcMeasurement z = group.mpcs[m].z;
        z.range -= bias;
        if (!(z.range > kRangeEpsilon)) {
          continue;
        }
        scratch.observations.push_back({z, measurement_covariance(config.measurement_noise, group.mpcs[m].snr)});
        scratch.observation_source.push_back(static_cast<int>(m));
      }

      scratch.predictions.clear();
      scratch.jacobians.clear();
      for (const VirtualTransmitter& vt : map.vts) {
        const Eigen::Matrix3d h = measurement_jacobian(vt.mean, particle.pose, rotation);
        scratch.jacobians.push_back(h);
        scratch.predictions.push_back(
            {predict_measurement(vt.mean, particle.pose, rotation), h * vt.covariance * h.transpose()});
      }

      const AssignmentResult result =
          associate(scratch.predictions, scratch.observations, config.gate, &scratch.terms);
      const std::size_t cols = scratch.observations.size();

      for (const auto& [l, m] : result.pairs) {
        const InnovationTerms& terms = scratch.terms[l * cols + m];
        increment += terms.log_likelihood;
        VirtualTransmitter& vt = map.vts[l];
        if (associations != nullptr) {
          associations->push_back({group.bs, group.port, vt.id, scratch.observation_source[m],
                                   scratch.observations[m].z.range, terms.mahalanobis2, terms.log_likelihood});
        }
        vt = ekf_update(vt, scratch.observations[m].z, scratch.predictions[l].z, scratch.jacobians[l],
                        scratch.observations[m].cov);
      }
      for (const int l : result.unmatched_vts) {
        map.vts[l] = miss(map.vts[l]);
      }
      for (const int m : result.unmatched_measurements) {
        try {
          map.vts.push_back(init_vt(scratch.observations[m].z, scratch.observations[m].cov, particle.pose, group.port,
                                    group.bs, map.next_id));
          ++map.next_id;
        } catch (const DegenerateGeometry&) {
          // Zenith or zero-range component: treated as clutter.
        }
      }
      apply_lifecycle(map, config.lifecycle);
    }
    particle.log_weight += increment;
    return std::isfinite(particle.log_weight);
  } catch (const std::exception&) {
    particle.log_weight = kNegInf;
    return false;
  }
}

double effective_sample_size(std::span<const double> log_weights) {
  const std::vector<double> weights = relative_weights(log_weights);
  double sum = 0.0, sum2 = 0.0;
  for (const double w : weights) {
    sum += w;
    sum2 += w * w;
  }
  return sum * sum / sum2;
}

std::vector<std::size_t> systematic_indices(std::span<const double> log_weights, double u) {
  std::vector<double> weights = relative_weights(log_weights);
  const std::size_t n = weights.size();
  double total = 0.0;
  for (const double w : weights) {
    total += w;
  }
  // Weights scaled to sum to n, so pointer i + u walks unit strata.
  const double scale = static_cast<double>(n) / total;
  std::vector<std::size_t> indices(n);
  std::size_t source = 0;
  double cumulative = weights[0] * scale;
  for (std::size_t i = 0; i < n; ++i) {
    const double pointer = static_cast<double>(i) + u;
    while (pointer >= cumulative && source + 1 < n) {
      ++source;
      cumulative += weights[source] * scale;
    }
    indices[i] = source;
  }
  return indices;
}

std::vector<Particle> resample(std::span<const Particle> particles, Rng& rng) {
  const std::vector<double> log_weights = log_weights_of(particles);
  const std::vector<std::size_t> indices = systematic_indices(log_weights, rng.uniform());
  std::vector<Particle> offspring;
  offspring.reserve(indices.size());
  for (const std::size_t i : indices) {
    offspring.push_back(particles[i]);
    offspring.back().log_weight = 0.0;
  }
  return offspring;
}

Pose estimate_pose(std::span<const Particle> particles, std::size_t* best_particle) {
  const std::vector<double> log_weights = log_weights_of(particles);
  const std::vector<double> weights = relative_weights(log_weights);
  double total = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    if (weights[i] > weights[best]) {
      best = i;
    }
  }
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d sines = Eigen::Vector3d::Zero();
  Eigen::Vector3d cosines = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const double w = weights[i] / total;
    if (w == 0.0) {
      continue;
    }
    position += w * particles[i].pose.position;
    sines += w * particles[i].pose.orientation.array().sin().matrix();
    cosines += w * particles[i].pose.orientation.array().cos().matrix();
  }
  Pose pose;
  // A single contributing particle is returned exactly.
  if (weights[best] == total) {
    pose = particles[best].pose;
  } else {
    pose.position = position;
    for (int a = 0; a < 3; ++a) {
      pose.orientation(a) = std::atan2(sines(a), cosines(a));
    }
  }
  if (best_particle != nullptr) {
    *best_particle = best;
  }
  return pose;
}

Estimate estimate(std::span<const Particle> particles) {
  Estimate result;
  result.pose = estimate_pose(particles, &result.best_particle);
  result.maps = particles[result.best_particle].maps;
  return result;
}

std::vector<Particle> init_particles(const FilterConfig& config, const Pose& initial_pose, std::vector<Rng>& streams) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.particles);
  streams.clear();
  std::vector<Particle> particles(n);
  for (std::size_t i = 0; i < n; ++i) {
    streams.emplace_back(derive_seed(config.seed, "filter.particle", i));
    Particle& particle = particles[i];
    particle.pose = initial_pose;
    for (const int bs : config.base_station_ids) {
      for (int port = 0; port < config.ports_per_bs; ++port) {
        particle.maps.push_back({bs, port, 0, {}});
      }
      particle.bias.push_back(config.bias_sigma_m * streams[i].normal());
    }
  }
  return particles;
}

ParticleFilter::ParticleFilter(FilterConfig config, const Pose& initial_pose, unsigned threads)
    : config_(std::move(config)),
      resample_rng_(derive_seed(config_.seed, "filter.resample")),
      pool_(threads) {
  particles_ = init_particles(config_, initial_pose, streams_);
  scratch_.resize(particles_.size());
  ok_.resize(particles_.size());
}

StepReport ParticleFilter::step(const VelocityInput& u, const Snapshot& snapshot, double dt, bool with_maps) {
  for (const MeasurementGroup& group : snapshot.groups) {
    if (group_index(config_, group.bs, group.port) < 0) {
      throw IoError("snapshot " + std::to_string(snapshot.t) + " has group (bs " + std::to_string(group.bs) +
                    ", port " + std::to_string(group.port) + ") outside the configured grid");
    }
    for (const MpcObservation& mpc : group.mpcs) {
      if (!(mpc.snr > 0.0)) {
        throw IoError("snapshot " + std::to_string(snapshot.t) + " has a non-positive SNR");
      }
    }
  }

  pool_.parallel_for(particles_.size(), [&](std::size_t i) {
    scratch_[i].clear();
    ok_[i] = update_particle(particles_[i], u, dt, snapshot, config_, streams_[i], &scratch_[i]) ? 1 : 0;
  });

  StepReport report;
  report.failed_particles = static_cast<int>(std::count(ok_.begin(), ok_.end(), 0));
  std::vector<double> log_weights = log_weights_of(particles_);
  const double top = max_finite(log_weights);
  for (Particle& particle : particles_) {
    particle.log_weight -= top;
  }
  log_weights = log_weights_of(particles_);
  report.ess = effective_sample_size(log_weights);
  report.estimate = estimate_pose(particles_, &report.best_particle);
  report.associations = scratch_[report.best_particle];
  if (with_maps) {
    report.maps = particles_[report.best_particle].maps;
  }
  if (report.ess < config_.resample_threshold * static_cast<double>(particles_.size())) {
    particles_ = resample(particles_, resample_rng_);
    report.resampled = true;
  }
  return report;
}

}  // namespace vtslam
