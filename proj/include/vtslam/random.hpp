#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vtslam {

/// Derives an independent stream seed from a master seed and a label.
///
/// The label is hashed with 64-bit FNV-1a, combined with the master seed and
/// the index, and the result is passed through the splitmix64 finalizer:
///   seed = splitmix64(splitmix64(master ^ fnv1a(label)) + index)
/// Every seeded component in the library draws from a stream derived this way,
/// so results only depend on the master seed given on the command line.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

/// Random stream with platform-independent uniform, Gaussian and Poisson draws.
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard.
/// The distribution transforms are implemented here rather than taken from
/// <random> because the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform on [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson variate (Knuth's multiplication method, fine for small rates).
  int poisson(double rate);

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

}  // namespace vtslam
