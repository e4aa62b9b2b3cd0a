#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace quditcal {

// Independent random streams derived from one master seed. The numeric
// values are part of the artifact format: changing them changes every CSV.
enum class Stream : std::uint64_t {
  kDevices = 1,
  kPulseInit = 2,
  kAgentInit = 3,
  kExploration = 4,
  kEstimation = 5,
  kEvalDevices = 6,
  kEvalEstimation = 7,
  kReplay = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed of a named stream. `salt` separates repeated uses of one stream kind
// (e.g. resumed training segments).
std::uint64_t stream_seed(std::uint64_t master, Stream stream, std::uint64_t salt = 0);

/// Platform-independent generator.
///
/// std::mt19937_64 is bit-specified by the standard, but the std::*_distribution
/// adaptors are not, so uniform and Gaussian variates are produced here:
/// 53-bit uniforms and the polar-free Box-Muller transform with a cached
/// second variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  // Full generator state (engine plus cached Gaussian) as text, for checkpoints.
  std::string state() const;
  void set_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace quditcal
