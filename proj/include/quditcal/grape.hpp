#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "quditcal/dynamics.hpp"

namespace quditcal {

struct GrapeConfig {
  int n_slices = 160;
  double total_time = 1600.0;
  double amp_bound = 0.3;
  double target_infidelity = 1e-10;
  int max_iterations = 5000;
  std::uint64_t seed = 0;
  double init_amplitude = 0.1;
  int lbfgs_memory = 10;

  double dt() const { return total_time / n_slices; }
  void validate() const;
};

struct GrapeResult {
  PulseSet pulse;
  // One entry per iteration; entry 0 is the initial guess.
  std::vector<double> infidelity_history;
  double final_infidelity = 1.0;
  bool converged = false;
  int iterations_used = 0;
  std::string stop_reason;
};

using ChannelArray = std::array<std::vector<double>, 2>;

struct FidelityGradient {
  double fidelity = 0.0;
  ChannelArray gradient;  // dF / d epsilon_i^(j)
};

/// Seeded uniform amplitudes in [-init_amplitude, init_amplitude].
PulseSet init_pulse(const GrapeConfig& config);

/// Exact fidelity gradient.
///
/// Each slice propagator derivative is taken in the eigenbasis of the slice
/// generator (Loewner divided differences of exp(-i lambda dt)), so the result
/// is exact for any dt rather than the first-order -i dt H_c approximation.
/// Derivatives are chained with stored forward products and a running
/// backward product.
FidelityGradient fidelity_gradient(const PulseSet& pulse, const DeviceParams& params,
                                   const ComplexMatrix& target);

ChannelArray grape_gradient(const PulseSet& pulse, const DeviceParams& params,
                            const ComplexMatrix& target);

/// Projected L-BFGS ascent of the average gate fidelity within the amplitude box.
GrapeResult grape_optimize(const GrapeConfig& config, const DeviceParams& params,
                           const ComplexMatrix& target);

/// Runs seeds config.seed, config.seed + 1, ... and keeps the lowest final
/// infidelity. Stops at the first converged run.
GrapeResult grape_optimize_best(const GrapeConfig& config, const DeviceParams& params,
                                const ComplexMatrix& target, int restarts);

struct SpeedLimit {
  double t0 = 0.0;
  double tmin = 0.0;
};

/// T0 = pi / (4 g) for the two-level truncation; the qutrit estimate is 2 T0.
SpeedLimit min_time_estimate(double g);

}  // namespace quditcal
