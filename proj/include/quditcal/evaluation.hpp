#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quditcal/environment.hpp"

namespace quditcal {

/// Per-device fidelities with their population mean and standard deviation.
struct EnsembleStats {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<DeviceOffsets> devices;
  std::vector<double> fidelities;
  double mean = 0.0;
  double std = 0.0;

  int m() const { return static_cast<int>(fidelities.size()); }
};

/// Fills mean and population std from `fidelities`.
EnsembleStats make_stats(std::string method, std::uint64_t seed, std::vector<DeviceOffsets> devices,
                         std::vector<double> fidelities);

enum class SweepAxis { kOmega, kG };
SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

struct SweepResult {
  SweepAxis axis = SweepAxis::kOmega;
  std::vector<double> levels;             // eta / sigma on the chosen axis, strictly increasing
  std::vector<EnsembleStats> per_level;  // one entry per level
};

/// Action that leaves the baseline pulse untouched (the OCT method).
ActionProvider zero_policy(int action_dim);

/// Fidelity of the pulse chosen for zero offsets. Residual mode composes with the
/// baseline; direct mode plays amp_bound * action.
double eval_nominal(const ActionProvider& policy, const EnvConfig& config);

/// Fidelity on one fixed device. Estimation noise (if configured) comes from the
/// held-out estimation stream of `seed`.
double eval_single(const ActionProvider& policy, const EnvConfig& config,
                   const DeviceOffsets& offsets = fixed_single_device(), std::uint64_t seed = 0);

/// M devices drawn from the held-out evaluation stream of `seed`. The same seed
/// gives the same devices and the same standard-normal estimation draws for any
/// estimation noise level. `threads` > 1 splits devices across workers; results
/// are assembled in device order.
EnsembleStats eval_ensemble(const std::string& method, const ActionProvider& policy, const EnvConfig& config,
                            int m, std::uint64_t seed, int threads = 1);

/// Throws ConfigError unless levels is non-empty, finite, >= 0 and strictly increasing.
void validate_sweep_levels(const std::vector<double>& levels);

/// Evaluates the ensemble at each eta / sigma level on one axis; the other axis is set to 0.
SweepResult obs_noise_sweep(const std::string& method, const ActionProvider& policy, const EnvConfig& config,
                            const std::vector<double>& levels, SweepAxis axis, int m, std::uint64_t seed,
                            int threads = 1);

struct PulseOverlay {
  int channel = 1;
  std::vector<double> time;      // slice midpoints (j + 1/2) dt
  std::vector<double> baseline;
  std::vector<std::pair<std::string, std::vector<double>>> methods;
};

PulseOverlay pulse_overlay_export(const PulseSet& baseline,
                                  const std::vector<std::pair<std::string, PulseSet>>& corrected, int channel);

}  // namespace quditcal
