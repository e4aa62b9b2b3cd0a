#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "quditcal/agents.hpp"
#include "quditcal/dynamics.hpp"
#include "quditcal/ensemble.hpp"
#include "quditcal/grape.hpp"

namespace quditcal {

/// Everything a pipeline run needs, parsed from one JSON document.
/// Omitted fields keep their defaults; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  Gate gate = Gate::kCz3;
  DeviceParams device;
  GrapeConfig grape;
  int grape_restarts = 3;
  NoiseConfig noise;

  // environment
  int modes = 20;
  double alpha = 0.03;
  double obs_clip = 3.0;
  double est_eta_omega = 0.0;  // absolute estimation noise std
  double est_eta_g = 0.0;

  std::map<std::string, AgentConfig> agents;  // keyed by algorithm name, always all four

  std::uint64_t train_steps = 100000;
  std::uint64_t checkpoint_every = 10000;

  int eval_m = 100;
  std::uint64_t eval_seed = 1000;  // held-out evaluation master seed
  std::vector<double> sweep_levels = {1e-4, 1e-3, 1e-2, 1e-1};
  int overlay_channel = 1;

  int noise_count = 100000;
  int noise_bins = 100;

  std::string output_dir = "runs/default";
  int threads = 1;

  RunConfig();
  void validate() const;
  /// Propagates the master seed into the per-module configs.
  void apply_seed(std::uint64_t master);
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

DeviceParams device_params_from_json(const nlohmann::json& j, DeviceParams defaults = {});
nlohmann::json device_params_to_json(const DeviceParams& p);

}  // namespace quditcal
