#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "quditcal/dynamics.hpp"
#include "quditcal/ensemble.hpp"
#include "quditcal/grape.hpp"
#include "quditcal/rng.hpp"

namespace quditcal {

/// N x K cosine basis, C_jk = cos(pi k (j + 1/2) / N) for k = 1..K with unit-norm columns.
struct CosineBasis {
  int n = 0;
  int k = 0;
  RealMatrix matrix;
};

CosineBasis cosine_basis(int n, int k);

struct Residual {
  ChannelArray channels;
  std::size_t clamped = 0;  // action components that had to be clamped into [-1, 1]
};

/// Channel i residual = C (alpha a_i); a_1 is the first K components, a_2 the last K.
Residual residual_from_action(std::span<const double> action, const CosineBasis& basis, double alpha);

/// Elementwise baseline + residual, clipped to [-bound, bound].
PulseSet compose_pulse(const PulseSet& baseline, const ChannelArray& residual, double bound);

enum class EnvMode { kResidual, kDirect };

struct EnvConfig {
  int modes = 20;
  double alpha = 0.03;
  double obs_clip = 3.0;
  NoiseConfig noise;
  double est_eta_omega = 0.0;
  double est_eta_g = 0.0;
  PulseSet baseline;
  DeviceParams nominal;
  ComplexMatrix target;
  EnvMode mode = EnvMode::kResidual;

  int action_dim() const;
  void validate() const;
};

struct Observation {
  std::array<double, 3> o{};
};

/// Normalized offsets plus fresh estimation noise drawn from `estimation_rng`,
/// clipped to +-obs_clip. The estimation draws happen even when eta = 0 so the
/// stream position does not depend on the noise level.
Observation make_observation(const DeviceOffsets& offsets, const EnvConfig& config, Rng& estimation_rng);

struct EpisodeRecord {
  DeviceOffsets offsets;
  Observation observation;
  std::vector<double> action;
  double f_oct = 0.0;
  double f_rl = 0.0;
  double reward = 0.0;
};

using ActionProvider = std::function<std::vector<double>(const Observation&)>;

/// Average gate fidelity of `pulse` on the device `offsets` away from nominal.
double device_fidelity(const PulseSet& pulse, const EnvConfig& config, const DeviceOffsets& offsets);

/// Pulse actually played for `action`: baseline + decoded residual (residual
/// mode) or amp_bound * action (direct mode).
PulseSet decode_action(std::span<const double> action, const EnvConfig& config, const CosineBasis& basis,
                       std::size_t* clamped = nullptr);

/// One residual-mode bandit episode on a freshly sampled device.
EpisodeRecord env_episode(const ActionProvider& provider, const EnvConfig& config, const CosineBasis& basis,
                          Rng& device_rng, Rng& estimation_rng, std::size_t* clamped = nullptr);

/// Residual-mode episode on a given device (evaluation path).
EpisodeRecord env_episode_on(const DeviceOffsets& offsets, const ActionProvider& provider,
                             const EnvConfig& config, const CosineBasis& basis, Rng& estimation_rng,
                             std::size_t* clamped = nullptr);

/// One direct-mode episode: the action is the whole pulse, scored on the nominal device.
EpisodeRecord direct_env_episode(const ActionProvider& provider, const EnvConfig& config,
                                 std::size_t* clamped = nullptr);

/// Stateful wrapper holding the basis and the per-run random streams.
class CalibrationEnv {
 public:
  CalibrationEnv(EnvConfig config, std::uint64_t master_seed, std::uint64_t salt = 0);

  EpisodeRecord step(const ActionProvider& provider);

  const EnvConfig& config() const { return config_; }
  const CosineBasis& basis() const { return basis_; }
  int action_dim() const { return config_.action_dim(); }
  std::size_t clamp_count() const { return clamped_; }

  // Generator states (devices, estimation) and clamp counter, for exact resume.
  struct State {
    std::string device_rng;
    std::string estimation_rng;
    std::size_t clamped = 0;
  };
  State state() const { return {device_rng_.state(), estimation_rng_.state(), clamped_}; }
  void set_state(const State& s);

 private:
  EnvConfig config_;
  CosineBasis basis_;
  Rng device_rng_;
  Rng estimation_rng_;
  std::size_t clamped_ = 0;
};

}  // namespace quditcal
