#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include "quditcal/agents.hpp"
#include "quditcal/environment.hpp"

namespace quditcal {

struct LearningCurve {
  std::vector<std::uint64_t> episode;
  std::vector<double> f_rl;
  std::vector<double> running_best;

  std::size_t size() const { return episode.size(); }
  void push(std::uint64_t index, double fidelity);
};

/// Everything outside the agent that a resumed run needs to continue bit-exactly.
struct TrainState {
  std::uint64_t episodes_done = 0;
  double running_best = -std::numeric_limits<double>::infinity();
  Rng exploration;

  explicit TrainState(std::uint64_t master_seed = 0);
};

struct TrainOptions {
  std::uint64_t total_steps = 0;
  std::uint64_t checkpoint_every = 10000;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  nlohmann::json checkpoint_meta = nlohmann::json::object();
  std::function<void(std::uint64_t episode, const EpisodeRecord&)> on_episode;
};

/// Runs total_steps one-step episodes.
///
/// Off-policy agents act uniformly at random until warmup_steps transitions are
/// stored, then take one gradient update per step. PPO updates whenever a full
/// rollout has been collected. A non-finite loss writes a diagnostic checkpoint
/// to checkpoint_dir/diagnostic (when a directory is set) and rethrows.
LearningCurve train(Agent& agent, CalibrationEnv& env, TrainState& state, const TrainOptions& options);

/// Agent state plus environment and loop state.
void save_training_checkpoint(const std::filesystem::path& dir, const Agent& agent, const CalibrationEnv& env,
                              const TrainState& state, const nlohmann::json& extra = nlohmann::json::object());

/// Restores `env` and `state` from a checkpoint written by save_training_checkpoint
/// and returns the agent.
std::unique_ptr<Agent> load_training_checkpoint(const std::filesystem::path& dir, CalibrationEnv& env,
                                                TrainState& state, CheckpointData* data_out = nullptr);

}  // namespace quditcal
