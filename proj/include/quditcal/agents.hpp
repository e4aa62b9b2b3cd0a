#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "quditcal/checkpoint.hpp"
#include "quditcal/environment.hpp"
#include "quditcal/nn.hpp"
#include "quditcal/replay_buffer.hpp"
#include "quditcal/rng.hpp"

namespace quditcal {

enum class Algorithm { kSac, kTd3, kDdpg, kPpo };

Algorithm parse_algorithm(const std::string& name);
std::string algorithm_name(Algorithm algorithm);
bool is_off_policy(Algorithm algorithm);

struct AgentConfig {
  Algorithm algorithm = Algorithm::kTd3;
  int obs_dim = 3;
  int action_dim = 40;
  std::vector<int> hidden = {256, 256};
  double lr = 3e-4;
  // Kept for completeness: every episode is terminal, so gamma never enters a target.
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  int buffer_capacity = 100000;
  int warmup_steps = 1000;
  double exploration_sigma = 0.1;  // TD3 / DDPG
  int policy_delay = 2;            // TD3
  // Rewards are O(1e-2); a unit temperature would drown them for most of a 2e4-step run.
  double sac_init_alpha = 1e-3;
  bool sac_auto_entropy = true;    // target entropy = -action_dim
  int ppo_rollout = 1024;
  int ppo_epochs = 10;
  int ppo_minibatch = 256;
  double ppo_clip = 0.2;
  double ppo_value_coef = 0.5;
  double ppo_init_log_std = -1.0;
  // Zero actor output layer so an untrained agent emits the zero correction.
  bool zero_init_actor = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct UpdateStats {
  bool performed = false;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;  // SAC temperature
};

/// Inference-only deterministic policy.
class Policy {
 public:
  Policy() = default;
  Policy(Algorithm algorithm, nn::Mlp actor, int action_dim);

  Algorithm algorithm() const { return algorithm_; }
  int action_dim() const { return action_dim_; }
  const nn::Mlp& actor() const { return actor_; }
  std::vector<double> act(const Observation& obs) const;

 private:
  Algorithm algorithm_ = Algorithm::kTd3;
  nn::Mlp actor_;
  int action_dim_ = 0;
};

class Agent {
 public:
  explicit Agent(AgentConfig config) : config_(std::move(config)) {}
  virtual ~Agent() = default;

  const AgentConfig& config() const { return config_; }
  Algorithm algorithm() const { return config_.algorithm; }

  /// Action in [-1, 1]^action_dim. Exploration draws come from `rng`.
  virtual std::vector<double> act(const Observation& obs, bool deterministic, Rng& rng) = 0;

  /// Stores the outcome of the most recent act() call.
  virtual void record(const Observation& obs, const std::vector<double>& action, double reward) = 0;

  /// One gradient update (off-policy) or a full set of PPO epochs over the
  /// current rollout. Returns performed = false and counts a skip when there
  /// is not enough data yet.
  virtual UpdateStats update() = 0;

  virtual bool ready_to_update() const = 0;

  virtual Policy export_policy() const = 0;

  /// Critic outputs for one (observation, action) pair: Q per critic for the
  /// off-policy agents, V(o) for PPO.
  virtual std::vector<double> critic_outputs(const Observation& obs, const std::vector<double>& action) const = 0;

  std::uint64_t updates_done() const { return updates_; }
  std::uint64_t skipped_updates() const { return skipped_; }

  /// Full training state (networks, optimizer moments, buffers, generators).
  virtual void save_state(CheckpointData& data) const;
  virtual void load_state(const CheckpointData& data);

 protected:
  AgentConfig config_;
  std::uint64_t updates_ = 0;
  std::uint64_t skipped_ = 0;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& config);

/// Writes a checkpoint directory with the agent state and a metadata block.
void save_agent(const std::filesystem::path& dir, const Agent& agent, const nlohmann::json& extra = {});
/// Rebuilds a full agent (for resumed training) from a checkpoint directory.
std::unique_ptr<Agent> load_agent(const std::filesystem::path& dir, CheckpointData* data_out = nullptr);

/// policy_export / policy_import: inference-only actor.
Policy policy_import(const std::filesystem::path& dir);
Policy policy_import(const CheckpointData& data);

nlohmann::json agent_config_to_json(const AgentConfig& config);
AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig defaults = {});

}  // namespace quditcal
