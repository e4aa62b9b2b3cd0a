#include "quditcal/training.hpp"

#include <algorithm>
#include <cmath>

namespace quditcal {

void LearningCurve::push(std::uint64_t index, double fidelity) {
  const double best = running_best.empty() ? fidelity : std::max(running_best.back(), fidelity);
  episode.push_back(index);
  f_rl.push_back(fidelity);
  running_best.push_back(best);
}

TrainState::TrainState(std::uint64_t master_seed) : exploration(stream_seed(master_seed, Stream::kExploration)) {}

namespace {

void fill_checkpoint(CheckpointData& data, const Agent& agent, const CalibrationEnv& env, const TrainState& state,
                     const nlohmann::json& extra) {
  agent.save_state(data);
  const auto env_state = env.state();
  data.meta["training"] = {
      {"episodes_done", state.episodes_done},
      {"running_best", std::isfinite(state.running_best) ? nlohmann::json(state.running_best) : nlohmann::json()},
      {"exploration_rng", state.exploration.state()},
      {"device_rng", env_state.device_rng},
      {"estimation_rng", env_state.estimation_rng},
      {"clamped", env_state.clamped},
  };
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) data.meta[k] = v;
}

}  // namespace

void save_training_checkpoint(const std::filesystem::path& dir, const Agent& agent, const CalibrationEnv& env,
                              const TrainState& state, const nlohmann::json& extra) {
  CheckpointData data;
  fill_checkpoint(data, agent, env, state, extra);
  write_checkpoint(dir, data);
}

std::unique_ptr<Agent> load_training_checkpoint(const std::filesystem::path& dir, CalibrationEnv& env,
                                                TrainState& state, CheckpointData* data_out) {
  CheckpointData data;
  auto agent = load_agent(dir, &data);
  try {
    const auto& t = data.meta.at("training");
    if (agent->config().action_dim != env.action_dim())
      throw CheckpointError("checkpoint action_dim does not match the environment");
    state.episodes_done = t.at("episodes_done").get<std::uint64_t>();
    state.running_best = t.at("running_best").is_null() ? -std::numeric_limits<double>::infinity()
                                                        : t.at("running_best").get<double>();
    state.exploration.set_state(t.at("exploration_rng").get<std::string>());
    env.set_state({t.at("device_rng").get<std::string>(), t.at("estimation_rng").get<std::string>(),
                   t.at("clamped").get<std::size_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint has no usable training block: ") + e.what());
  }
  if (data_out) *data_out = std::move(data);
  return agent;
}

LearningCurve train(Agent& agent, CalibrationEnv& env, TrainState& state, const TrainOptions& options) {
  if (agent.config().action_dim != env.action_dim())
    throw std::invalid_argument("agent action_dim does not match the environment");
  if (agent.config().obs_dim != 3) throw std::invalid_argument("agent obs_dim must be 3");
  const bool off_policy = is_off_policy(agent.algorithm());
  const auto warmup = static_cast<std::uint64_t>(agent.config().warmup_steps);
  const int action_dim = env.action_dim();
  const bool checkpoints = !options.checkpoint_dir.empty() && options.checkpoint_every > 0;

  LearningCurve curve;
  for (std::uint64_t step = 0; step < options.total_steps; ++step) {
    const std::uint64_t episode = state.episodes_done;
    const bool random_phase = off_policy && episode < warmup;
    ActionProvider provider = [&](const Observation& obs) {
      if (random_phase) {
        std::vector<double> a(action_dim);
        for (double& x : a) x = state.exploration.uniform(-1.0, 1.0);
        return a;
      }
      return agent.act(obs, false, state.exploration);
    };

    try {
      const EpisodeRecord rec = env.step(provider);
      agent.record(rec.observation, rec.action, rec.reward);
      if (off_policy || agent.ready_to_update()) agent.update();

      state.episodes_done = episode + 1;
      state.running_best = std::max(state.running_best, rec.f_rl);
      curve.push(episode, rec.f_rl);
      curve.running_best.back() = state.running_best;
      if (options.on_episode) options.on_episode(episode, rec);
    } catch (const NumericalError&) {
      if (!options.checkpoint_dir.empty()) {
        nlohmann::json extra = options.checkpoint_meta;
        extra["diagnostic"] = true;
        save_training_checkpoint(options.checkpoint_dir / "diagnostic", agent, env, state, extra);
      }
      throw;
    }

    if (checkpoints && state.episodes_done % options.checkpoint_every == 0)
      save_training_checkpoint(options.checkpoint_dir / ("step_" + std::to_string(state.episodes_done)), agent,
                               env, state, options.checkpoint_meta);
  }
  return curve;
}

}  // namespace quditcal
