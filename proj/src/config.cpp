#include "quditcal/config.hpp"

#include <stdexcept>

#include "quditcal/json_util.hpp"

namespace quditcal {

RunConfig::RunConfig() {
  for (Algorithm a : {Algorithm::kSac, Algorithm::kTd3, Algorithm::kDdpg, Algorithm::kPpo}) {
    AgentConfig c;
    c.algorithm = a;
    agents[algorithm_name(a)] = c;
  }
  apply_seed(seed);
}

void RunConfig::apply_seed(std::uint64_t master) {
  seed = master;
  grape.seed = master;
  noise.seed = master;
  for (auto& [name, c] : agents) c.seed = master;
}

void RunConfig::validate() const {
  try {
    device.validate();
    grape.validate();
    noise.validate();
    for (const auto& [name, c] : agents) c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (grape_restarts < 1) throw ConfigError("grape.restarts must be >= 1");
  if (modes < 1 || modes > grape.n_slices) throw ConfigError("env.modes must lie in [1, grape.n_slices]");
  if (!(alpha > 0.0)) throw ConfigError("env.alpha must be positive");
  if (!(obs_clip > 0.0)) throw ConfigError("env.obs_clip must be positive");
  if (!(est_eta_omega >= 0.0) || !(est_eta_g >= 0.0)) throw ConfigError("env estimation noise must be >= 0");
  if (eval_m < 1) throw ConfigError("eval.M must be >= 1");
  if (overlay_channel != 1 && overlay_channel != 2) throw ConfigError("eval.overlay_channel must be 1 or 2");
  for (std::size_t i = 1; i < sweep_levels.size(); ++i)
    if (!(sweep_levels[i] > sweep_levels[i - 1])) throw ConfigError("eval.sweep_levels must be strictly increasing");
  if (noise_count < 1 || noise_bins < 1) throw ConfigError("sample_noise.count and bins must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

DeviceParams device_params_from_json(const nlohmann::json& j, DeviceParams p) {
  const std::string ctx = "device";
  reject_unknown_keys(j, {"omega1", "omega2", "chi1", "chi2", "g"}, ctx);
  read_if_present(j, "omega1", p.omega1, ctx);
  read_if_present(j, "omega2", p.omega2, ctx);
  read_if_present(j, "chi1", p.chi1, ctx);
  read_if_present(j, "chi2", p.chi2, ctx);
  read_if_present(j, "g", p.g, ctx);
  return p;
}

nlohmann::json device_params_to_json(const DeviceParams& p) {
  return {{"omega1", p.omega1}, {"omega2", p.omega2}, {"chi1", p.chi1}, {"chi2", p.chi2}, {"g", p.g}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  reject_unknown_keys(j,
                      {"seed", "gate", "device", "grape", "noise", "env", "agents", "train", "eval", "sample_noise",
                       "output_dir", "threads"},
                      "config");
  read_if_present(j, "seed", c.seed, "config");
  c.apply_seed(c.seed);
  if (j.contains("gate")) {
    try {
      c.gate = parse_gate(j.at("gate").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config.gate: ") + e.what());
    }
  }
  if (j.contains("device")) c.device = device_params_from_json(j.at("device"));

  if (j.contains("grape")) {
    const auto& g = j.at("grape");
    const std::string ctx = "grape";
    reject_unknown_keys(g,
                        {"n_slices", "total_time", "amp_bound", "target_infidelity", "max_iterations",
                         "init_amplitude", "lbfgs_memory", "restarts"},
                        ctx);
    read_if_present(g, "n_slices", c.grape.n_slices, ctx);
    read_if_present(g, "total_time", c.grape.total_time, ctx);
    read_if_present(g, "amp_bound", c.grape.amp_bound, ctx);
    read_if_present(g, "target_infidelity", c.grape.target_infidelity, ctx);
    read_if_present(g, "max_iterations", c.grape.max_iterations, ctx);
    read_if_present(g, "init_amplitude", c.grape.init_amplitude, ctx);
    read_if_present(g, "lbfgs_memory", c.grape.lbfgs_memory, ctx);
    read_if_present(g, "restarts", c.grape_restarts, ctx);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    reject_unknown_keys(n, {"sigma_omega", "sigma_g"}, "noise");
    read_if_present(n, "sigma_omega", c.noise.sigma_omega, "noise");
    read_if_present(n, "sigma_g", c.noise.sigma_g, "noise");
  }
  if (j.contains("env")) {
    const auto& e = j.at("env");
    reject_unknown_keys(e, {"modes", "alpha", "obs_clip", "est_eta_omega", "est_eta_g"}, "env");
    read_if_present(e, "modes", c.modes, "env");
    read_if_present(e, "alpha", c.alpha, "env");
    read_if_present(e, "obs_clip", c.obs_clip, "env");
    read_if_present(e, "est_eta_omega", c.est_eta_omega, "env");
    read_if_present(e, "est_eta_g", c.est_eta_g, "env");
  }
  if (j.contains("agents")) {
    const auto& a = j.at("agents");
    reject_unknown_keys(a, {"sac", "td3", "ddpg", "ppo"}, "agents");
    for (const auto& [name, value] : a.items()) {
      if (value.contains("algorithm") && value.at("algorithm") != name)
        throw ConfigError("agents." + name + ".algorithm must be '" + name + "'");
      c.agents[name] = agent_config_from_json(value, c.agents[name]);
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown_keys(t, {"steps", "checkpoint_every"}, "train");
    read_if_present(t, "steps", c.train_steps, "train");
    read_if_present(t, "checkpoint_every", c.checkpoint_every, "train");
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown_keys(e, {"M", "seed", "sweep_levels", "overlay_channel"}, "eval");
    read_if_present(e, "M", c.eval_m, "eval");
    read_if_present(e, "seed", c.eval_seed, "eval");
    read_if_present(e, "sweep_levels", c.sweep_levels, "eval");
    read_if_present(e, "overlay_channel", c.overlay_channel, "eval");
  }
  if (j.contains("sample_noise")) {
    const auto& s = j.at("sample_noise");
    reject_unknown_keys(s, {"count", "bins"}, "sample_noise");
    read_if_present(s, "count", c.noise_count, "sample_noise");
    read_if_present(s, "bins", c.noise_bins, "sample_noise");
  }
  read_if_present(j, "output_dir", c.output_dir, "config");
  read_if_present(j, "threads", c.threads, "config");
  c.validate();
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json agents = nlohmann::json::object();
  for (const auto& [name, a] : c.agents) {
    auto aj = agent_config_to_json(a);
    // Dimensions and seed are derived from the environment and the master seed.
    aj.erase("obs_dim");
    aj.erase("action_dim");
    aj.erase("seed");
    agents[name] = aj;
  }
  return {
      {"seed", c.seed},
      {"gate", gate_name(c.gate)},
      {"device", device_params_to_json(c.device)},
      {"grape",
       {{"n_slices", c.grape.n_slices},
        {"total_time", c.grape.total_time},
        {"amp_bound", c.grape.amp_bound},
        {"target_infidelity", c.grape.target_infidelity},
        {"max_iterations", c.grape.max_iterations},
        {"init_amplitude", c.grape.init_amplitude},
        {"lbfgs_memory", c.grape.lbfgs_memory},
        {"restarts", c.grape_restarts}}},
      {"noise", {{"sigma_omega", c.noise.sigma_omega}, {"sigma_g", c.noise.sigma_g}}},
      {"env",
       {{"modes", c.modes},
        {"alpha", c.alpha},
        {"obs_clip", c.obs_clip},
        {"est_eta_omega", c.est_eta_omega},
        {"est_eta_g", c.est_eta_g}}},
      {"agents", agents},
      {"train", {{"steps", c.train_steps}, {"checkpoint_every", c.checkpoint_every}}},
      {"eval",
       {{"M", c.eval_m}, {"seed", c.eval_seed}, {"sweep_levels", c.sweep_levels},
        {"overlay_channel", c.overlay_channel}}},
      {"sample_noise", {{"count", c.noise_count}, {"bins", c.noise_bins}}},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
  };
}

}  // namespace quditcal
