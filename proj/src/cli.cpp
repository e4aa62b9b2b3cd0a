#include "quditcal/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "quditcal/config.hpp"
#include "quditcal/evaluation.hpp"
#include "quditcal/io.hpp"
#include "quditcal/training.hpp"

namespace fs = std::filesystem;

namespace quditcal {

namespace {

// Flags that change what a subcommand computes; recorded in the manifest and
// reapplied when the manifest is passed back as --config.
struct Options {
  std::string config_path;
  std::string out;
  std::string gate;
  int threads = 0;
  bool allow_unconverged = false;
  long long count = 0;
  long long steps = -1;
  std::string algorithm;
  bool direct = false;
  std::string resume;
  std::vector<std::string> checkpoints;
  std::string pulse;
  std::string axis = "omega";
  std::vector<double> levels;
};

struct Context {
  std::string command;
  Options opt;
  RunConfig config;
  fs::path out_dir;
  std::vector<std::string> files;
};

std::string absolute_or_empty(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

nlohmann::json options_to_json(const std::string& command, const Options& o) {
  nlohmann::json j = {{"gate", o.gate}, {"allow_unconverged", o.allow_unconverged}};
  if (command == "sample-noise") j["count"] = o.count;
  if (command == "train") {
    j["algorithm"] = o.algorithm;
    j["steps"] = o.steps;
    j["direct"] = o.direct;
    j["resume"] = o.resume;
  }
  if (command == "train" || command == "eval" || command == "sweep") j["pulse"] = o.pulse;
  if (command == "eval" || command == "sweep") j["checkpoint"] = o.checkpoints;
  if (command == "sweep") {
    j["axis"] = o.axis;
    j["levels"] = o.levels;
  }
  return j;
}

void write_file(Context& ctx, const std::string& name, const std::string& content) {
  io::write_text(ctx.out_dir / name, content);
  ctx.files.push_back(name);
}

void write_manifest(Context& ctx) {
  nlohmann::json m = {
      {"tool", "quditcal"},
      {"version", kToolVersion},
      {"command", ctx.command},
      {"seed", ctx.config.seed},
      {"options", options_to_json(ctx.command, ctx.opt)},
      {"config", run_config_to_json(ctx.config)},
      {"files", ctx.files},
  };
  io::write_text(ctx.out_dir / "manifest.json", m.dump(2) + "\n");
}

EnvConfig env_config(const RunConfig& c, const PulseSet& baseline, bool direct) {
  EnvConfig e;
  e.modes = c.modes;
  e.alpha = c.alpha;
  e.obs_clip = c.obs_clip;
  e.noise = c.noise;
  e.est_eta_omega = c.est_eta_omega;
  e.est_eta_g = c.est_eta_g;
  e.baseline = baseline;
  e.nominal = c.device;
  e.target = target_gate(c.gate);
  e.mode = direct ? EnvMode::kDirect : EnvMode::kResidual;
  return e;
}

GrapeResult run_grape(const Context& ctx) {
  const GrapeResult r =
      grape_optimize_best(ctx.config.grape, ctx.config.device, target_gate(ctx.config.gate), ctx.config.grape_restarts);
  std::fprintf(stderr, "grape: infidelity %.3e after %d iterations (%s)\n", r.final_infidelity, r.iterations_used,
               r.stop_reason.c_str());
  return r;
}

nlohmann::json pulse_meta(const Context& ctx, const GrapeResult& r) {
  return {{"gate", gate_name(ctx.config.gate)},
          {"device", device_params_to_json(ctx.config.device)},
          {"final_infidelity", r.final_infidelity},
          {"converged", r.converged},
          {"iterations_used", r.iterations_used}};
}

void require_converged(const Context& ctx, const GrapeResult& r) {
  if (!r.converged && !ctx.opt.allow_unconverged)
    throw NonConvergenceError("GRAPE did not reach the target infidelity (best " +
                              io::format_double(r.final_infidelity) + "); pass --allow-unconverged to continue");
}

// Baseline pulse: --pulse if given, otherwise a fresh GRAPE run written next to the outputs.
PulseSet baseline_pulse(Context& ctx) {
  if (!ctx.opt.pulse.empty()) {
    nlohmann::json meta;
    PulseSet p = io::read_pulse_json(ctx.opt.pulse, &meta);
    if (meta.contains("gate") && meta.at("gate") != gate_name(ctx.config.gate))
      throw ConfigError("pulse " + ctx.opt.pulse + " was optimized for gate " + meta.at("gate").get<std::string>());
    if (p.n_slices() < ctx.config.modes) throw ConfigError("pulse has fewer slices than env.modes");
    return p;
  }
  const GrapeResult r = run_grape(ctx);
  require_converged(ctx, r);
  io::write_pulse_json(ctx.out_dir / "oct_pulse.json", r.pulse, pulse_meta(ctx, r));
  ctx.files.push_back("oct_pulse.json");
  return r.pulse;
}

int cmd_grape(Context& ctx) {
  const GrapeResult r = run_grape(ctx);
  io::write_pulse_json(ctx.out_dir / "oct_pulse.json", r.pulse, pulse_meta(ctx, r));
  ctx.files.push_back("oct_pulse.json");
  write_file(ctx, "grape_history.csv", io::grape_history_csv(r));
  write_manifest(ctx);
  require_converged(ctx, r);
  return kExitOk;
}

int cmd_sample_noise(Context& ctx) {
  const int count = ctx.opt.count > 0 ? static_cast<int>(ctx.opt.count) : ctx.config.noise_count;
  ctx.opt.count = count;
  Rng rng(stream_seed(ctx.config.seed, Stream::kDevices));
  std::vector<DeviceOffsets> samples(count);
  for (auto& s : samples) s = sample_offsets(rng, ctx.config.noise);
  const auto hist = offset_histogram(samples, ctx.config.noise_bins, ctx.config.noise);
  write_file(ctx, "noise_samples.csv", io::noise_samples_csv(samples));
  write_file(ctx, "noise_hist.csv", io::noise_hist_csv(hist));
  write_file(ctx, "noise_summary.csv", io::noise_summary_csv(hist, samples));
  write_manifest(ctx);
  return kExitOk;
}

int cmd_train(Context& ctx) {
  if (ctx.opt.algorithm.empty()) throw ConfigError("train needs --algorithm {sac,td3,ddpg,ppo}");
  Algorithm algorithm;
  try {
    algorithm = parse_algorithm(ctx.opt.algorithm);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::uint64_t total = ctx.opt.steps >= 0 ? static_cast<std::uint64_t>(ctx.opt.steps) : ctx.config.train_steps;
  ctx.opt.steps = static_cast<long long>(total);

  const PulseSet baseline = baseline_pulse(ctx);
  CalibrationEnv env(env_config(ctx.config, baseline, ctx.opt.direct), ctx.config.seed);

  AgentConfig ac = ctx.config.agents.at(algorithm_name(algorithm));
  ac.obs_dim = 3;
  ac.action_dim = env.action_dim();
  TrainState state(ctx.config.seed);
  std::unique_ptr<Agent> agent;
  if (!ctx.opt.resume.empty()) {
    CheckpointData data;
    agent = load_training_checkpoint(ctx.opt.resume, env, state, &data);
    if (agent->algorithm() != algorithm) throw ConfigError("--resume checkpoint holds a different algorithm");
    if (data.meta.value("mode", "") != (ctx.opt.direct ? "direct" : "residual"))
      throw ConfigError("--resume checkpoint was trained in a different mode");
  } else {
    agent = make_agent(ac);
  }
  if (state.episodes_done > total) throw ConfigError("--steps is below the checkpoint's episode count");

  const nlohmann::json meta = {{"gate", gate_name(ctx.config.gate)},
                               {"mode", ctx.opt.direct ? "direct" : "residual"},
                               {"n_slices", baseline.n_slices()},
                               {"modes", ctx.config.modes}};
  TrainOptions to;
  to.total_steps = total - state.episodes_done;
  to.checkpoint_every = ctx.config.checkpoint_every;
  to.checkpoint_dir = ctx.out_dir / "checkpoints";
  to.checkpoint_meta = meta;
  std::string episodes = io::episodes_header();
  double window = 0.0;
  to.on_episode = [&](std::uint64_t ep, const EpisodeRecord& rec) {
    episodes += io::episode_row(ep, rec);
    window += rec.f_rl;
    if ((ep + 1) % 1000 == 0) {
      std::fprintf(stderr, "train %s: episode %llu, mean f_rl over last 1000 = %.5f\n", ctx.opt.algorithm.c_str(),
                   static_cast<unsigned long long>(ep + 1), window / 1000.0);
      window = 0.0;
    }
  };
  const LearningCurve curve = train(*agent, env, state, to);

  save_training_checkpoint(ctx.out_dir / "checkpoint", *agent, env, state, meta);
  ctx.files.push_back("checkpoint/checkpoint.json");
  write_file(ctx, "learning_curve.csv", io::learning_curve_csv(curve));
  write_file(ctx, "episodes.csv", episodes);
  write_manifest(ctx);
  return kExitOk;
}

struct LoadedPolicy {
  std::string method;
  Policy policy;
};

std::vector<LoadedPolicy> load_policies(const Context& ctx, int action_dim) {
  std::vector<LoadedPolicy> out;
  for (const auto& path : ctx.opt.checkpoints) {
    const CheckpointData data = read_checkpoint(path);
    if (data.meta.value("mode", "residual") != "residual")
      throw ConfigError(path + ": evaluation needs a residual-mode checkpoint");
    if (data.meta.contains("gate") && data.meta.at("gate") != gate_name(ctx.config.gate))
      throw ConfigError(path + ": checkpoint was trained for a different gate");
    Policy p = policy_import(data);
    if (p.action_dim() != action_dim) throw ConfigError(path + ": action_dim does not match 2 * env.modes");
    std::string name = algorithm_name(p.algorithm());
    int dup = 1;
    for (const auto& existing : out)
      if (existing.method == name || existing.method.rfind(name + "_", 0) == 0) ++dup;
    if (dup > 1) name += "_" + std::to_string(dup);
    out.push_back({name, std::move(p)});
  }
  return out;
}

ActionProvider provider_for(const Policy& p) {
  return [&p](const Observation& o) { return p.act(o); };
}

int cmd_eval(Context& ctx) {
  const PulseSet baseline = baseline_pulse(ctx);
  const EnvConfig ec = env_config(ctx.config, baseline, false);
  const auto policies = load_policies(ctx, ec.action_dim());
  const auto& c = ctx.config;

  std::vector<std::pair<std::string, ActionProvider>> methods = {{"oct", zero_policy(ec.action_dim())}};
  for (const auto& lp : policies) methods.emplace_back(lp.method, provider_for(lp.policy));

  std::vector<EnsembleStats> nominal, single, ensemble;
  const DeviceOffsets fixed = fixed_single_device();
  for (const auto& [name, provider] : methods) {
    nominal.push_back(make_stats(name, c.eval_seed, {DeviceOffsets{}}, {eval_nominal(provider, ec)}));
    single.push_back(make_stats(name, c.eval_seed, {fixed}, {eval_single(provider, ec, fixed, c.eval_seed)}));
    ensemble.push_back(eval_ensemble(name, provider, ec, c.eval_m, c.eval_seed, c.threads));
  }
  write_file(ctx, "nominal_stats.csv", io::stats_csv(nominal));
  write_file(ctx, "nominal_devices.csv", io::devices_csv(nominal));
  write_file(ctx, "single_stats.csv", io::stats_csv(single));
  write_file(ctx, "single_devices.csv", io::devices_csv(single));
  write_file(ctx, "ensemble_stats.csv", io::stats_csv(ensemble));
  write_file(ctx, "ensemble_devices.csv", io::devices_csv(ensemble));

  // Corrected pulses each policy plays on the single static-noise device.
  const CosineBasis basis = cosine_basis(baseline.n_slices(), ec.modes);
  std::vector<std::pair<std::string, PulseSet>> corrected;
  for (const auto& lp : policies) {
    Rng est(stream_seed(c.eval_seed, Stream::kEvalEstimation));
    const Observation obs = make_observation(fixed, ec, est);
    corrected.emplace_back(lp.method, decode_action(lp.policy.act(obs), ec, basis));
  }
  write_file(ctx, "pulse_overlay.csv", io::pulse_overlay_csv(pulse_overlay_export(baseline, corrected, c.overlay_channel)));
  write_manifest(ctx);
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    std::fprintf(stderr, "%-6s nominal %.5f  single %.5f  ensemble %.5f +- %.5f\n", ensemble[i].method.c_str(),
                 nominal[i].mean, single[i].mean, ensemble[i].mean, ensemble[i].std);
  return kExitOk;
}

int cmd_sweep(Context& ctx) {
  if (ctx.opt.checkpoints.size() != 1) throw ConfigError("sweep needs exactly one --checkpoint");
  const SweepAxis axis = parse_axis(ctx.opt.axis);
  if (ctx.opt.levels.empty()) ctx.opt.levels = ctx.config.sweep_levels;
  validate_sweep_levels(ctx.opt.levels);
  const PulseSet baseline = baseline_pulse(ctx);
  const EnvConfig ec = env_config(ctx.config, baseline, false);
  const auto policies = load_policies(ctx, ec.action_dim());
  const auto& c = ctx.config;
  std::vector<SweepResult> sweeps;
  sweeps.push_back(obs_noise_sweep("oct", zero_policy(ec.action_dim()), ec, ctx.opt.levels, axis, c.eval_m,
                                   c.eval_seed, c.threads));
  sweeps.push_back(obs_noise_sweep(policies[0].method, provider_for(policies[0].policy), ec, ctx.opt.levels, axis,
                                   c.eval_m, c.eval_seed, c.threads));
  write_file(ctx, "sweep.csv", io::sweep_csv(sweeps));
  write_manifest(ctx);
  return kExitOk;
}

// Applies a manifest's recorded options unless the same flag was given explicitly.
void apply_manifest_options(const nlohmann::json& o, Options& opt, const CLI::App& sub) {
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  auto take = [&](const char* key, const char* flag, auto& field) {
    if (o.contains(key) && !given(flag)) field = o.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("gate", "--gate", opt.gate);
  take("allow_unconverged", "--allow-unconverged", opt.allow_unconverged);
  take("count", "--count", opt.count);
  take("algorithm", "--algorithm", opt.algorithm);
  take("steps", "--steps", opt.steps);
  take("direct", "--direct", opt.direct);
  take("resume", "--resume", opt.resume);
  take("pulse", "--pulse", opt.pulse);
  take("checkpoint", "--checkpoint", opt.checkpoints);
  take("axis", "--axis", opt.axis);
  take("levels", "--levels", opt.levels);
}

int dispatch(CLI::App& app, Options& opt) {
  CLI::App* sub = app.get_subcommands().front();
  Context ctx;
  ctx.command = sub->get_name();

  nlohmann::json config_json = nlohmann::json::object();
  if (!opt.config_path.empty()) {
    try {
      config_json = nlohmann::json::parse(io::read_text(opt.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(opt.config_path + ": " + e.what());
    }
    if (config_json.is_object() && config_json.value("tool", "") == "quditcal" && config_json.contains("config")) {
      if (config_json.value("command", "") != ctx.command)
        throw ConfigError("manifest was written by '" + config_json.value("command", "") + "', not '" + ctx.command +
                          "'");
      try {
        apply_manifest_options(config_json.at("options"), opt, *sub);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest options: ") + e.what());
      }
      config_json = config_json.at("config");
    }
  }
  RunConfig config = run_config_from_json(config_json);
  if (const char* env_seed = std::getenv("QUDITCAL_SEED"); env_seed && *env_seed) {
    try {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(env_seed, &used);
      if (used != std::string(env_seed).size()) throw std::invalid_argument("trailing characters");
      config.apply_seed(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("QUDITCAL_SEED is not an unsigned integer: ") + env_seed);
    }
  }
  if (!opt.gate.empty()) {
    try {
      config.gate = parse_gate(opt.gate);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  opt.gate = gate_name(config.gate);
  if (opt.threads > 0) config.threads = opt.threads;
  if (!opt.out.empty()) config.output_dir = opt.out;
  config.validate();

  opt.pulse = absolute_or_empty(opt.pulse);
  opt.resume = absolute_or_empty(opt.resume);
  for (auto& c : opt.checkpoints) c = absolute_or_empty(c);

  ctx.opt = opt;
  ctx.config = config;
  ctx.out_dir = config.output_dir;
  fs::create_directories(ctx.out_dir);

  if (ctx.command == "grape") return cmd_grape(ctx);
  if (ctx.command == "sample-noise") return cmd_sample_noise(ctx);
  if (ctx.command == "train") return cmd_train(ctx);
  if (ctx.command == "eval") return cmd_eval(ctx);
  return cmd_sweep(ctx);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Residual RL calibration of two-qutrit gates"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run config or manifest JSON");
    sub->add_option("--out", opt.out, "output directory (overrides output_dir)");
    sub->add_option("--gate", opt.gate, "target gate")->check(CLI::IsMember({"cz3", "alt"}));
    sub->add_option("--threads", opt.threads, "worker threads for evaluation")->check(CLI::PositiveNumber);
    sub->add_flag("--allow-unconverged", opt.allow_unconverged, "accept an unconverged GRAPE pulse");
  };
  auto* grape = app.add_subcommand("grape", "optimize the baseline pulse");
  common(grape);
  auto* noise = app.add_subcommand("sample-noise", "sample device offsets and histogram them");
  common(noise);
  noise->add_option("--count", opt.count, "number of samples")->check(CLI::PositiveNumber);
  auto* tr = app.add_subcommand("train", "train a calibration agent");
  common(tr);
  tr->add_option("--algorithm", opt.algorithm, "agent")->check(CLI::IsMember({"sac", "td3", "ddpg", "ppo"}));
  tr->add_option("--steps", opt.steps, "total environment steps")->check(CLI::NonNegativeNumber);
  tr->add_flag("--direct", opt.direct, "learn the whole pulse on the nominal device");
  tr->add_option("--resume", opt.resume, "training checkpoint directory to continue from");
  tr->add_option("--pulse", opt.pulse, "baseline oct_pulse.json");
  auto* ev = app.add_subcommand("eval", "evaluate OCT and trained policies");
  common(ev);
  ev->add_option("--checkpoint", opt.checkpoints, "checkpoint directories");
  ev->add_option("--pulse", opt.pulse, "baseline oct_pulse.json");
  auto* sw = app.add_subcommand("sweep", "estimation-noise sweep");
  common(sw);
  sw->add_option("--checkpoint", opt.checkpoints, "checkpoint directory");
  sw->add_option("--axis", opt.axis, "noise axis")->check(CLI::IsMember({"omega", "g"}));
  sw->add_option("--levels", opt.levels, "eta / sigma levels")->delimiter(',');
  sw->add_option("--pulse", opt.pulse, "baseline oct_pulse.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return dispatch(app, opt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const NonConvergenceError& e) {
    std::fprintf(stderr, "not converged: %s\n", e.what());
    return kExitUnconverged;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"quditcal"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace quditcal
