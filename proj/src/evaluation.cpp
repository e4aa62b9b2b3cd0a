#include "quditcal/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace quditcal {

EnsembleStats make_stats(std::string method, std::uint64_t seed, std::vector<DeviceOffsets> devices,
                         std::vector<double> fidelities) {
  if (fidelities.empty()) throw std::invalid_argument("ensemble stats need at least one fidelity");
  EnsembleStats s{std::move(method), seed, std::move(devices), std::move(fidelities), 0.0, 0.0};
  const double n = static_cast<double>(s.fidelities.size());
  double sum = 0.0;
  for (double f : s.fidelities) sum += f;
  s.mean = sum / n;
  double sq = 0.0;
  for (double f : s.fidelities) sq += (f - s.mean) * (f - s.mean);
  s.std = std::sqrt(sq / n);
  return s;
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "omega") return SweepAxis::kOmega;
  if (name == "g") return SweepAxis::kG;
  throw ConfigError("unknown sweep axis '" + name + "' (expected omega or g)");
}

std::string axis_name(SweepAxis axis) { return axis == SweepAxis::kOmega ? "omega" : "g"; }

ActionProvider zero_policy(int action_dim) {
  return [action_dim](const Observation&) { return std::vector<double>(action_dim, 0.0); };
}

namespace {

CosineBasis basis_for(const EnvConfig& config) {
  return config.mode == EnvMode::kResidual ? cosine_basis(config.baseline.n_slices(), config.modes) : CosineBasis{};
}

}  // namespace

double eval_nominal(const ActionProvider& policy, const EnvConfig& config) {
  if (config.mode == EnvMode::kDirect) return direct_env_episode(policy, config).f_rl;
  Rng estimation(stream_seed(0, Stream::kEvalEstimation));
  EnvConfig exact = config;
  exact.est_eta_omega = 0.0;
  exact.est_eta_g = 0.0;
  return env_episode_on({}, policy, exact, basis_for(config), estimation).f_rl;
}

double eval_single(const ActionProvider& policy, const EnvConfig& config, const DeviceOffsets& offsets,
                   std::uint64_t seed) {
  if (config.mode != EnvMode::kResidual) throw std::invalid_argument("single-device evaluation needs residual mode");
  Rng estimation(stream_seed(seed, Stream::kEvalEstimation));
  return env_episode_on(offsets, policy, config, basis_for(config), estimation).f_rl;
}

EnsembleStats eval_ensemble(const std::string& method, const ActionProvider& policy, const EnvConfig& config,
                            int m, std::uint64_t seed, int threads) {
  if (m < 1) throw std::invalid_argument("ensemble size M must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (config.mode != EnvMode::kResidual) throw std::invalid_argument("ensemble evaluation needs residual mode");
  config.validate();
  const CosineBasis basis = basis_for(config);

  // Draw every device and its estimation normals up front so the split across
  // workers cannot change any value.
  Rng device_rng(stream_seed(seed, Stream::kEvalDevices));
  Rng estimation_rng(stream_seed(seed, Stream::kEvalEstimation));
  std::vector<DeviceOffsets> devices(m);
  std::vector<std::string> estimation_states(m);
  for (int d = 0; d < m; ++d) {
    devices[d] = sample_offsets(device_rng, config.noise);
    estimation_states[d] = estimation_rng.state();
    for (int k = 0; k < 3; ++k) estimation_rng.gaussian();
  }

  std::vector<double> fidelities(m);
  auto work = [&](int begin, int end) {
    for (int d = begin; d < end; ++d) {
      Rng est;
      est.set_state(estimation_states[d]);
      fidelities[d] = env_episode_on(devices[d], policy, config, basis, est).f_rl;
    }
  };
  const int workers = std::min(threads, m);
  if (workers == 1) {
    work(0, m);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, m * w / workers, m * (w + 1) / workers);
    for (auto& t : pool) t.join();
  }
  return make_stats(method, seed, std::move(devices), std::move(fidelities));
}

void validate_sweep_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw ConfigError("sweep needs at least one level");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0) || !std::isfinite(levels[i])) throw ConfigError("sweep levels must be finite and >= 0");
    if (i > 0 && !(levels[i] > levels[i - 1])) throw ConfigError("sweep levels must be strictly increasing");
  }
}

SweepResult obs_noise_sweep(const std::string& method, const ActionProvider& policy, const EnvConfig& config,
                            const std::vector<double>& levels, SweepAxis axis, int m, std::uint64_t seed,
                            int threads) {
  validate_sweep_levels(levels);
  SweepResult out;
  out.axis = axis;
  out.levels = levels;
  for (double level : levels) {
    EnvConfig c = config;
    c.est_eta_omega = axis == SweepAxis::kOmega ? level * config.noise.sigma_omega : 0.0;
    c.est_eta_g = axis == SweepAxis::kG ? level * config.noise.sigma_g : 0.0;
    out.per_level.push_back(eval_ensemble(method, policy, c, m, seed, threads));
  }
  return out;
}

PulseOverlay pulse_overlay_export(const PulseSet& baseline,
                                  const std::vector<std::pair<std::string, PulseSet>>& corrected, int channel) {
  if (channel != 1 && channel != 2) throw std::invalid_argument("channel must be 1 or 2");
  const int n = baseline.n_slices();
  PulseOverlay out;
  out.channel = channel;
  out.baseline = baseline.channels[channel - 1];
  for (int j = 0; j < n; ++j) out.time.push_back((j + 0.5) * baseline.dt);
  for (const auto& [name, pulse] : corrected) {
    if (pulse.n_slices() != n) throw std::invalid_argument("overlay pulse '" + name + "' has a different length");
    out.methods.emplace_back(name, pulse.channels[channel - 1]);
  }
  return out;
}

}  // namespace quditcal
