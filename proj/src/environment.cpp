#include "quditcal/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace quditcal {

CosineBasis cosine_basis(int n, int k) {
  if (n < 1 || k < 1) throw std::invalid_argument("cosine basis needs N >= 1 and K >= 1");
  if (k > n) throw std::invalid_argument("cosine basis needs K <= N");
  CosineBasis basis{n, k, RealMatrix(n, k)};
  for (int col = 0; col < k; ++col) {
    const double mode = col + 1;
    for (int j = 0; j < n; ++j)
      basis.matrix(j, col) = std::cos(std::numbers::pi * mode * (j + 0.5) / n);
    basis.matrix.col(col) /= basis.matrix.col(col).norm();
  }
  return basis;
}

Residual residual_from_action(std::span<const double> action, const CosineBasis& basis, double alpha) {
  const auto k = static_cast<std::size_t>(basis.k);
  if (action.size() != 2 * k)
    throw std::invalid_argument("action length " + std::to_string(action.size()) + " != 2K = " +
                                std::to_string(2 * k));
  Residual out;
  for (int ch = 0; ch < 2; ++ch) {
    RealVector coeff(basis.k);
    for (std::size_t m = 0; m < k; ++m) {
      double a = action[ch * k + m];
      if (!std::isfinite(a)) throw NumericalError("non-finite action component");
      if (a > 1.0 || a < -1.0) {
        a = std::clamp(a, -1.0, 1.0);
        ++out.clamped;
      }
      coeff(static_cast<Eigen::Index>(m)) = alpha * a;
    }
    const RealVector wave = basis.matrix * coeff;
    out.channels[ch].assign(wave.data(), wave.data() + wave.size());
  }
  return out;
}

PulseSet compose_pulse(const PulseSet& baseline, const ChannelArray& residual, double bound) {
  PulseSet out = baseline;
  for (int ch = 0; ch < 2; ++ch) {
    if (residual[ch].size() != baseline.channels[ch].size())
      throw std::invalid_argument("residual length does not match the baseline pulse");
    for (std::size_t j = 0; j < residual[ch].size(); ++j)
      out.channels[ch][j] = std::clamp(baseline.channels[ch][j] + residual[ch][j], -bound, bound);
  }
  out.amp_bound = bound;
  return out;
}

int EnvConfig::action_dim() const {
  return mode == EnvMode::kResidual ? 2 * modes : 2 * baseline.n_slices();
}

void EnvConfig::validate() const {
  baseline.validate();
  nominal.validate();
  noise.validate();
  if (modes < 1 || modes > baseline.n_slices()) throw std::invalid_argument("env: need 1 <= K <= N");
  if (!(alpha > 0.0)) throw std::invalid_argument("env: alpha must be positive");
  if (!(obs_clip > 0.0)) throw std::invalid_argument("env: obs_clip must be positive");
  if (!(est_eta_omega >= 0.0) || !(est_eta_g >= 0.0))
    throw std::invalid_argument("env: estimation noise must be non-negative");
  if (target.rows() != kHilbertDim || target.cols() != kHilbertDim)
    throw std::invalid_argument("env: target must be a 9x9 unitary");
}

Observation make_observation(const DeviceOffsets& offsets, const EnvConfig& config, Rng& estimation_rng) {
  const double e1 = config.est_eta_omega * estimation_rng.gaussian();
  const double e2 = config.est_eta_omega * estimation_rng.gaussian();
  const double eg = config.est_eta_g * estimation_rng.gaussian();
  auto normalize = [](double value, double sigma) {
    if (sigma > 0.0) return value / sigma;
    if (value != 0.0) throw std::invalid_argument("observation: zero sigma with a nonzero offset");
    return 0.0;
  };
  Observation obs;
  obs.o = {normalize(offsets.d_omega1 + e1, config.noise.sigma_omega),
           normalize(offsets.d_omega2 + e2, config.noise.sigma_omega),
           normalize(offsets.d_g + eg, config.noise.sigma_g)};
  for (double& v : obs.o) v = std::clamp(v, -config.obs_clip, config.obs_clip);
  return obs;
}

double device_fidelity(const PulseSet& pulse, const EnvConfig& config, const DeviceOffsets& offsets) {
  return avg_gate_fidelity(propagate(pulse, apply_offsets(config.nominal, offsets)), config.target);
}

PulseSet decode_action(std::span<const double> action, const EnvConfig& config, const CosineBasis& basis,
                       std::size_t* clamped) {
  if (config.mode == EnvMode::kResidual) {
    const Residual res = residual_from_action(action, basis, config.alpha);
    if (clamped) *clamped += res.clamped;
    return compose_pulse(config.baseline, res.channels, config.baseline.amp_bound);
  }
  const int n = config.baseline.n_slices();
  if (action.size() != static_cast<std::size_t>(2 * n))
    throw std::invalid_argument("direct action must have 2N components");
  PulseSet pulse(n, config.baseline.dt, config.baseline.amp_bound);
  for (int ch = 0; ch < 2; ++ch) {
    for (int j = 0; j < n; ++j) {
      double a = action[ch * n + j];
      if (!std::isfinite(a)) throw NumericalError("non-finite action component");
      if (a > 1.0 || a < -1.0) {
        a = std::clamp(a, -1.0, 1.0);
        if (clamped) ++*clamped;
      }
      pulse.channels[ch][j] = pulse.amp_bound * a;
    }
  }
  return pulse;
}

EpisodeRecord env_episode_on(const DeviceOffsets& offsets, const ActionProvider& provider,
                             const EnvConfig& config, const CosineBasis& basis, Rng& estimation_rng,
                             std::size_t* clamped) {
  EpisodeRecord rec;
  rec.offsets = offsets;
  try {
    rec.f_oct = device_fidelity(config.baseline, config, offsets);
    rec.observation = make_observation(offsets, config, estimation_rng);
    rec.action = provider(rec.observation);
    rec.f_rl = device_fidelity(decode_action(rec.action, config, basis, clamped), config, offsets);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("episode aborted: ") + e.what());
  }
  rec.reward = rec.f_rl - rec.f_oct;
  return rec;
}

EpisodeRecord env_episode(const ActionProvider& provider, const EnvConfig& config, const CosineBasis& basis,
                          Rng& device_rng, Rng& estimation_rng, std::size_t* clamped) {
  const DeviceOffsets offsets = sample_offsets(device_rng, config.noise);
  return env_episode_on(offsets, provider, config, basis, estimation_rng, clamped);
}

EpisodeRecord direct_env_episode(const ActionProvider& provider, const EnvConfig& config, std::size_t* clamped) {
  if (config.mode != EnvMode::kDirect) throw std::invalid_argument("direct episode needs mode = direct");
  EpisodeRecord rec;
  rec.action = provider(rec.observation);
  try {
    rec.f_rl = device_fidelity(decode_action(rec.action, config, CosineBasis{}, clamped), config, {});
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("episode aborted: ") + e.what());
  }
  rec.f_oct = 0.0;
  rec.reward = rec.f_rl;
  return rec;
}

CalibrationEnv::CalibrationEnv(EnvConfig config, std::uint64_t master_seed, std::uint64_t salt)
    : config_(std::move(config)),
      device_rng_(stream_seed(master_seed, Stream::kDevices, salt)),
      estimation_rng_(stream_seed(master_seed, Stream::kEstimation, salt)) {
  config_.validate();
  if (config_.mode == EnvMode::kResidual) basis_ = cosine_basis(config_.baseline.n_slices(), config_.modes);
}

EpisodeRecord CalibrationEnv::step(const ActionProvider& provider) {
  if (config_.mode == EnvMode::kDirect) return direct_env_episode(provider, config_, &clamped_);
  return env_episode(provider, config_, basis_, device_rng_, estimation_rng_, &clamped_);
}

void CalibrationEnv::set_state(const State& s) {
  device_rng_.set_state(s.device_rng);
  estimation_rng_.set_state(s.estimation_rng);
  clamped_ = s.clamped;
}

}  // namespace quditcal
