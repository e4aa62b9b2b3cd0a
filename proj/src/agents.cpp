#include "quditcal/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "quditcal/json_util.hpp"

namespace quditcal {

namespace {

// SAC log-std squashing range.
constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kTanhEps = 1e-6;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericalError(std::string("non-finite ") + what);
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

RealMatrix stack(const RealMatrix& top, const RealMatrix& bottom) {
  RealMatrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

RealVector obs_vector(const Observation& obs) { return Eigen::Map<const RealVector>(obs.o.data(), 3); }

std::vector<double> to_std(const RealVector& v) { return {v.data(), v.data() + v.size()}; }

void save_mlp(CheckpointData& data, const std::string& name, const nn::Mlp& net) {
  data.put(name, net.params());
  data.meta["networks"][name] = net.sizes();
}

void load_mlp(const CheckpointData& data, const std::string& name, nn::Mlp& net) {
  const auto& v = data.get(name, net.num_params());
  std::copy(v.begin(), v.end(), net.params().begin());
}

void save_adam(CheckpointData& data, const std::string& name, const nn::AdamState& s) {
  data.put(name + ".adam_m", s.m);
  data.put(name + ".adam_v", s.v);
  data.meta["adam_steps"][name] = s.step;
}

void load_adam(const CheckpointData& data, const std::string& name, nn::AdamState& s) {
  s.m = data.get(name + ".adam_m");
  s.v = data.get(name + ".adam_v");
  s.step = data.meta.at("adam_steps").at(name).get<std::uint64_t>();
}

nn::AdamState make_adam(double lr) {
  nn::AdamState s;
  s.lr = lr;
  return s;
}

// ---------------------------------------------------------------------------
// Off-policy base: replay buffer plus one or two critics regressing Q(o, a) -> r.

class OffPolicyAgent : public Agent {
 public:
  OffPolicyAgent(const AgentConfig& config, int n_critics, Rng& init_rng)
      : Agent(config),
        buffer_(config_.buffer_capacity, config_.obs_dim, config_.action_dim),
        update_rng_(stream_seed(config_.seed, Stream::kReplay)) {
    const auto sizes = layer_sizes(config_.obs_dim + config_.action_dim, config_.hidden, 1);
    for (int c = 0; c < n_critics; ++c) {
      critics_.emplace_back(sizes, init_rng);
      critic_targets_.push_back(critics_.back());
      critic_adam_.push_back(make_adam(config_.lr));
    }
  }

  void record(const Observation& obs, const std::vector<double>& action, double reward) override {
    buffer_.add(obs.o, action, reward);
    ++env_steps_;
  }

  bool ready_to_update() const override {
    return env_steps_ >= static_cast<std::uint64_t>(config_.warmup_steps) && buffer_.size() >= config_.batch_size;
  }

  UpdateStats update() override {
    UpdateStats stats;
    if (!ready_to_update()) {
      ++skipped_;
      return stats;
    }
    const auto batch = buffer_.gather(buffer_.sample_indices(config_.batch_size, update_rng_));
    stats.critic_loss = critic_step(batch);
    actor_step(batch, stats);
    ++updates_;
    stats.performed = true;
    return stats;
  }

  void save_state(CheckpointData& data) const override {
    Agent::save_state(data);
    for (std::size_t c = 0; c < critics_.size(); ++c) {
      const std::string name = "critic" + std::to_string(c + 1);
      save_mlp(data, name, critics_[c]);
      save_mlp(data, name + "_target", critic_targets_[c]);
      save_adam(data, name, critic_adam_[c]);
    }
    data.put("replay", buffer_.flatten());
    data.meta["replay_size"] = buffer_.size();
    data.meta["env_steps"] = env_steps_;
    data.meta["rng"]["update"] = update_rng_.state();
  }

  void load_state(const CheckpointData& data) override {
    Agent::load_state(data);
    for (std::size_t c = 0; c < critics_.size(); ++c) {
      const std::string name = "critic" + std::to_string(c + 1);
      load_mlp(data, name, critics_[c]);
      load_mlp(data, name + "_target", critic_targets_[c]);
      load_adam(data, name, critic_adam_[c]);
    }
    buffer_.restore(data.get("replay"), data.meta.at("replay_size").get<int>());
    env_steps_ = data.meta.at("env_steps").get<std::uint64_t>();
    update_rng_.set_state(data.meta.at("rng").at("update").get<std::string>());
  }

  std::vector<double> critic_outputs(const Observation& obs, const std::vector<double>& action) const override {
    RealVector in(config_.obs_dim + config_.action_dim);
    in.head(config_.obs_dim) = obs_vector(obs);
    in.tail(config_.action_dim) = Eigen::Map<const RealVector>(action.data(), config_.action_dim);
    std::vector<double> out;
    for (const auto& c : critics_) out.push_back(c.forward(in)(0));
    return out;
  }

 protected:
  // Bandit target: y = r for every critic, no bootstrap term.
  double critic_step(const ReplayBuffer::Batch& batch) {
    const RealMatrix input = stack(batch.obs, batch.actions);
    const double inv_b = 1.0 / static_cast<double>(batch.rewards.size());
    double loss_sum = 0.0;
    for (std::size_t c = 0; c < critics_.size(); ++c) {
      nn::Mlp::Cache cache;
      const RealMatrix q = critics_[c].forward(input, &cache);
      const RealMatrix err = q - batch.rewards.transpose();
      const double loss = err.squaredNorm() * inv_b;
      require_finite(loss, "critic loss");
      std::vector<double> grad;
      critics_[c].backward(cache, 2.0 * inv_b * err, &grad);
      nn::adam_step(critics_[c].params(), grad, critic_adam_[c]);
      loss_sum += loss;
    }
    return loss_sum / static_cast<double>(critics_.size());
  }

  // dQ_c/da for each sample, scaled per sample by `weights`.
  RealMatrix critic_action_grad(int c, const RealMatrix& obs, const RealMatrix& actions,
                                const RealMatrix& weights, RealMatrix* q_out = nullptr) const {
    nn::Mlp::Cache cache;
    const RealMatrix q = critics_[c].forward(stack(obs, actions), &cache);
    if (q_out) *q_out = q;
    const RealMatrix din = critics_[c].backward(cache, weights, nullptr);
    return din.bottomRows(config_.action_dim);
  }

  void soft_update_critics() {
    for (std::size_t c = 0; c < critics_.size(); ++c) nn::soft_update(critic_targets_[c], critics_[c], config_.tau);
  }

  virtual void actor_step(const ReplayBuffer::Batch& batch, UpdateStats& stats) = 0;

  ReplayBuffer buffer_;
  Rng update_rng_;
  std::vector<nn::Mlp> critics_;
  std::vector<nn::Mlp> critic_targets_;  // maintained but inert for terminal-only episodes
  std::vector<nn::AdamState> critic_adam_;
  std::uint64_t env_steps_ = 0;
};

// ---------------------------------------------------------------------------
// TD3 and DDPG: deterministic tanh actor.

class DeterministicAgent final : public OffPolicyAgent {
 public:
  DeterministicAgent(const AgentConfig& config, Rng init_rng)
      : OffPolicyAgent(config, config.algorithm == Algorithm::kTd3 ? 2 : 1, init_rng),
        actor_(layer_sizes(config_.obs_dim, config_.hidden, config_.action_dim), init_rng, config_.zero_init_actor),
        actor_target_(actor_),
        actor_adam_(make_adam(config_.lr)) {}

  std::vector<double> act(const Observation& obs, bool deterministic, Rng& rng) override {
    RealVector a = actor_.forward(obs_vector(obs)).array().tanh();
    if (!deterministic) {
      for (Eigen::Index k = 0; k < a.size(); ++k)
        a(k) = std::clamp(a(k) + config_.exploration_sigma * rng.gaussian(), -1.0, 1.0);
    }
    return to_std(a);
  }

  Policy export_policy() const override { return Policy(config_.algorithm, actor_, config_.action_dim); }

  void save_state(CheckpointData& data) const override {
    OffPolicyAgent::save_state(data);
    save_mlp(data, "actor", actor_);
    save_mlp(data, "actor_target", actor_target_);
    save_adam(data, "actor", actor_adam_);
  }

  void load_state(const CheckpointData& data) override {
    OffPolicyAgent::load_state(data);
    load_mlp(data, "actor", actor_);
    load_mlp(data, "actor_target", actor_target_);
    load_adam(data, "actor", actor_adam_);
  }

 private:
  void actor_step(const ReplayBuffer::Batch& batch, UpdateStats& stats) override {
    const bool td3 = config_.algorithm == Algorithm::kTd3;
    const std::uint64_t period = td3 ? static_cast<std::uint64_t>(config_.policy_delay) : 1;
    if ((updates_ + 1) % period != 0) return;

    const auto b = batch.obs.cols();
    nn::Mlp::Cache cache;
    const RealMatrix pre = actor_.forward(batch.obs, &cache);
    const RealMatrix a = pre.array().tanh();
    RealMatrix q;
    const RealMatrix dq_da =
        critic_action_grad(0, batch.obs, a, RealMatrix::Constant(1, b, 1.0 / static_cast<double>(b)), &q);
    // loss = -mean Q(o, tanh(h))
    const RealMatrix dpre = (-dq_da.array() * (1.0 - a.array().square())).matrix();
    std::vector<double> grad;
    actor_.backward(cache, dpre, &grad);
    nn::adam_step(actor_.params(), grad, actor_adam_);
    stats.actor_loss = -q.mean();
    require_finite(stats.actor_loss, "actor loss");

    nn::soft_update(actor_target_, actor_, config_.tau);
    soft_update_critics();
  }

  nn::Mlp actor_;
  nn::Mlp actor_target_;
  nn::AdamState actor_adam_;
};

// ---------------------------------------------------------------------------
// SAC: tanh-squashed Gaussian actor with twin critics and tuned temperature.

class SacAgent final : public OffPolicyAgent {
 public:
  SacAgent(const AgentConfig& config, Rng init_rng)
      : OffPolicyAgent(config, 2, init_rng),
        actor_(layer_sizes(config_.obs_dim, config_.hidden, 2 * config_.action_dim), init_rng,
               config_.zero_init_actor),
        actor_adam_(make_adam(config_.lr)),
        log_alpha_(std::log(config_.sac_init_alpha)),
        alpha_adam_(make_adam(config_.lr)) {}

  std::vector<double> act(const Observation& obs, bool deterministic, Rng& rng) override {
    const RealVector out = actor_.forward(obs_vector(obs));
    const int n = config_.action_dim;
    std::vector<double> a(n);
    for (int k = 0; k < n; ++k) {
      double u = out(k);
      if (!deterministic) u += std::exp(squash_log_std(out(n + k))) * rng.gaussian();
      a[k] = std::tanh(u);
    }
    return a;
  }

  Policy export_policy() const override { return Policy(Algorithm::kSac, actor_, config_.action_dim); }

  double alpha() const { return std::exp(log_alpha_); }

  void save_state(CheckpointData& data) const override {
    OffPolicyAgent::save_state(data);
    save_mlp(data, "actor", actor_);
    save_adam(data, "actor", actor_adam_);
    const double la[1] = {log_alpha_};
    data.put("log_alpha", la);
    save_adam(data, "log_alpha", alpha_adam_);
  }

  void load_state(const CheckpointData& data) override {
    OffPolicyAgent::load_state(data);
    load_mlp(data, "actor", actor_);
    load_adam(data, "actor", actor_adam_);
    log_alpha_ = data.get("log_alpha", 1)[0];
    load_adam(data, "log_alpha", alpha_adam_);
  }

 private:
  static double squash_log_std(double raw) {
    return kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(raw) + 1.0);
  }

  void actor_step(const ReplayBuffer::Batch& batch, UpdateStats& stats) override {
    const int n = config_.action_dim;
    const auto b = batch.obs.cols();
    const double inv_b = 1.0 / static_cast<double>(b);
    const double alpha = std::exp(log_alpha_);

    nn::Mlp::Cache cache;
    const RealMatrix out = actor_.forward(batch.obs, &cache);
    RealMatrix xi(n, b), sigma(n, b), a(n, b);
    RealVector log_pi = RealVector::Zero(b);
    for (Eigen::Index s = 0; s < b; ++s) {
      for (int k = 0; k < n; ++k) {
        const double log_std = squash_log_std(out(n + k, s));
        const double z = update_rng_.gaussian();
        xi(k, s) = z;
        sigma(k, s) = std::exp(log_std);
        a(k, s) = std::tanh(out(k, s) + sigma(k, s) * z);
        log_pi(s) += -0.5 * z * z - log_std - kHalfLog2Pi - std::log(1.0 - a(k, s) * a(k, s) + kTanhEps);
      }
    }

    // Gradient of min(Q1, Q2): route each sample through the smaller critic.
    RealMatrix q1, q2;
    critic_values_into(batch.obs, a, q1, q2);
    RealMatrix w1(1, b), w2(1, b);
    for (Eigen::Index s = 0; s < b; ++s) {
      const bool first = q1(0, s) <= q2(0, s);
      w1(0, s) = first ? 1.0 : 0.0;
      w2(0, s) = first ? 0.0 : 1.0;
    }
    const RealMatrix dq_da = critic_action_grad(0, batch.obs, a, w1) + critic_action_grad(1, batch.obs, a, w2);

    // loss = mean(alpha * log_pi - min Q)
    RealMatrix dout(2 * n, b);
    double q_min_sum = 0.0;
    for (Eigen::Index s = 0; s < b; ++s) {
      q_min_sum += std::min(q1(0, s), q2(0, s));
      for (int k = 0; k < n; ++k) {
        const double ak = a(k, s);
        const double one_minus = 1.0 - ak * ak;
        const double du = inv_b * (-dq_da(k, s) * one_minus + alpha * 2.0 * ak * one_minus / (one_minus + kTanhEps));
        dout(k, s) = du;
        const double dlog_std = du * sigma(k, s) * xi(k, s) - alpha * inv_b;
        const double t = std::tanh(out(n + k, s));
        dout(n + k, s) = dlog_std * 0.5 * (kLogStdMax - kLogStdMin) * (1.0 - t * t);
      }
    }
    std::vector<double> grad;
    actor_.backward(cache, dout, &grad);
    nn::adam_step(actor_.params(), grad, actor_adam_);
    stats.actor_loss = alpha * log_pi.mean() - q_min_sum * inv_b;
    require_finite(stats.actor_loss, "actor loss");

    if (config_.sac_auto_entropy) {
      const double target_entropy = -static_cast<double>(n);
      const double g[1] = {-(log_pi.mean() + target_entropy)};
      double la[1] = {log_alpha_};
      nn::adam_step(la, g, alpha_adam_);
      log_alpha_ = la[0];
    }
    stats.alpha = std::exp(log_alpha_);
    soft_update_critics();
  }

  void critic_values_into(const RealMatrix& obs, const RealMatrix& a, RealMatrix& q1, RealMatrix& q2) const {
    const RealMatrix input = stack(obs, a);
    q1 = critics_[0].forward(input);
    q2 = critics_[1].forward(input);
  }

  nn::Mlp actor_;
  nn::AdamState actor_adam_;
  double log_alpha_;
  nn::AdamState alpha_adam_;
};

// ---------------------------------------------------------------------------
// PPO: Gaussian actor with a state-independent log-std, value baseline V(o) -> r.

class PpoAgent final : public Agent {
 public:
  PpoAgent(const AgentConfig& config, Rng init_rng)
      : Agent(config),
        actor_(layer_sizes(config_.obs_dim, config_.hidden, config_.action_dim), init_rng, config_.zero_init_actor),
        critic_(layer_sizes(config_.obs_dim, config_.hidden, 1), init_rng),
        log_std_(config_.action_dim, config_.ppo_init_log_std),
        actor_adam_(make_adam(config_.lr)),
        log_std_adam_(make_adam(config_.lr)),
        critic_adam_(make_adam(config_.lr)),
        update_rng_(stream_seed(config_.seed, Stream::kReplay)) {}

  std::vector<double> act(const Observation& obs, bool deterministic, Rng& rng) override {
    const RealVector mean = actor_.forward(obs_vector(obs));
    const int n = config_.action_dim;
    std::vector<double> a(n);
    pending_raw_.assign(n, 0.0);
    pending_log_prob_ = 0.0;
    for (int k = 0; k < n; ++k) {
      const double z = deterministic ? 0.0 : rng.gaussian();
      const double u = mean(k) + std::exp(log_std_[k]) * z;
      pending_raw_[k] = u;
      pending_log_prob_ += -0.5 * z * z - log_std_[k] - kHalfLog2Pi;
      a[k] = std::clamp(u, -1.0, 1.0);
    }
    has_pending_ = true;
    return a;
  }

  void record(const Observation& obs, const std::vector<double>& action, double reward) override {
    std::vector<double> raw = action;
    double log_prob = 0.0;
    if (has_pending_) {
      raw = pending_raw_;
      log_prob = pending_log_prob_;
      has_pending_ = false;
    } else {
      // Externally chosen action: score it under the current policy.
      const RealVector mean = actor_.forward(obs_vector(obs));
      for (int k = 0; k < config_.action_dim; ++k) {
        const double z = (raw[k] - mean(k)) / std::exp(log_std_[k]);
        log_prob += -0.5 * z * z - log_std_[k] - kHalfLog2Pi;
      }
    }
    rollout_obs_.push_back(obs);
    rollout_raw_.push_back(std::move(raw));
    rollout_log_prob_.push_back(log_prob);
    rollout_reward_.push_back(reward);
  }

  bool ready_to_update() const override { return static_cast<int>(rollout_reward_.size()) >= config_.ppo_rollout; }

  UpdateStats update() override {
    UpdateStats stats;
    if (!ready_to_update()) {
      ++skipped_;
      return stats;
    }
    const int n = config_.action_dim;
    const auto m = static_cast<Eigen::Index>(rollout_reward_.size());
    RealMatrix obs(config_.obs_dim, m), raw(n, m);
    RealVector rewards(m), old_log_prob(m);
    for (Eigen::Index s = 0; s < m; ++s) {
      obs.col(s) = obs_vector(rollout_obs_[s]);
      raw.col(s) = Eigen::Map<const RealVector>(rollout_raw_[s].data(), n);
      rewards(s) = rollout_reward_[s];
      old_log_prob(s) = rollout_log_prob_[s];
    }
    RealVector adv = rewards - critic_.forward(obs).row(0).transpose();
    const double adv_mean = adv.mean();
    const double adv_std = std::sqrt((adv.array() - adv_mean).square().mean());
    // Constant advantages carry no signal; dividing rounding residue by a tiny
    // std would hand Adam a spurious direction.
    if (adv_std <= 1e-12 * std::max(1.0, std::abs(adv_mean)))
      adv.setZero();
    else
      adv = ((adv.array() - adv_mean) / (adv_std + 1e-8)).matrix();

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    double policy_loss_sum = 0.0, value_loss_sum = 0.0;
    int minibatches = 0;
    for (int epoch = 0; epoch < config_.ppo_epochs; ++epoch) {
      for (Eigen::Index k = m - 1; k > 0; --k)
        std::swap(order[k], order[update_rng_.index(static_cast<std::uint64_t>(k + 1))]);
      for (Eigen::Index start = 0; start < m; start += config_.ppo_minibatch) {
        const Eigen::Index b = std::min<Eigen::Index>(config_.ppo_minibatch, m - start);
        RealMatrix mb_obs(config_.obs_dim, b), mb_raw(n, b);
        RealVector mb_adv(b), mb_ret(b), mb_old(b);
        for (Eigen::Index s = 0; s < b; ++s) {
          const int idx = order[start + s];
          mb_obs.col(s) = obs.col(idx);
          mb_raw.col(s) = raw.col(idx);
          mb_adv(s) = adv(idx);
          mb_ret(s) = rewards(idx);
          mb_old(s) = old_log_prob(idx);
        }
        policy_loss_sum += policy_step(mb_obs, mb_raw, mb_adv, mb_old);
        value_loss_sum += value_step(mb_obs, mb_ret);
        ++minibatches;
      }
    }
    rollout_obs_.clear();
    rollout_raw_.clear();
    rollout_log_prob_.clear();
    rollout_reward_.clear();
    ++updates_;
    stats.performed = true;
    stats.actor_loss = policy_loss_sum / minibatches;
    stats.critic_loss = value_loss_sum / minibatches;
    require_finite(stats.actor_loss, "policy loss");
    require_finite(stats.critic_loss, "value loss");
    return stats;
  }

  Policy export_policy() const override { return Policy(Algorithm::kPpo, actor_, config_.action_dim); }

  std::vector<double> critic_outputs(const Observation& obs, const std::vector<double>&) const override {
    return {critic_.forward(obs_vector(obs))(0)};
  }

  void save_state(CheckpointData& data) const override {
    Agent::save_state(data);
    save_mlp(data, "actor", actor_);
    save_mlp(data, "critic", critic_);
    data.put("log_std", log_std_);
    save_adam(data, "actor", actor_adam_);
    save_adam(data, "log_std", log_std_adam_);
    save_adam(data, "critic", critic_adam_);
    // Partial rollout: obs(3) + raw(n) + log_prob + reward per item.
    std::vector<double> flat;
    for (std::size_t s = 0; s < rollout_reward_.size(); ++s) {
      flat.insert(flat.end(), rollout_obs_[s].o.begin(), rollout_obs_[s].o.end());
      flat.insert(flat.end(), rollout_raw_[s].begin(), rollout_raw_[s].end());
      flat.push_back(rollout_log_prob_[s]);
      flat.push_back(rollout_reward_[s]);
    }
    data.put("rollout", flat);
    data.meta["rollout_size"] = rollout_reward_.size();
    data.meta["rng"]["update"] = update_rng_.state();
  }

  void load_state(const CheckpointData& data) override {
    Agent::load_state(data);
    load_mlp(data, "actor", actor_);
    load_mlp(data, "critic", critic_);
    log_std_ = data.get("log_std", static_cast<std::size_t>(config_.action_dim));
    load_adam(data, "actor", actor_adam_);
    load_adam(data, "log_std", log_std_adam_);
    load_adam(data, "critic", critic_adam_);
    const auto count = data.meta.at("rollout_size").get<std::size_t>();
    const std::size_t row = 3 + config_.action_dim + 2;
    const auto& flat = data.get("rollout", count * row);
    rollout_obs_.clear();
    rollout_raw_.clear();
    rollout_log_prob_.clear();
    rollout_reward_.clear();
    for (std::size_t s = 0; s < count; ++s) {
      const double* p = flat.data() + s * row;
      Observation o;
      std::copy(p, p + 3, o.o.begin());
      rollout_obs_.push_back(o);
      rollout_raw_.emplace_back(p + 3, p + 3 + config_.action_dim);
      rollout_log_prob_.push_back(p[row - 2]);
      rollout_reward_.push_back(p[row - 1]);
    }
    update_rng_.set_state(data.meta.at("rng").at("update").get<std::string>());
  }

  const std::vector<double>& log_std() const { return log_std_; }

 private:
  double policy_step(const RealMatrix& obs, const RealMatrix& raw, const RealVector& adv, const RealVector& old_lp) {
    const int n = config_.action_dim;
    const auto b = obs.cols();
    const double inv_b = 1.0 / static_cast<double>(b);
    nn::Mlp::Cache cache;
    const RealMatrix mean = actor_.forward(obs, &cache);
    RealMatrix dmean(n, b);
    std::vector<double> dlog_std(n, 0.0);
    double loss = 0.0;
    for (Eigen::Index s = 0; s < b; ++s) {
      double lp = 0.0;
      for (int k = 0; k < n; ++k) {
        const double z = (raw(k, s) - mean(k, s)) / std::exp(log_std_[k]);
        lp += -0.5 * z * z - log_std_[k] - kHalfLog2Pi;
      }
      const double ratio = std::exp(lp - old_lp(s));
      const double clipped = std::clamp(ratio, 1.0 - config_.ppo_clip, 1.0 + config_.ppo_clip);
      const double unclipped_term = ratio * adv(s);
      const double clipped_term = clipped * adv(s);
      loss -= std::min(unclipped_term, clipped_term) * inv_b;
      // d(-surrogate)/d log_prob; zero when the clipped branch is active.
      const double dlp = unclipped_term <= clipped_term ? -unclipped_term * inv_b : 0.0;
      for (int k = 0; k < n; ++k) {
        const double sd = std::exp(log_std_[k]);
        const double diff = raw(k, s) - mean(k, s);
        dmean(k, s) = dlp * diff / (sd * sd);
        dlog_std[k] += dlp * (diff * diff / (sd * sd) - 1.0);
      }
    }
    std::vector<double> grad;
    actor_.backward(cache, dmean, &grad);
    nn::adam_step(actor_.params(), grad, actor_adam_);
    nn::adam_step(log_std_, dlog_std, log_std_adam_);
    return loss;
  }

  double value_step(const RealMatrix& obs, const RealVector& returns) {
    const double inv_b = 1.0 / static_cast<double>(obs.cols());
    nn::Mlp::Cache cache;
    const RealMatrix v = critic_.forward(obs, &cache);
    const RealMatrix err = v - returns.transpose();
    std::vector<double> grad;
    critic_.backward(cache, config_.ppo_value_coef * 2.0 * inv_b * err, &grad);
    nn::adam_step(critic_.params(), grad, critic_adam_);
    return config_.ppo_value_coef * err.squaredNorm() * inv_b;
  }

  nn::Mlp actor_;
  nn::Mlp critic_;
  std::vector<double> log_std_;
  nn::AdamState actor_adam_;
  nn::AdamState log_std_adam_;
  nn::AdamState critic_adam_;
  Rng update_rng_;

  bool has_pending_ = false;
  std::vector<double> pending_raw_;
  double pending_log_prob_ = 0.0;
  std::vector<Observation> rollout_obs_;
  std::vector<std::vector<double>> rollout_raw_;
  std::vector<double> rollout_log_prob_;
  std::vector<double> rollout_reward_;
};

}  // namespace

// ---------------------------------------------------------------------------

Algorithm parse_algorithm(const std::string& name) {
  if (name == "sac") return Algorithm::kSac;
  if (name == "td3") return Algorithm::kTd3;
  if (name == "ddpg") return Algorithm::kDdpg;
  if (name == "ppo") return Algorithm::kPpo;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected sac, td3, ddpg or ppo)");
}

std::string algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kSac: return "sac";
    case Algorithm::kTd3: return "td3";
    case Algorithm::kDdpg: return "ddpg";
    case Algorithm::kPpo: return "ppo";
  }
  return "?";
}

bool is_off_policy(Algorithm algorithm) { return algorithm != Algorithm::kPpo; }

void AgentConfig::validate() const {
  if (obs_dim != 3) throw std::invalid_argument("agent: obs_dim must be 3");
  if (action_dim < 1) throw std::invalid_argument("agent: action_dim must be positive");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("agent: hidden sizes must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("agent: lr must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("agent: gamma must lie in [0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("agent: tau must lie in (0, 1]");
  if (batch_size < 1 || buffer_capacity < batch_size) throw std::invalid_argument("agent: need 1 <= batch <= capacity");
  if (warmup_steps < 0) throw std::invalid_argument("agent: warmup must be >= 0");
  if (!(exploration_sigma >= 0.0)) throw std::invalid_argument("agent: exploration_sigma must be >= 0");
  if (policy_delay < 1) throw std::invalid_argument("agent: policy_delay must be >= 1");
  if (!(sac_init_alpha > 0.0)) throw std::invalid_argument("agent: sac_init_alpha must be positive");
  if (ppo_rollout < 1 || ppo_epochs < 1 || ppo_minibatch < 1) throw std::invalid_argument("agent: bad PPO sizes");
  if (!(ppo_clip > 0.0)) throw std::invalid_argument("agent: ppo_clip must be positive");
}

Policy::Policy(Algorithm algorithm, nn::Mlp actor, int action_dim)
    : algorithm_(algorithm), actor_(std::move(actor)), action_dim_(action_dim) {
  const int expected = algorithm == Algorithm::kSac ? 2 * action_dim : action_dim;
  if (actor_.output_dim() != expected) throw CheckpointError("policy actor output size does not match action_dim");
}

std::vector<double> Policy::act(const Observation& obs) const {
  const RealVector out = actor_.forward(obs_vector(obs));
  std::vector<double> a(action_dim_);
  for (int k = 0; k < action_dim_; ++k)
    a[k] = algorithm_ == Algorithm::kPpo ? std::clamp(out(k), -1.0, 1.0) : std::tanh(out(k));
  return a;
}

void Agent::save_state(CheckpointData& data) const {
  data.meta["algorithm"] = algorithm_name(config_.algorithm);
  data.meta["obs_dim"] = config_.obs_dim;
  data.meta["action_dim"] = config_.action_dim;
  data.meta["agent_config"] = agent_config_to_json(config_);
  data.meta["seed"] = config_.seed;
  data.meta["updates"] = updates_;
  data.meta["step_count"] = updates_;
  data.meta["skipped_updates"] = skipped_;
}

void Agent::load_state(const CheckpointData& data) {
  updates_ = data.meta.at("updates").get<std::uint64_t>();
  skipped_ = data.meta.at("skipped_updates").get<std::uint64_t>();
}

std::unique_ptr<Agent> make_agent(const AgentConfig& config) {
  config.validate();
  Rng init_rng(stream_seed(config.seed, Stream::kAgentInit));
  switch (config.algorithm) {
    case Algorithm::kSac: return std::make_unique<SacAgent>(config, init_rng);
    case Algorithm::kTd3:
    case Algorithm::kDdpg: return std::make_unique<DeterministicAgent>(config, init_rng);
    case Algorithm::kPpo: return std::make_unique<PpoAgent>(config, init_rng);
  }
  throw std::logic_error("unreachable");
}

void save_agent(const std::filesystem::path& dir, const Agent& agent, const nlohmann::json& extra) {
  CheckpointData data;
  agent.save_state(data);
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) data.meta[k] = v;
  write_checkpoint(dir, data);
}

std::unique_ptr<Agent> load_agent(const std::filesystem::path& dir, CheckpointData* data_out) {
  CheckpointData data = read_checkpoint(dir);
  AgentConfig config;
  try {
    config = agent_config_from_json(data.meta.at("agent_config"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint agent_config: ") + e.what());
  }
  auto agent = make_agent(config);
  try {
    agent->load_state(data);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
  }
  if (data_out) *data_out = std::move(data);
  return agent;
}

Policy policy_import(const CheckpointData& data) {
  try {
    const Algorithm algorithm = parse_algorithm(data.meta.at("algorithm").get<std::string>());
    const int action_dim = data.meta.at("action_dim").get<int>();
    const auto sizes = data.meta.at("networks").at("actor").get<std::vector<int>>();
    nn::Mlp actor(sizes);
    const auto& v = data.get("actor", actor.num_params());
    std::copy(v.begin(), v.end(), actor.params().begin());
    return Policy(algorithm, std::move(actor), action_dim);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

Policy policy_import(const std::filesystem::path& dir) { return policy_import(read_checkpoint(dir)); }

nlohmann::json agent_config_to_json(const AgentConfig& c) {
  return {
      {"algorithm", algorithm_name(c.algorithm)},
      {"obs_dim", c.obs_dim},
      {"action_dim", c.action_dim},
      {"hidden", c.hidden},
      {"lr", c.lr},
      {"gamma", c.gamma},
      {"tau", c.tau},
      {"batch_size", c.batch_size},
      {"buffer_capacity", c.buffer_capacity},
      {"warmup_steps", c.warmup_steps},
      {"exploration_sigma", c.exploration_sigma},
      {"policy_delay", c.policy_delay},
      {"sac_init_alpha", c.sac_init_alpha},
      {"sac_auto_entropy", c.sac_auto_entropy},
      {"ppo_rollout", c.ppo_rollout},
      {"ppo_epochs", c.ppo_epochs},
      {"ppo_minibatch", c.ppo_minibatch},
      {"ppo_clip", c.ppo_clip},
      {"ppo_value_coef", c.ppo_value_coef},
      {"ppo_init_log_std", c.ppo_init_log_std},
      {"zero_init_actor", c.zero_init_actor},
      {"seed", c.seed},
  };
}

AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig c) {
  const std::string ctx = "agent";
  reject_unknown_keys(j,
                      {"algorithm", "obs_dim", "action_dim", "hidden", "lr", "gamma", "tau", "batch_size",
                       "buffer_capacity", "warmup_steps", "exploration_sigma", "policy_delay", "sac_init_alpha",
                       "sac_auto_entropy", "ppo_rollout", "ppo_epochs", "ppo_minibatch", "ppo_clip",
                       "ppo_value_coef", "ppo_init_log_std", "zero_init_actor", "seed"},
                      ctx);
  if (j.contains("algorithm")) {
    try {
      c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(ctx + ".algorithm: " + e.what());
    }
  }
  read_if_present(j, "obs_dim", c.obs_dim, ctx);
  read_if_present(j, "action_dim", c.action_dim, ctx);
  read_if_present(j, "hidden", c.hidden, ctx);
  read_if_present(j, "lr", c.lr, ctx);
  read_if_present(j, "gamma", c.gamma, ctx);
  read_if_present(j, "tau", c.tau, ctx);
  read_if_present(j, "batch_size", c.batch_size, ctx);
  read_if_present(j, "buffer_capacity", c.buffer_capacity, ctx);
  read_if_present(j, "warmup_steps", c.warmup_steps, ctx);
  read_if_present(j, "exploration_sigma", c.exploration_sigma, ctx);
  read_if_present(j, "policy_delay", c.policy_delay, ctx);
  read_if_present(j, "sac_init_alpha", c.sac_init_alpha, ctx);
  read_if_present(j, "sac_auto_entropy", c.sac_auto_entropy, ctx);
  read_if_present(j, "ppo_rollout", c.ppo_rollout, ctx);
  read_if_present(j, "ppo_epochs", c.ppo_epochs, ctx);
  read_if_present(j, "ppo_minibatch", c.ppo_minibatch, ctx);
  read_if_present(j, "ppo_clip", c.ppo_clip, ctx);
  read_if_present(j, "ppo_value_coef", c.ppo_value_coef, ctx);
  read_if_present(j, "ppo_init_log_std", c.ppo_init_log_std, ctx);
  read_if_present(j, "zero_init_actor", c.zero_init_actor, ctx);
  read_if_present(j, "seed", c.seed, ctx);
  return c;
}

}  // namespace quditcal
