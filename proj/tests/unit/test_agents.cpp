#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "quditcal/agents.hpp"

using namespace quditcal;

namespace {

AgentConfig small_config(Algorithm algorithm, int action_dim = 2) {
  AgentConfig c;
  c.algorithm = algorithm;
  c.action_dim = action_dim;
  c.hidden = {32, 32};
  c.batch_size = 32;
  c.buffer_capacity = 5000;
  c.warmup_steps = 64;
  c.lr = 1e-3;
  c.ppo_rollout = 256;
  c.ppo_minibatch = 64;
  c.seed = 3;
  return c;
}

Observation random_obs(Rng& rng) {
  Observation o;
  for (double& x : o.o) x = rng.uniform(-1, 1);
  return o;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("quditcal_agents_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Reward peaks at a fixed action; a working agent must move its mean there.
double toy_reward(const std::vector<double>& a) {
  const double t[2] = {0.5, -0.3};
  return -((a[0] - t[0]) * (a[0] - t[0]) + (a[1] - t[1]) * (a[1] - t[1]));
}

void run_toy(Agent& agent, int steps, std::uint64_t seed) {
  Rng env(seed), explore(seed + 1);
  for (int i = 0; i < steps; ++i) {
    const Observation o = random_obs(env);
    const auto a = agent.act(o, false, explore);
    agent.record(o, a, toy_reward(a));
    if (is_off_policy(agent.algorithm()) || agent.ready_to_update()) agent.update();
  }
}

const Algorithm kAll[] = {Algorithm::kSac, Algorithm::kTd3, Algorithm::kDdpg, Algorithm::kPpo};

}  // namespace

TEST_CASE("algorithm names") {
  for (Algorithm a : kAll) CHECK(parse_algorithm(algorithm_name(a)) == a);
  CHECK_THROWS(parse_algorithm("a2c"));
  CHECK_FALSE(is_off_policy(Algorithm::kPpo));
  AgentConfig c;
  c.tau = 0.0;
  CHECK_THROWS(c.validate());
  c = AgentConfig{};
  c.obs_dim = 4;
  CHECK_THROWS(c.validate());
}

TEST_CASE("actions stay in the box and deterministic actions repeat") {
  for (Algorithm alg : kAll) {
    AgentConfig c = small_config(alg, 6);
    c.zero_init_actor = false;
    c.exploration_sigma = 2.0;
    c.ppo_init_log_std = 1.0;
    auto agent = make_agent(c);
    Rng rng(1);
    for (int i = 0; i < 10000; ++i)
      for (double x : agent->act(random_obs(rng), false, rng)) CHECK((x >= -1.0 && x <= 1.0));
    const Observation o = random_obs(rng);
    CHECK(agent->act(o, true, rng) == agent->act(o, true, rng));
  }
}

TEST_CASE("zero-initialized actors emit the zero correction") {
  for (Algorithm alg : kAll) {
    auto agent = make_agent(small_config(alg, 40));
    Rng rng(2);
    for (double x : agent->act(random_obs(rng), true, rng)) CHECK(x == 0.0);
  }
}

TEST_CASE("critics regress to a constant reward") {
  for (Algorithm alg : {Algorithm::kTd3, Algorithm::kSac, Algorithm::kDdpg}) {
    auto agent = make_agent(small_config(alg));
    Rng rng(4);
    const double c = 0.37;
    for (int i = 0; i < 5000; ++i) {
      const Observation o = random_obs(rng);
      const auto a = agent->act(o, false, rng);
      agent->record(o, a, c);
      agent->update();
    }
    for (int i = 0; i < 20; ++i) {
      const Observation o = random_obs(rng);
      for (double q : agent->critic_outputs(o, agent->act(o, true, rng))) CHECK(std::abs(q - c) <= 1e-3);
    }
  }
}

TEST_CASE("updates before warmup are counted no-ops") {
  auto agent = make_agent(small_config(Algorithm::kTd3));
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    const Observation o = random_obs(rng);
    agent->record(o, agent->act(o, false, rng), 0.0);
    CHECK_FALSE(agent->update().performed);
  }
  CHECK(agent->skipped_updates() == 10);
  CHECK(agent->updates_done() == 0);
}

TEST_CASE("gamma never enters the targets") {
  AgentConfig a = small_config(Algorithm::kTd3);
  AgentConfig b = a;
  b.gamma = 0.0;
  auto x = make_agent(a);
  auto y = make_agent(b);
  run_toy(*x, 300, 9);
  run_toy(*y, 300, 9);
  const auto px = x->export_policy().actor().params();
  const auto py = y->export_policy().actor().params();
  CHECK(std::ranges::equal(px, py));
}

TEST_CASE("PPO ignores the surrogate when every advantage is zero") {
  auto agent = make_agent(small_config(Algorithm::kPpo));
  Rng rng(6);
  const Observation o{{0.1, -0.2, 0.3}};
  const Policy before = agent->export_policy();
  for (int i = 0; i < 256; ++i) agent->record(o, agent->act(o, false, rng), 0.25);
  CHECK(agent->update().performed);
  CHECK(std::ranges::equal(before.actor().params(), agent->export_policy().actor().params()));
}

TEST_CASE("agents learn a toy bandit") {
  for (Algorithm alg : kAll) {
    CAPTURE(algorithm_name(alg));
    auto agent = make_agent(small_config(alg));
    run_toy(*agent, alg == Algorithm::kPpo ? 8192 : 3000, 11);
    Rng rng(12);
    const auto a = agent->act(random_obs(rng), true, rng);
    CHECK(a[0] == doctest::Approx(0.5).epsilon(0.2));
    CHECK(a[1] == doctest::Approx(-0.3).epsilon(0.2));
  }
}

TEST_CASE("export, import and full-state round trips") {
  for (Algorithm alg : kAll) {
    auto agent = make_agent(small_config(alg));
    run_toy(*agent, 300, 13);
    const auto dir = temp_dir(algorithm_name(alg));
    save_agent(dir, *agent);

    const Policy p = policy_import(dir);
    Rng rng(14);
    for (int i = 0; i < 5; ++i) {
      const Observation o = random_obs(rng);
      CHECK(p.act(o) == agent->act(o, true, rng));
    }
    const CheckpointData data = read_checkpoint(dir);
    CHECK(data.meta.at("algorithm") == algorithm_name(alg));
    CHECK(data.meta.at("action_dim") == 2);
    CHECK(data.meta.at("obs_dim") == 3);

    // A restored agent continues exactly like the original.
    auto restored = load_agent(dir);
    run_toy(*agent, 100, 15);
    run_toy(*restored, 100, 15);
    CHECK(std::ranges::equal(agent->export_policy().actor().params(), restored->export_policy().actor().params()));
    CHECK(agent->updates_done() == restored->updates_done());
  }
}

TEST_CASE("corrupted checkpoints are rejected") {
  auto agent = make_agent(small_config(Algorithm::kTd3));
  const auto dir = temp_dir("corrupt");
  CheckpointData data;
  agent->save_state(data);
  for (auto& [name, values] : data.blobs)
    if (name == "actor") values.pop_back();
  write_checkpoint(dir, data);
  CHECK_THROWS_AS(policy_import(dir), CheckpointError);
  CHECK_THROWS_AS(load_agent(dir), CheckpointError);
}

TEST_CASE("agent config JSON") {
  AgentConfig c = small_config(Algorithm::kSac);
  c.sac_init_alpha = 0.05;
  const AgentConfig back = agent_config_from_json(agent_config_to_json(c));
  CHECK(agent_config_to_json(back) == agent_config_to_json(c));
  CHECK_THROWS_AS(agent_config_from_json({{"learning_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(agent_config_from_json({{"lr", "fast"}}), ConfigError);
}
