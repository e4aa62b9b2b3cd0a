#include <cmath>
#include <numbers>

#include "doctest.h"
#include "quditcal/environment.hpp"

using namespace quditcal;

namespace {

// A short, quickly simulated baseline shared by the environment tests.
EnvConfig small_env(int n = 16, int k = 4) {
  EnvConfig c;
  c.baseline = PulseSet(n, 10.0, 0.3);
  Rng rng(4);
  for (auto& ch : c.baseline.channels)
    for (double& x : ch) x = rng.uniform(-0.3, 0.3);
  c.baseline.channels[0][0] = 0.3;
  c.modes = k;
  c.target = target_cz3();
  return c;
}

}  // namespace

TEST_CASE("cosine basis") {
  const CosineBasis b = cosine_basis(4, 1);
  const double expected[4] = {0.65328, 0.27060, -0.27060, -0.65328};
  for (int j = 0; j < 4; ++j) CHECK(b.matrix(j, 0) == doctest::Approx(expected[j]).epsilon(1e-4));
  CHECK(b.matrix(0, 0) == doctest::Approx(std::cos(std::numbers::pi / 8) / std::sqrt(2.0)).epsilon(1e-15));

  const CosineBasis big = cosine_basis(160, 20);
  const RealMatrix gram = big.matrix.transpose() * big.matrix;
  CHECK((gram - RealMatrix::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS(cosine_basis(4, 5));
  CHECK_THROWS(cosine_basis(0, 1));
}

TEST_CASE("residual decoding") {
  const CosineBasis b = cosine_basis(4, 1);
  const std::vector<double> zero(2, 0.0);
  const Residual r0 = residual_from_action(zero, b, 0.03);
  for (const auto& ch : r0.channels)
    for (double x : ch) CHECK(x == 0.0);

  const std::vector<double> a{1.0, 0.0};
  const Residual r = residual_from_action(a, b, 0.03);
  for (int j = 0; j < 4; ++j) {
    CHECK(r.channels[0][j] == doctest::Approx(0.03 * b.matrix(j, 0)).epsilon(1e-15));
    CHECK(r.channels[1][j] == 0.0);
  }

  const std::vector<double> over{1.5, -2.0};
  const Residual clamped = residual_from_action(over, b, 0.03);
  CHECK(clamped.clamped == 2);
  CHECK(clamped.channels[0][0] == doctest::Approx(0.03 * b.matrix(0, 0)));

  const CosineBasis b5 = cosine_basis(16, 5);
  Rng rng(1);
  std::vector<double> act(10), half(10);
  for (int i = 0; i < 10; ++i) {
    act[i] = rng.uniform(-1, 1);
    half[i] = 0.5 * act[i];
  }
  const Residual full = residual_from_action(act, b5, 0.03);
  const Residual part = residual_from_action(half, b5, 0.06);
  for (int ch = 0; ch < 2; ++ch)
    for (int j = 0; j < 16; ++j) CHECK(full.channels[ch][j] == doctest::Approx(part.channels[ch][j]).epsilon(1e-14));
  CHECK_THROWS(residual_from_action(std::vector<double>(3, 0.0), b, 0.03));
}

TEST_CASE("compose_pulse clipping") {
  PulseSet base(2, 10.0, 0.3);
  base.channels = {std::vector<double>{0.3, -0.29}, std::vector<double>{0.0, 0.1}};
  const PulseSet out = compose_pulse(base, {std::vector<double>{0.05, -0.05}, std::vector<double>{0.0, 0.0}}, 0.3);
  CHECK(out.channels[0][0] == 0.3);
  CHECK(out.channels[0][1] == -0.3);
  CHECK(out.channels[1] == base.channels[1]);
  CHECK(compose_pulse(base, {std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)}, 0.3) == base);
}

TEST_CASE("observations") {
  EnvConfig c = small_env();
  Rng rng(3);
  const NoiseConfig& n = c.noise;
  auto o = make_observation({n.sigma_omega, n.sigma_omega, n.sigma_g}, c, rng);
  CHECK(o.o[0] == doctest::Approx(1.0));
  CHECK(o.o[1] == doctest::Approx(1.0));
  CHECK(o.o[2] == doctest::Approx(1.0));
  o = make_observation({5 * n.sigma_omega, 0.0, 0.0}, c, rng);
  CHECK(o.o[0] == 3.0);
  CHECK(o.o[1] == 0.0);

  c.est_eta_omega = 0.1 * n.sigma_omega;
  double s = 0, sq = 0;
  const int count = 10000;
  for (int i = 0; i < count; ++i) {
    const double x = make_observation({}, c, rng).o[0];
    s += x;
    sq += x * x;
  }
  const double sd = std::sqrt(sq / count - (s / count) * (s / count));
  CHECK(std::abs(sd - 0.1) <= 0.003);

  c.noise.sigma_g = 0.0;
  CHECK_THROWS(make_observation({0.0, 0.0, 1e-6}, c, rng));
}

TEST_CASE("episodes") {
  const EnvConfig c = small_env();
  const CosineBasis b = cosine_basis(16, 4);
  Rng dev(1), est(2);
  const ActionProvider zero = [](const Observation&) { return std::vector<double>(8, 0.0); };
  for (int i = 0; i < 20; ++i) {
    const EpisodeRecord r = env_episode(zero, c, b, dev, est);
    CHECK(r.reward == 0.0);
    CHECK(r.f_rl == r.f_oct);
  }

  Rng arng(5);
  const ActionProvider random = [&](const Observation&) {
    std::vector<double> a(8);
    for (double& x : a) x = arng.uniform(-1, 1);
    return a;
  };
  for (int i = 0; i < 10; ++i) {
    const EpisodeRecord r = env_episode(random, c, b, dev, est);
    CHECK(r.reward == r.f_rl - r.f_oct);
    CHECK((r.reward > 0) == (r.f_rl > r.f_oct));
    const PulseSet played = decode_action(r.action, c, b);
    const DeviceParams truth = apply_offsets(c.nominal, r.offsets);
    CHECK(r.f_rl == avg_gate_fidelity(propagate(played, truth), c.target));
    CHECK(r.f_oct == avg_gate_fidelity(propagate(c.baseline, truth), c.target));
    played.validate();
  }
}

TEST_CASE("estimation noise never reaches the dynamics") {
  EnvConfig quiet = small_env();
  EnvConfig noisy = quiet;
  noisy.est_eta_omega = 0.5 * quiet.noise.sigma_omega;
  noisy.est_eta_g = 0.5 * quiet.noise.sigma_g;
  const CosineBasis b = cosine_basis(16, 4);
  const ActionProvider fixed = [](const Observation&) { return std::vector<double>(8, 0.4); };
  Rng d1(9), d2(9), e1(3), e2(3);
  for (int i = 0; i < 5; ++i) {
    const EpisodeRecord a = env_episode(fixed, quiet, b, d1, e1);
    const EpisodeRecord n = env_episode(fixed, noisy, b, d2, e2);
    CHECK(a.offsets == n.offsets);
    CHECK(a.f_oct == n.f_oct);
    CHECK(a.f_rl == n.f_rl);
    CHECK(a.observation.o != n.observation.o);
  }
}

TEST_CASE("direct mode") {
  EnvConfig c = small_env(8, 2);
  c.mode = EnvMode::kDirect;
  CHECK(c.action_dim() == 16);
  const EpisodeRecord z = direct_env_episode([](const Observation&) { return std::vector<double>(16, 0.0); }, c);
  CHECK(z.f_oct == 0.0);
  CHECK(z.reward == z.f_rl);
  CHECK(z.f_rl == doctest::Approx(avg_gate_fidelity(herm_expm(build_drift(c.nominal), 80.0), c.target)).epsilon(1e-12));

  const PulseSet ones = decode_action(std::vector<double>(16, 1.0), c, CosineBasis{});
  for (const auto& ch : ones.channels)
    for (double x : ch) CHECK(x == 0.3);

  Rng rng(8);
  std::vector<double> a(16);
  for (double& x : a) x = rng.uniform(-1, 1);
  const EpisodeRecord r = direct_env_episode([&](const Observation&) { return a; }, c);
  PulseSet p(8, 10.0, 0.3);
  for (int j = 0; j < 8; ++j) {
    p.channels[0][j] = 0.3 * a[j];
    p.channels[1][j] = 0.3 * a[8 + j];
  }
  CHECK(r.f_rl == avg_gate_fidelity(propagate(p, c.nominal), c.target));

  c.mode = EnvMode::kResidual;
  CHECK_THROWS(direct_env_episode([](const Observation&) { return std::vector<double>(16, 0.0); }, c));
}

TEST_CASE("stateful environment is reproducible and resumable") {
  const EnvConfig c = small_env();
  const ActionProvider zero = [](const Observation&) { return std::vector<double>(8, 0.0); };
  CalibrationEnv a(c, 17), b(c, 17);
  for (int i = 0; i < 3; ++i) a.step(zero);
  b.set_state(a.state());
  for (int i = 0; i < 3; ++i) {
    const EpisodeRecord x = a.step(zero), y = b.step(zero);
    CHECK(x.offsets == y.offsets);
    CHECK(x.observation.o == y.observation.o);
  }
  EnvConfig bad = c;
  bad.modes = 17;
  CHECK_THROWS(CalibrationEnv(bad, 0));
}
