#include <cmath>
#include <numbers>

#include "doctest.h"
#include "quditcal/grape.hpp"
#include "quditcal/rng.hpp"

using namespace quditcal;

namespace {

double fid(const PulseSet& p, const DeviceParams& d, const ComplexMatrix& v) { return avg_gate_fidelity(propagate(p, d), v); }

}  // namespace

TEST_CASE("init_pulse") {
  GrapeConfig c;
  const PulseSet a = init_pulse(c);
  CHECK(a.n_slices() == 160);
  CHECK(a == init_pulse(c));
  double peak = 0.0;
  for (const auto& ch : a.channels)
    for (double x : ch) peak = std::max(peak, std::abs(x));
  CHECK(peak <= c.init_amplitude);
  CHECK(peak > 0.09);

  c.init_amplitude = 0.0;
  for (const auto& ch : init_pulse(c).channels)
    for (double x : ch) CHECK(x == 0.0);

  c.init_amplitude = 0.5;
  CHECK_THROWS_AS(init_pulse(c), std::invalid_argument);
}

TEST_CASE("exact gradient against central differences") {
  Rng rng(2024);
  const double h = 1e-6;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = trial % 2 ? 8 : 4;
    PulseSet p(n, rng.uniform(2.0, 12.0), 0.3);
    for (auto& ch : p.channels)
      for (double& x : ch) x = rng.uniform(-0.25, 0.25);
    const DeviceParams d{rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(-0.1, 0.0), rng.uniform(-0.1, 0.0),
                         rng.uniform(1e-3, 5e-3)};
    const ComplexMatrix v = trial < 3 ? target_cz3() : target_alt();
    const FidelityGradient fg = fidelity_gradient(p, d, v);
    CHECK(fg.fidelity == doctest::Approx(fid(p, d, v)).epsilon(1e-13));
    for (int ch = 0; ch < 2; ++ch)
      for (int j = 0; j < n; ++j) {
        PulseSet up = p, dn = p;
        up.channels[ch][j] += h;
        dn.channels[ch][j] -= h;
        up.amp_bound = dn.amp_bound = 1.0;
        const double fd = (fid(up, d, v) - fid(dn, d, v)) / (2 * h);
        CHECK(std::abs(fg.gradient[ch][j] - fd) <= std::max(1e-6 * std::abs(fd), 1e-9));
      }
  }
}

TEST_CASE("gradient swap symmetry") {
  // Identical qutrits: swapping channels and reversing nothing maps channel 1 onto channel 2.
  Rng rng(7);
  PulseSet p(6, 8.0, 0.3);
  for (auto& ch : p.channels)
    for (double& x : ch) x = rng.uniform(-0.2, 0.2);
  const DeviceParams d{0.3, 0.3, -0.05, -0.05, 0.0025};
  PulseSet swapped = p;
  std::swap(swapped.channels[0], swapped.channels[1]);
  // CZ3 is symmetric under exchanging the qutrits.
  const auto g = grape_gradient(p, d, target_cz3());
  const auto gs = grape_gradient(swapped, d, target_cz3());
  for (int j = 0; j < 6; ++j) {
    CHECK(g[0][j] == doctest::Approx(gs[1][j]).epsilon(1e-10));
    CHECK(g[1][j] == doctest::Approx(gs[0][j]).epsilon(1e-10));
  }
}

TEST_CASE("optimizer bookkeeping") {
  GrapeConfig c;
  c.n_slices = 20;
  c.total_time = 800.0;
  c.max_iterations = 40;
  const DeviceParams d;
  const GrapeResult r = grape_optimize(c, d, target_cz3());
  REQUIRE_FALSE(r.infidelity_history.empty());
  CHECK(r.iterations_used == static_cast<int>(r.infidelity_history.size()));
  CHECK(r.infidelity_history.front() == doctest::Approx(1.0 - fid(init_pulse(c), d, target_cz3())).epsilon(1e-12));
  for (std::size_t i = 1; i < r.infidelity_history.size(); ++i)
    CHECK(r.infidelity_history[i] <= r.infidelity_history[i - 1]);
  CHECK(std::abs(r.final_infidelity - (1.0 - fid(r.pulse, d, target_cz3()))) <= 1e-14);
  CHECK(r.final_infidelity == r.infidelity_history.back());
  for (const auto& ch : r.pulse.channels)
    for (double x : ch) CHECK(std::abs(x) <= c.amp_bound);

  const GrapeResult again = grape_optimize(c, d, target_cz3());
  CHECK(again.pulse == r.pulse);
  CHECK(again.infidelity_history == r.infidelity_history);
}

TEST_CASE("iteration zero on a zero pulse") {
  GrapeConfig c;
  c.n_slices = 5;
  c.total_time = 50.0;
  c.init_amplitude = 0.0;
  c.max_iterations = 1;
  const DeviceParams d{0.7, 1.3, -0.05, -0.05, 0.0025};
  const ComplexMatrix id = ComplexMatrix::Identity(9, 9);
  const GrapeResult r = grape_optimize(c, d, id);
  const double expected = 1.0 - avg_gate_fidelity(herm_expm(build_drift(d), 50.0), id);
  CHECK(r.infidelity_history.front() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("small problem converges and the optimum is stationary") {
  // Curvature at dt = 10 is large, so a stationary point is certified at a
  // tighter threshold than the default.
  GrapeConfig c;
  c.target_infidelity = 1e-13;
  const DeviceParams d;
  const GrapeResult r = grape_optimize_best(c, d, target_cz3(), 3);
  REQUIRE(r.converged);
  CHECK(r.final_infidelity <= c.target_infidelity);
  const auto g = grape_gradient(r.pulse, d, target_cz3());
  for (int ch = 0; ch < 2; ++ch)
    for (int j = 0; j < c.n_slices; ++j)
      if (std::abs(r.pulse.channels[ch][j]) < c.amp_bound) CHECK(std::abs(g[ch][j]) <= 1e-5);
}

TEST_CASE("speed limit estimate") {
  const SpeedLimit s = min_time_estimate(0.0025);
  CHECK(s.t0 == doctest::Approx(314.159265).epsilon(1e-8));
  CHECK(s.tmin == doctest::Approx(628.318531).epsilon(1e-8));
  CHECK(min_time_estimate(0.005).t0 == doctest::Approx(s.t0 / 2));
  CHECK(min_time_estimate(std::numbers::pi / 4).t0 == doctest::Approx(1.0));
  CHECK_THROWS(min_time_estimate(0.0));
}

TEST_CASE("config validation") {
  GrapeConfig c;
  c.target_infidelity = 0.0;
  CHECK_THROWS(c.validate());
  c = GrapeConfig{};
  c.n_slices = 0;
  CHECK_THROWS(c.validate());
  CHECK_THROWS(grape_optimize_best(GrapeConfig{}, DeviceParams{}, target_cz3(), 0));
}
