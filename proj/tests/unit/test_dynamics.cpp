#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "quditcal/dynamics.hpp"
#include "quditcal/rng.hpp"

using namespace quditcal;

namespace {

// Scaling-and-squaring Taylor series, independent of the eigen-solver path.
ComplexMatrix taylor_expm(const ComplexMatrix& h, double t, int terms = 30) {
  const Complex minus_i(0.0, -1.0);
  int squarings = 0;
  double scale = (h * t).cwiseAbs().maxCoeff();
  while (scale > 0.5) {
    scale /= 2.0;
    ++squarings;
  }
  const ComplexMatrix a = minus_i * t / std::pow(2.0, squarings) * h;
  ComplexMatrix sum = ComplexMatrix::Identity(h.rows(), h.cols());
  ComplexMatrix term = sum;
  for (int k = 1; k <= terms; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

ComplexMatrix random_hermitian(Rng& rng, int n) {
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(rng.gaussian(), rng.gaussian());
  return 0.5 * (a + a.adjoint());
}

PulseSet random_pulse(Rng& rng, int n, double dt) {
  PulseSet p(n, dt, 0.3);
  for (auto& ch : p.channels)
    for (double& x : ch) x = rng.uniform(-0.3, 0.3);
  return p;
}

}  // namespace

TEST_CASE("ladder operator matrix elements") {
  const ComplexMatrix a = ladder_op(3);
  CHECK(a(0, 1).real() == doctest::Approx(1.0));
  CHECK(a(1, 2).real() == doctest::Approx(std::sqrt(2.0)));
  CHECK(a.cwiseAbs().sum() == doctest::Approx(1.0 + std::sqrt(2.0)));
  const ComplexMatrix n = a.adjoint() * a;
  for (int k = 0; k < 3; ++k) CHECK(std::abs(n(k, k) - Complex(k, 0)) < 1e-15);
  const ComplexMatrix ad2a2 = a.adjoint() * a.adjoint() * a * a;
  CHECK(std::abs(ad2a2(2, 2) - Complex(2.0, 0.0)) < 1e-14);
  CHECK(std::abs(ad2a2(1, 1)) < 1e-15);
  CHECK_THROWS_AS(ladder_op(1), std::invalid_argument);
}

TEST_CASE("drift Hamiltonian entries") {
  SUBCASE("uncoupled oscillators") {
    const ComplexMatrix h = build_drift({1.0, 2.0, 0.0, 0.0, 1e-300});
    CHECK(h(5, 5).real() == doctest::Approx(5.0));  // |12>
  }
  SUBCASE("anharmonic shift") {
    const ComplexMatrix h = build_drift({1.0, 0.0, -0.05, 0.0, 1e-300});
    CHECK(h(6, 6).real() == doctest::Approx(1.9));  // |20>
  }
  SUBCASE("coupling element") {
    const ComplexMatrix h = build_drift({0.0, 0.0, 0.0, 0.0, 0.0025});
    CHECK(std::abs(h(0, 4) - Complex(0.0025, 0.0)) < 1e-16);  // <00|H|11>
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS(DeviceParams{0.2, 0.3, -0.05, -0.05, 0.0}.validate());
}

TEST_CASE("control operators") {
  const auto [h1, h2] = build_control_ops();
  CHECK(std::abs(h1(0, 3) - Complex(1.0, 0.0)) < 1e-15);                // <00|Hc1|10>
  CHECK(std::abs(h1(3, 6) - Complex(std::sqrt(2.0), 0.0)) < 1e-15);     // <10|Hc1|20>
  ComplexMatrix n1 = ComplexMatrix::Zero(9, 9);
  for (int k = 0; k < 9; ++k) n1(k, k) = k / 3;
  CHECK((h2 * n1 - n1 * h2).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((h1 - h1.adjoint()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("herm_expm") {
  SUBCASE("zero generator") {
    CHECK((herm_expm(ComplexMatrix::Zero(9, 9), 3.7) - ComplexMatrix::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("number operator phases") {
    const ComplexMatrix h = build_drift({1.0, 0.0, 0.0, 0.0, 1e-300});
    const ComplexMatrix u = herm_expm(h, std::numbers::pi);
    const double expected[9] = {1, 1, 1, -1, -1, -1, 1, 1, 1};
    for (int k = 0; k < 9; ++k) CHECK(std::abs(u(k, k) - Complex(expected[k], 0.0)) < 1e-12);
  }
  SUBCASE("matches the Taylor series") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      const ComplexMatrix h = random_hermitian(rng, 9);
      CHECK((herm_expm(h, 0.1) - taylor_expm(h, 0.1)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("rejects non-Hermitian input") {
    ComplexMatrix h = ComplexMatrix::Zero(9, 9);
    h(0, 1) = 1e-6;
    CHECK_THROWS(herm_expm(h, 1.0));
  }
}

TEST_CASE("propagation") {
  const DeviceParams params;
  SUBCASE("zero pulse is the free evolution") {
    const PulseSet p(7, 10.0, 0.3);
    CHECK((propagate(p, params) - herm_expm(build_drift(params), 70.0)).cwiseAbs().maxCoeff() < 1e-11);
  }
  SUBCASE("single slice") {
    PulseSet p(1, 10.0, 0.3);
    p.channels = {std::vector<double>{0.1}, std::vector<double>{-0.2}};
    const auto [h1, h2] = build_control_ops();
    const ComplexMatrix h = build_drift(params) + 0.1 * h1 - 0.2 * h2;
    CHECK((propagate(p, params) - herm_expm(h, 10.0)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("two slices, last slice leftmost") {
    PulseSet p(2, 10.0, 0.3);
    p.channels = {std::vector<double>{0.1, -0.25}, std::vector<double>{0.05, 0.3}};
    const auto [h1, h2] = build_control_ops();
    const ComplexMatrix h0 = build_drift(params);
    const ComplexMatrix u0 = taylor_expm(h0 + 0.1 * h1 + 0.05 * h2, 10.0);
    const ComplexMatrix u1 = taylor_expm(h0 - 0.25 * h1 + 0.3 * h2, 10.0);
    CHECK((propagate(p, params) - u1 * u0).cwiseAbs().maxCoeff() < 1e-11);
  }
  SUBCASE("unitarity and composition over random pulses") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 2 + static_cast<int>(rng.index(20));
      const PulseSet p = random_pulse(rng, n, rng.uniform(1.0, 20.0));
      const DeviceParams d{rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), -0.05, -0.05, rng.uniform(1e-3, 1e-2)};
      const ComplexMatrix u = propagate(p, d);
      CHECK(unitarity_error(u) <= 1e-10);
      const int k = 1 + static_cast<int>(rng.index(n - 1));
      CHECK((propagate_range(p, d, k, n) * propagate_range(p, d, 0, k) - u).cwiseAbs().maxCoeff() <= 1e-11);
    }
  }
  PulseSet bad(3, 10.0, 0.3);
  bad.channels[1][2] = 0.31;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("gate fidelity") {
  const ComplexMatrix cz = target_cz3();
  const ComplexMatrix alt = target_alt();
  const ComplexMatrix id = ComplexMatrix::Identity(9, 9);
  CHECK(std::abs(avg_gate_fidelity(cz, cz) - 1.0) < 1e-12);
  CHECK(std::abs(avg_gate_fidelity(id, cz) - 0.2) < 1e-12);
  CHECK(std::abs(avg_gate_fidelity(id, alt) - 58.0 / 90.0) < 1e-12);
  CHECK(std::abs(cz(4, 4) - Complex(-0.5, std::sqrt(3.0) / 2.0)) < 1e-15);
  CHECK(((cz * cz * cz) - id).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(((alt * alt) - id).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(alt.trace() - Complex(7.0, 0.0)) == 0.0);
  CHECK(alt(8, 8).real() == -1.0);

  Rng rng(3);
  const ComplexMatrix u = propagate(random_pulse(rng, 10, 10.0), DeviceParams{});
  const double phi = rng.uniform(0.0, 6.28);
  CHECK(std::abs(avg_gate_fidelity(std::polar(1.0, phi) * u, cz) - avg_gate_fidelity(u, cz)) < 1e-12);
  const double f = avg_gate_fidelity(u, cz);
  CHECK(f >= 0.0);
  CHECK(f <= 1.0);
  CHECK_THROWS(avg_gate_fidelity(ComplexMatrix::Identity(3, 3), cz));
}

TEST_CASE("gate names") {
  CHECK(parse_gate("cz3") == Gate::kCz3);
  CHECK(parse_gate("alt") == Gate::kAlt);
  CHECK(gate_name(Gate::kAlt) == "alt");
  CHECK_THROWS(parse_gate("cnot"));
}
