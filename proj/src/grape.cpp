#include "quditcal/grape.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

#include "quditcal/rng.hpp"

namespace quditcal {

void GrapeConfig::validate() const {
  if (n_slices < 1) throw std::invalid_argument("grape: n_slices must be >= 1");
  if (!(total_time > 0.0)) throw std::invalid_argument("grape: total_time must be positive");
  if (!(amp_bound > 0.0)) throw std::invalid_argument("grape: amp_bound must be positive");
  if (!(target_infidelity > 0.0)) throw std::invalid_argument("grape: target_infidelity must be positive");
  if (max_iterations < 1) throw std::invalid_argument("grape: max_iterations must be >= 1");
  if (!(init_amplitude >= 0.0)) throw std::invalid_argument("grape: init_amplitude must be >= 0");
  if (init_amplitude > amp_bound) throw std::invalid_argument("grape: init_amplitude exceeds amp_bound");
  if (lbfgs_memory < 1) throw std::invalid_argument("grape: lbfgs_memory must be >= 1");
}

PulseSet init_pulse(const GrapeConfig& config) {
  config.validate();
  PulseSet pulse(config.n_slices, config.dt(), config.amp_bound);
  Rng rng(stream_seed(config.seed, Stream::kPulseInit));
  for (auto& ch : pulse.channels)
    for (double& e : ch) e = config.init_amplitude * rng.uniform(-1.0, 1.0);
  return pulse;
}

FidelityGradient fidelity_gradient(const PulseSet& pulse, const DeviceParams& params,
                                   const ComplexMatrix& target) {
  pulse.validate();
  const int n = pulse.n_slices();
  const double dt = pulse.dt;
  const ComplexMatrix drift = build_drift(params);
  const auto [hc1, hc2] = build_control_ops();
  const Eigen::Index dim = drift.rows();

  std::vector<ComplexMatrix> slice_u(n);
  std::vector<ComplexMatrix> forward(n);  // U_{j-1} ... U_0
  std::vector<ComplexMatrix> eigvecs(n);
  std::vector<ComplexMatrix> divided(n);  // Loewner matrix of exp(-i lambda dt)

  ComplexMatrix acc = ComplexMatrix::Identity(dim, dim);
  for (int j = 0; j < n; ++j) {
    const ComplexMatrix h = drift + pulse.channels[0][j] * hc1 + pulse.channels[1][j] * hc2;
    const HermitianEigen eig = hermitian_eigen(h);
    const RealVector& lam = eig.eigenvalues;
    Eigen::VectorXcd ph(dim);
    for (Eigen::Index k = 0; k < dim; ++k) ph(k) = std::polar(1.0, -lam(k) * dt);
    ComplexMatrix loewner(dim, dim);
    for (Eigen::Index m = 0; m < dim; ++m) {
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double gap = lam(m) - lam(k);
        loewner(m, k) = std::abs(gap) < 1e-10 ? Complex(0.0, -dt) * ph(m) : (ph(m) - ph(k)) / gap;
      }
    }
    eigvecs[j] = eig.eigenvectors;
    divided[j] = std::move(loewner);
    slice_u[j] = eig.eigenvectors * ph.asDiagonal() * eig.eigenvectors.adjoint();
    forward[j] = acc;
    acc = slice_u[j] * acc;
  }

  const double norm = static_cast<double>(dim) * static_cast<double>(dim + 1);
  const Complex overlap = (target.adjoint() * acc).trace();

  FidelityGradient out;
  out.fidelity = (std::norm(overlap) + static_cast<double>(dim)) / norm;
  if (!std::isfinite(out.fidelity)) throw NumericalError("grape: non-finite fidelity");
  out.gradient[0].assign(n, 0.0);
  out.gradient[1].assign(n, 0.0);

  // d Tr(V^dag U) / d eps = Tr(M dU_j) with M = A_j B_j; in the eigenbasis
  // this is sum_mk (Q^dag M Q)_km (Q^dag Hc Q)_mk L_mk.
  ComplexMatrix backward = target.adjoint();
  for (int j = n - 1; j >= 0; --j) {
    const ComplexMatrix& q = eigvecs[j];
    const ComplexMatrix m_eig = q.adjoint() * (forward[j] * backward) * q;
    const ComplexMatrix* ops[2] = {&hc1, &hc2};
    for (int i = 0; i < 2; ++i) {
      const ComplexMatrix g_eig = q.adjoint() * (*ops[i]) * q;
      const Complex dtr = (m_eig.transpose().array() * g_eig.array() * divided[j].array()).sum();
      out.gradient[i][j] = 2.0 * std::real(std::conj(overlap) * dtr) / norm;
    }
    backward = backward * slice_u[j];
  }
  return out;
}

ChannelArray grape_gradient(const PulseSet& pulse, const DeviceParams& params,
                            const ComplexMatrix& target) {
  return fidelity_gradient(pulse, params, target).gradient;
}

namespace {

// Flat view helpers: x = [channel 1 | channel 2].
RealVector flatten(const ChannelArray& c) {
  const auto n = static_cast<Eigen::Index>(c[0].size());
  RealVector v(2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    v(j) = c[0][j];
    v(n + j) = c[1][j];
  }
  return v;
}

void unflatten(const RealVector& v, ChannelArray& c) {
  const auto n = static_cast<Eigen::Index>(c[0].size());
  for (Eigen::Index j = 0; j < n; ++j) {
    c[0][j] = v(j);
    c[1][j] = v(n + j);
  }
}

struct Evaluation {
  double value = 0.0;  // infidelity
  RealVector grad;     // d(infidelity)/dx
};

}  // namespace

GrapeResult grape_optimize(const GrapeConfig& config, const DeviceParams& params,
                           const ComplexMatrix& target) {
  config.validate();
  params.validate();
  PulseSet pulse = init_pulse(config);
  const double bound = config.amp_bound;

  auto evaluate = [&](const RealVector& x) {
    unflatten(x, pulse.channels);
    const FidelityGradient fg = fidelity_gradient(pulse, params, target);
    Evaluation e{1.0 - fg.fidelity, -flatten(fg.gradient)};
    if (!std::isfinite(e.value) || !e.grad.allFinite())
      throw NumericalError("grape: non-finite objective during line search");
    return e;
  };
  auto project = [&](RealVector x) { return RealVector(x.cwiseMax(-bound).cwiseMin(bound)); };

  RealVector x = flatten(pulse.channels);
  Evaluation cur = evaluate(x);

  GrapeResult result;
  result.infidelity_history.push_back(cur.value);
  std::deque<std::pair<RealVector, RealVector>> memory;

  while (true) {
    if (cur.value <= config.target_infidelity) {
      result.converged = true;
      result.stop_reason = "target infidelity reached";
      break;
    }
    if (static_cast<int>(result.infidelity_history.size()) >= config.max_iterations) {
      result.stop_reason = "iteration limit";
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    const Eigen::Index dim = x.size();
    Eigen::Array<bool, Eigen::Dynamic, 1> is_free(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      const bool at_lo = x(k) <= -bound && cur.grad(k) > 0.0;
      const bool at_hi = x(k) >= bound && cur.grad(k) < 0.0;
      is_free(k) = !(at_lo || at_hi);
    }
    const RealVector g_free = is_free.select(cur.grad, 0.0);
    if (g_free.cwiseAbs().maxCoeff() < 1e-15) {
      result.stop_reason = "projected gradient vanished";
      break;
    }

    // Two-loop recursion.
    RealVector q = g_free;
    std::vector<double> alphas(memory.size());
    for (int k = static_cast<int>(memory.size()) - 1; k >= 0; --k) {
      const auto& [s, y] = memory[k];
      alphas[k] = s.dot(q) / y.dot(s);
      q -= alphas[k] * y;
    }
    double step = 1.0;
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.dot(y);
    } else {
      step = 0.1 / g_free.cwiseAbs().maxCoeff();
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = y.dot(q) / y.dot(s);
      q += (alphas[k] - beta) * s;
    }
    RealVector direction = is_free.select(-q, 0.0);
    if (direction.dot(cur.grad) >= 0.0) {
      memory.clear();
      direction = -g_free;
      step = 0.1 / g_free.cwiseAbs().maxCoeff();
    }

    // Armijo backtracking along the projection arc.
    bool accepted = false;
    RealVector x_new;
    Evaluation next;
    for (int trial = 0; trial < 60; ++trial) {
      x_new = project(x + step * direction);
      next = evaluate(x_new);
      if (next.value <= cur.value + 1e-4 * cur.grad.dot(x_new - x) && next.value <= cur.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      result.stop_reason = "line search stalled";
      break;
    }

    RealVector s = x_new - x;
    RealVector y = next.grad - cur.grad;
    if (s.dot(y) > 1e-300 && s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      memory.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(memory.size()) > config.lbfgs_memory) memory.pop_front();
    }
    x = std::move(x_new);
    cur = std::move(next);
    result.infidelity_history.push_back(cur.value);
  }

  unflatten(x, pulse.channels);
  result.pulse = pulse;
  result.final_infidelity = cur.value;
  result.iterations_used = static_cast<int>(result.infidelity_history.size());
  return result;
}

GrapeResult grape_optimize_best(const GrapeConfig& config, const DeviceParams& params,
                                const ComplexMatrix& target, int restarts) {
  if (restarts < 1) throw std::invalid_argument("grape: restarts must be >= 1");
  GrapeResult best;
  for (int r = 0; r < restarts; ++r) {
    GrapeConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r);
    GrapeResult res = grape_optimize(c, params, target);
    if (r == 0 || res.final_infidelity < best.final_infidelity) best = std::move(res);
    if (best.converged) break;
  }
  return best;
}

SpeedLimit min_time_estimate(double g) {
  if (!(g > 0.0)) throw std::invalid_argument("speed limit needs g > 0");
  const double t0 = std::numbers::pi / (4.0 * g);
  return {t0, 2.0 * t0};
}

}  // namespace quditcal
