#include "quditcal/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace quditcal {

namespace {

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

bool all_finite(const ComplexMatrix& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

}  // namespace

void DeviceParams::validate() const {
  for (double v : {omega1, omega2, chi1, chi2, g})
    if (!std::isfinite(v)) throw std::invalid_argument("device parameters must be finite");
  if (!(g > 0.0)) throw std::invalid_argument("coupling g must be positive");
}

PulseSet::PulseSet(int n_slices, double dt_, double amp_bound_) : dt(dt_), amp_bound(amp_bound_) {
  if (n_slices < 1) throw std::invalid_argument("pulse needs at least one slice");
  channels[0].assign(n_slices, 0.0);
  channels[1].assign(n_slices, 0.0);
}

void PulseSet::validate() const {
  if (channels[0].empty() || channels[0].size() != channels[1].size())
    throw std::invalid_argument("pulse channels must be non-empty and equally long");
  if (!(dt > 0.0) || !(amp_bound > 0.0))
    throw std::invalid_argument("pulse dt and amplitude bound must be positive");
  for (const auto& ch : channels)
    for (double e : ch)
      if (!std::isfinite(e) || std::abs(e) > amp_bound)
        throw std::invalid_argument("pulse amplitude outside [-amp_bound, amp_bound]");
}

Gate parse_gate(const std::string& name) {
  if (name == "cz3") return Gate::kCz3;
  if (name == "alt") return Gate::kAlt;
  throw std::invalid_argument("unknown gate '" + name + "' (expected cz3 or alt)");
}

std::string gate_name(Gate gate) { return gate == Gate::kCz3 ? "cz3" : "alt"; }

ComplexMatrix ladder_op(int dim) {
  if (dim < 2) throw std::invalid_argument("ladder operator dimension must be >= 2");
  ComplexMatrix a = ComplexMatrix::Zero(dim, dim);
  for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

ComplexMatrix build_drift(const DeviceParams& params) {
  const ComplexMatrix a = ladder_op(kQutritDim);
  const ComplexMatrix ad = a.adjoint();
  const ComplexMatrix number = ad * a;
  const ComplexMatrix pair = ad * ad * a * a;
  const ComplexMatrix x = a + ad;
  const ComplexMatrix id = ComplexMatrix::Identity(kQutritDim, kQutritDim);

  ComplexMatrix h = kron(params.omega1 * number + params.chi1 * pair, id) +
                    kron(id, params.omega2 * number + params.chi2 * pair) +
                    params.g * kron(x, x);
  return h;
}

std::pair<ComplexMatrix, ComplexMatrix> build_control_ops() {
  const ComplexMatrix a = ladder_op(kQutritDim);
  const ComplexMatrix x = a + a.adjoint();
  const ComplexMatrix id = ComplexMatrix::Identity(kQutritDim, kQutritDim);
  return {kron(x, id), kron(id, x)};
}

HermitianEigen hermitian_eigen(const ComplexMatrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("generator must be square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("generator is not Hermitian within 1e-12");
  const ComplexMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

ComplexMatrix herm_expm(const ComplexMatrix& h, double t) {
  const HermitianEigen eig = hermitian_eigen(h);
  Eigen::VectorXcd phases(eig.eigenvalues.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k)
    phases(k) = std::polar(1.0, -eig.eigenvalues(k) * t);
  ComplexMatrix u = eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
  if (!all_finite(u)) throw NumericalError("non-finite propagator");
  return u;
}

ComplexMatrix propagate_range(const PulseSet& pulse, const DeviceParams& params, int first, int last) {
  if (first < 0 || last > pulse.n_slices() || first > last)
    throw std::invalid_argument("slice range out of bounds");
  const ComplexMatrix drift = build_drift(params);
  const auto [hc1, hc2] = build_control_ops();
  ComplexMatrix u = ComplexMatrix::Identity(kHilbertDim, kHilbertDim);
  for (int j = first; j < last; ++j) {
    const ComplexMatrix h = drift + pulse.channels[0][j] * hc1 + pulse.channels[1][j] * hc2;
    u = herm_expm(h, pulse.dt) * u;
  }
  return u;
}

ComplexMatrix propagate(const PulseSet& pulse, const DeviceParams& params) {
  return propagate_range(pulse, params, 0, pulse.n_slices());
}

double avg_gate_fidelity(const ComplexMatrix& u, const ComplexMatrix& target) {
  if (u.rows() != target.rows() || u.cols() != target.cols() || u.rows() != u.cols())
    throw std::invalid_argument("fidelity needs square matrices of equal dimension");
  const double dim = static_cast<double>(u.rows());
  const Complex overlap = (target.adjoint() * u).trace();
  const double f = (std::norm(overlap) + dim) / (dim * (dim + 1.0));
  if (!std::isfinite(f)) throw NumericalError("non-finite fidelity");
  return std::clamp(f, 0.0, 1.0);
}

ComplexMatrix target_cz3() {
  const Complex w = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  const Complex wc = std::conj(w);
  Eigen::VectorXcd diag(kHilbertDim);
  diag << 1.0, 1.0, 1.0, 1.0, w, wc, 1.0, wc, w;
  return diag.asDiagonal();
}

ComplexMatrix target_alt() {
  Eigen::VectorXcd diag = Eigen::VectorXcd::Ones(kHilbertDim);
  diag(kHilbertDim - 1) = -1.0;
  return diag.asDiagonal();
}

ComplexMatrix target_gate(Gate gate) { return gate == Gate::kCz3 ? target_cz3() : target_alt(); }

double unitarity_error(const ComplexMatrix& u) {
  return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace quditcal
