#pragma once

#include <array>
#include <utility>
#include <vector>

#include "quditcal/types.hpp"

namespace quditcal {

inline constexpr int kQutritDim = 3;
inline constexpr int kHilbertDim = kQutritDim * kQutritDim;

/// Hamiltonian parameters of the coupled qutrit pair, dimensionless with hbar = 1.
struct DeviceParams {
  double omega1 = 0.2;
  double omega2 = 0.3;
  double chi1 = -0.05;
  double chi2 = -0.05;
  double g = 0.0025;

  void validate() const;
  bool operator==(const DeviceParams&) const = default;
};

/// Two drive channels of piecewise-constant amplitudes.
struct PulseSet {
  double dt = 10.0;
  double amp_bound = 0.3;
  std::array<std::vector<double>, 2> channels;

  PulseSet() = default;
  PulseSet(int n_slices, double dt, double amp_bound);

  int n_slices() const { return static_cast<int>(channels[0].size()); }
  double total_time() const { return dt * n_slices(); }
  // Throws std::invalid_argument when shapes disagree or a sample exceeds the bound.
  void validate() const;
  bool operator==(const PulseSet&) const = default;
};

enum class Gate { kCz3, kAlt };

Gate parse_gate(const std::string& name);
std::string gate_name(Gate gate);

ComplexMatrix ladder_op(int dim);

ComplexMatrix build_drift(const DeviceParams& params);

/// (a + a^dag) on qutrit 1 and on qutrit 2, lexicographic |q1 q2> ordering.
std::pair<ComplexMatrix, ComplexMatrix> build_control_ops();

/// Eigendecomposition of a Hermitian generator: H = Q diag(lambda) Q^dag.
struct HermitianEigen {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;
};

// Symmetrizes H before decomposing; asymmetry above 1e-12 is a contract violation.
HermitianEigen hermitian_eigen(const ComplexMatrix& h);

/// exp(-i H t) through the spectral decomposition of H.
ComplexMatrix herm_expm(const ComplexMatrix& h, double t);

/// Full time-ordered propagator; the last slice is the leftmost factor.
ComplexMatrix propagate(const PulseSet& pulse, const DeviceParams& params);

/// Propagator over slices [first, last).
ComplexMatrix propagate_range(const PulseSet& pulse, const DeviceParams& params, int first, int last);

/// Average gate fidelity (|Tr(V^dag U)|^2 + D) / (D (D + 1)) with D the matrix dimension.
double avg_gate_fidelity(const ComplexMatrix& u, const ComplexMatrix& target);

ComplexMatrix target_cz3();
ComplexMatrix target_alt();
ComplexMatrix target_gate(Gate gate);

/// max_ij |(U^dag U - I)_ij|
double unitarity_error(const ComplexMatrix& u);

}  // namespace quditcal
