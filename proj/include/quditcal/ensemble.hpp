#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "quditcal/dynamics.hpp"
#include "quditcal/rng.hpp"

namespace quditcal {

struct NoiseConfig {
  double sigma_omega = 1e-3;
  double sigma_g = 5e-5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Static deviations of a device from the nominal model.
struct DeviceOffsets {
  double d_omega1 = 0.0;
  double d_omega2 = 0.0;
  double d_g = 0.0;

  bool operator==(const DeviceOffsets&) const = default;
};

/// delta omega_1, delta omega_2 ~ N(0, sigma_omega^2), delta g ~ N(0, sigma_g^2).
/// Draws in that order from `rng`; no truncation.
DeviceOffsets sample_offsets(Rng& rng, const NoiseConfig& config);

/// Adds the offsets to omega1, omega2 and g. Anharmonicities are untouched.
DeviceParams apply_offsets(const DeviceParams& nominal, const DeviceOffsets& offsets);

/// The representative static-noise device used for single-device evaluation.
DeviceOffsets fixed_single_device();

struct Histogram {
  std::string parameter;
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::uint64_t> counts;
  double mean = 0.0;
  double sigma = 0.0;  // configured width used for the +-3 sigma markers
  double marker_lo = 0.0;
  double marker_hi = 0.0;
};

/// Histograms of d_omega1, d_omega2, d_g over a window centred on the sample
/// mean that covers every sample and the +-3 sigma markers.
std::array<Histogram, 3> offset_histogram(const std::vector<DeviceOffsets>& samples, int bins,
                                          const NoiseConfig& config);

}  // namespace quditcal
