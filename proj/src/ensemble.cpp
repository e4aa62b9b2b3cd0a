#include "quditcal/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace quditcal {

void NoiseConfig::validate() const {
  if (!std::isfinite(sigma_omega) || !std::isfinite(sigma_g) || sigma_omega < 0.0 || sigma_g < 0.0)
    throw std::invalid_argument("noise widths must be finite and non-negative");
}

DeviceOffsets sample_offsets(Rng& rng, const NoiseConfig& config) {
  DeviceOffsets o;
  o.d_omega1 = config.sigma_omega * rng.gaussian();
  o.d_omega2 = config.sigma_omega * rng.gaussian();
  o.d_g = config.sigma_g * rng.gaussian();
  return o;
}

DeviceParams apply_offsets(const DeviceParams& nominal, const DeviceOffsets& offsets) {
  DeviceParams p = nominal;
  p.omega1 += offsets.d_omega1;
  p.omega2 += offsets.d_omega2;
  p.g += offsets.d_g;
  return p;
}

DeviceOffsets fixed_single_device() { return {-3.0744e-4, -8.3866e-4, 6.2819e-6}; }

std::array<Histogram, 3> offset_histogram(const std::vector<DeviceOffsets>& samples, int bins,
                                          const NoiseConfig& config) {
  if (samples.empty()) throw std::invalid_argument("histogram needs at least one sample");
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");

  const std::array<std::string, 3> names = {"d_omega1", "d_omega2", "d_g"};
  const std::array<double, 3> sigmas = {config.sigma_omega, config.sigma_omega, config.sigma_g};
  auto value = [](const DeviceOffsets& o, int k) {
    return k == 0 ? o.d_omega1 : (k == 1 ? o.d_omega2 : o.d_g);
  };

  std::array<Histogram, 3> out;
  for (int k = 0; k < 3; ++k) {
    Histogram& h = out[k];
    h.parameter = names[k];
    h.sigma = sigmas[k];
    double sum = 0.0;
    for (const auto& s : samples) sum += value(s, k);
    h.mean = sum / static_cast<double>(samples.size());
    h.marker_lo = h.mean - 3.0 * h.sigma;
    h.marker_hi = h.mean + 3.0 * h.sigma;

    double half = 3.0 * h.sigma;
    for (const auto& s : samples) half = std::max(half, std::abs(value(s, k) - h.mean));
    if (half == 0.0) half = 1.0;
    const double lo = h.mean - half;
    const double width = 2.0 * half / bins;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) h.edges[b] = lo + b * width;
    h.edges[bins] = h.mean + half;
    h.counts.assign(bins, 0);
    for (const auto& s : samples) {
      auto b = static_cast<int>(std::floor((value(s, k) - lo) / width));
      h.counts[std::clamp(b, 0, bins - 1)] += 1;
    }
  }
  return out;
}

}  // namespace quditcal
