#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quditcal/rng.hpp"
#include "quditcal/types.hpp"

namespace quditcal {

/// Ring buffer of bandit transitions (observation, action, reward).
/// Episodes are terminal, so no next observation is ever stored.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int obs_dim, int action_dim);

  void add(std::span<const double> obs, std::span<const double> action, double reward);

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  int obs_dim() const { return static_cast<int>(obs_.rows()); }
  int action_dim() const { return static_cast<int>(actions_.rows()); }

  /// Uniform draws with replacement.
  std::vector<int> sample_indices(int batch, Rng& rng) const;

  struct Batch {
    RealMatrix obs;      // obs_dim x B
    RealMatrix actions;  // action_dim x B
    RealVector rewards;  // B
  };
  Batch gather(const std::vector<int>& indices) const;

  // Serialization: stored items in insertion order.
  std::vector<double> flatten() const;
  void restore(std::span<const double> flat, int count);

 private:
  int capacity_;
  int size_ = 0;
  int head_ = 0;
  RealMatrix obs_;
  RealMatrix actions_;
  RealVector rewards_;
};

}  // namespace quditcal
