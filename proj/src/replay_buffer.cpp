#include "quditcal/replay_buffer.hpp"

#include <stdexcept>

namespace quditcal {

ReplayBuffer::ReplayBuffer(int capacity, int obs_dim, int action_dim)
    : capacity_(capacity), obs_(obs_dim, capacity), actions_(action_dim, capacity), rewards_(capacity) {
  if (capacity < 1 || obs_dim < 1 || action_dim < 1) throw std::invalid_argument("replay buffer dims must be positive");
}

void ReplayBuffer::add(std::span<const double> obs, std::span<const double> action, double reward) {
  if (static_cast<Eigen::Index>(obs.size()) != obs_.rows() ||
      static_cast<Eigen::Index>(action.size()) != actions_.rows())
    throw std::invalid_argument("replay buffer: transition has wrong dimensions");
  obs_.col(head_) = Eigen::Map<const RealVector>(obs.data(), obs_.rows());
  actions_.col(head_) = Eigen::Map<const RealVector>(action.data(), actions_.rows());
  rewards_(head_) = reward;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

std::vector<int> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("replay buffer is empty");
  std::vector<int> idx(batch);
  for (int& i : idx) i = static_cast<int>(rng.index(static_cast<std::uint64_t>(size_)));
  return idx;
}

ReplayBuffer::Batch ReplayBuffer::gather(const std::vector<int>& indices) const {
  const auto b = static_cast<Eigen::Index>(indices.size());
  Batch out{RealMatrix(obs_.rows(), b), RealMatrix(actions_.rows(), b), RealVector(b)};
  for (Eigen::Index k = 0; k < b; ++k) {
    out.obs.col(k) = obs_.col(indices[k]);
    out.actions.col(k) = actions_.col(indices[k]);
    out.rewards(k) = rewards_(indices[k]);
  }
  return out;
}

std::vector<double> ReplayBuffer::flatten() const {
  const Eigen::Index row = obs_.rows() + actions_.rows() + 1;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(row * size_));
  const int start = size_ < capacity_ ? 0 : head_;
  for (int n = 0; n < size_; ++n) {
    const int k = (start + n) % capacity_;
    for (Eigen::Index r = 0; r < obs_.rows(); ++r) flat.push_back(obs_(r, k));
    for (Eigen::Index r = 0; r < actions_.rows(); ++r) flat.push_back(actions_(r, k));
    flat.push_back(rewards_(k));
  }
  return flat;
}

void ReplayBuffer::restore(std::span<const double> flat, int count) {
  const auto row = static_cast<std::size_t>(obs_.rows() + actions_.rows() + 1);
  if (flat.size() != row * static_cast<std::size_t>(count)) throw std::invalid_argument("replay buffer: bad snapshot");
  size_ = 0;
  head_ = 0;
  for (int n = 0; n < count; ++n) {
    const double* p = flat.data() + n * row;
    add({p, static_cast<std::size_t>(obs_.rows())}, {p + obs_.rows(), static_cast<std::size_t>(actions_.rows())},
        p[row - 1]);
  }
}

}  // namespace quditcal
