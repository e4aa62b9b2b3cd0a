#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quditcal/rng.hpp"
#include "quditcal/types.hpp"

namespace quditcal::nn {

/// Dense ReLU network with a linear output layer.
///
/// All parameters live in one flat buffer. Layer l stores its weight matrix
/// (out x in, column-major) followed by its bias vector, layers in order.
/// Batched inputs are matrices with one sample per column.
class Mlp {
 public:
  struct Cache {
    std::vector<RealMatrix> inputs;  // input of each layer (post-activation of the previous one)
    std::vector<RealMatrix> pre;     // pre-activation of each hidden layer
  };

  Mlp() = default;
  /// Zero-initialized network.
  explicit Mlp(std::vector<int> sizes);
  /// Uniform +-1/sqrt(fan_in) initialization; optionally zero output layer.
  Mlp(std::vector<int> sizes, Rng& rng, bool zero_output_layer = false);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Eigen::Map<const RealMatrix> weight(int layer) const;
  Eigen::Map<RealMatrix> weight(int layer);
  Eigen::Map<const RealVector> bias(int layer) const;
  Eigen::Map<RealVector> bias(int layer);

  RealMatrix forward(const RealMatrix& input, Cache* cache = nullptr) const;
  RealVector forward(const RealVector& input) const;

  /// Reverse pass for the batch stored in `cache`. Parameter gradients are
  /// accumulated into `param_grad` (resized and zeroed if empty) when non-null.
  /// Returns the gradient with respect to the input batch.
  RealMatrix backward(const Cache& cache, const RealMatrix& output_grad,
                      std::vector<double>* param_grad) const;

 private:
  void layout();

  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // start of layer l's weights
};

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// Bias-corrected Adam descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// target <- tau * online + (1 - tau) * target.
void soft_update(Mlp& target, const Mlp& online, double tau);
void soft_update(std::span<double> target, std::span<const double> online, double tau);

}  // namespace quditcal::nn
