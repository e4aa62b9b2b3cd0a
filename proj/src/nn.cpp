#include "quditcal/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace quditcal::nn {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) { layout(); }

Mlp::Mlp(std::vector<int> sizes, Rng& rng, bool zero_output_layer) : sizes_(std::move(sizes)) {
  layout();
  for (int l = 0; l < num_layers(); ++l) {
    if (zero_output_layer && l == num_layers() - 1) continue;
    const double limit = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    auto w = weight(l);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-limit, limit);
    auto b = bias(l);
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = rng.uniform(-limit, limit);
  }
}

void Mlp::layout() {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("mlp layer sizes must be positive");
  offsets_.clear();
  std::size_t total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_.assign(total, 0.0);
}

Eigen::Map<const RealMatrix> Mlp::weight(int l) const {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<RealMatrix> Mlp::weight(int l) { return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }
Eigen::Map<const RealVector> Mlp::bias(int l) const {
  return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}
Eigen::Map<RealVector> Mlp::bias(int l) {
  return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}

RealMatrix Mlp::forward(const RealMatrix& input, Cache* cache) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("mlp input has wrong dimension");
  if (cache) {
    cache->inputs.resize(num_layers());
    cache->pre.resize(num_layers() - 1);
  }
  RealMatrix act = input;
  for (int l = 0; l < num_layers(); ++l) {
    RealMatrix z(sizes_[l + 1], act.cols());
    z.noalias() = weight(l) * act;
    z.colwise() += bias(l);
    if (cache) cache->inputs[l] = std::move(act);
    if (l + 1 < num_layers()) {
      if (cache) cache->pre[l] = z;
      act = z.cwiseMax(0.0);
    } else {
      act = std::move(z);
    }
  }
  return act;
}

RealVector Mlp::forward(const RealVector& input) const {
  return forward(RealMatrix(input)).col(0);
}

RealMatrix Mlp::backward(const Cache& cache, const RealMatrix& output_grad,
                         std::vector<double>* param_grad) const {
  if (param_grad) {
    if (param_grad->empty()) param_grad->assign(params_.size(), 0.0);
    if (param_grad->size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  }
  RealMatrix dz = output_grad;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const RealMatrix& in = cache.inputs[l];
    if (param_grad) {
      Eigen::Map<RealMatrix> dw(param_grad->data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<RealVector> db(param_grad->data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l],
                                sizes_[l + 1]);
      dw.noalias() += dz * in.transpose();
      db += dz.rowwise().sum();
    }
    RealMatrix din(sizes_[l], dz.cols());
    din.noalias() = weight(l).transpose() * dz;
    if (l > 0) {
      // ReLU subgradient at 0 is 0.
      dz = (cache.pre[l - 1].array() > 0.0).select(din, 0.0);
    } else {
      dz = std::move(din);
    }
  }
  return dz;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: gradient size mismatch");
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size()) throw std::invalid_argument("adam: state size mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * g;
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[k] / c1;
    const double v_hat = s.v[k] / c2;
    params[k] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

void soft_update(std::span<double> target, std::span<const double> online, double tau) {
  if (target.size() != online.size()) throw std::invalid_argument("soft_update: size mismatch");
  if (tau == 1.0) {
    std::copy(online.begin(), online.end(), target.begin());
    return;
  }
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = tau * online[k] + (1.0 - tau) * target[k];
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.sizes() != online.sizes()) throw std::invalid_argument("soft_update: architecture mismatch");
  soft_update(target.params(), online.params(), tau);
}

}  // namespace quditcal::nn
