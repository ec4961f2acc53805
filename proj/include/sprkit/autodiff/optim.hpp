#pragma once

#include <cstddef>
#include <vector>

#include "sprkit/autodiff/tensor.hpp"

namespace sprkit::ad {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay:
///   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w)
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  /// One update using the current gradient buffers. Throws ContractError if
  /// any parameter has never received a gradient buffer.
  void step();
  void step(double lr);
  void zero_grad();

  std::size_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Linear warmup to `base_lr` over `warmup_steps`, then cosine annealing to
/// `min_lr` at `total_steps`.
class WarmupCosineSchedule {
 public:
  WarmupCosineSchedule(double base_lr, std::size_t warmup_steps, std::size_t total_steps, double min_lr = 0.0);
  double lr(std::size_t step) const;

 private:
  double base_lr_;
  std::size_t warmup_;
  std::size_t total_;
  double min_lr_;
};

}  // namespace sprkit::ad
