#include "sprkit/autodiff/optim.hpp"

#include <cmath>
#include <numbers>

#include "sprkit/core/error.hpp"

namespace sprkit::ad {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step() { step(config_.lr); }

void AdamW::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw ContractError("AdamW step: parameter #" + std::to_string(i) + " " + shape_str(params_[i].shape()) +
                          " has no gradient");
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].mutable_data();
    const auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * w[j]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

WarmupCosineSchedule::WarmupCosineSchedule(double base_lr, std::size_t warmup_steps, std::size_t total_steps,
                                           double min_lr)
    : base_lr_(base_lr), warmup_(warmup_steps), total_(total_steps), min_lr_(min_lr) {
  if (total_steps == 0 || warmup_steps >= total_steps) {
    throw ContractError("warmup steps (" + std::to_string(warmup_steps) + ") must be < total steps (" +
                        std::to_string(total_steps) + ")");
  }
}

double WarmupCosineSchedule::lr(std::size_t step) const {
  if (step < warmup_) return base_lr_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_) / static_cast<double>(total_ - warmup_));
  return min_lr_ + 0.5 * (base_lr_ - min_lr_) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace sprkit::ad
