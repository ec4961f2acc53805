#pragma once

#include <string>
#include <vector>

#include "sprkit/autodiff/layers.hpp"
#include "sprkit/ssm/ssm.hpp"

namespace sprkit::ssm {

/// Input-dependent SSM over D channels with N states per channel:
///
///   B_t = x_t W_B,  C_t = x_t W_C,  delta_t = softplus(x_t W_delta + b_delta)
///   A = -exp(A_log)  (D x N, strictly negative)
///   h_t = exp(delta_t A) h_{t-1} + (exp(delta_t A) - 1) / A * B_t * x_t
///   y_t = h_t C_t
///
/// B and C projections have no bias, so a zero input yields a zero output.
class SelectiveSsm {
 public:
  SelectiveSsm() = default;
  SelectiveSsm(ad::ParamSet& params, const std::string& name, std::size_t channels, std::size_t states, Rng& rng);

  struct Output {
    ad::Tensor y;  // L x D
    ad::Tensor h;  // D x N, final state
  };

  /// `h0` (D x N) defaults to zeros. The returned state is detached: it
  /// carries values for streaming, not gradients.
  Output forward(const ad::Tensor& x, const ad::Tensor& h0 = {}) const;

  /// A = -exp(A_log) as a tensor on the tape.
  ad::Tensor state_matrix() const;

  std::size_t channels() const { return channels_; }
  std::size_t states() const { return states_; }

  ad::Tensor w_b, w_c, w_delta, b_delta, a_log;

 private:
  std::size_t channels_ = 0;
  std::size_t states_ = 0;
};

/// Pre-normalized residual Mamba block:
///   y = x + OutProj( SiLU(GateProj(n)) * SelectiveSsm(SiLU(InProj(n))) ),
///   n = RMSNorm(x) with a learned per-channel scale.
class MambaBlock {
 public:
  MambaBlock() = default;
  MambaBlock(ad::ParamSet& params, const std::string& name, std::size_t d_model, std::size_t expand,
             std::size_t states, Rng& rng);

  ad::Tensor forward(const ad::Tensor& x) const;

  /// Advances one step: `x_row` is 1 x d_model, `h` the carried SSM state
  /// (undefined on the first call). Identical arithmetic to `forward`.
  ad::Tensor step(const ad::Tensor& x_row, ad::Tensor& h) const;

  std::size_t d_model() const { return d_model_; }
  std::size_t hidden() const { return ssm_.channels(); }

  ad::Tensor norm_scale;
  ad::Linear in_proj, gate_proj, out_proj;
  const SelectiveSsm& ssm() const { return ssm_; }

 private:
  ad::Tensor mix(const ad::Tensor& x, const ad::Tensor& h0, ad::Tensor* h_out) const;

  std::size_t d_model_ = 0;
  SelectiveSsm ssm_;
};

/// Fused recurrence behind SelectiveSsm::forward, recorded as a single tape
/// node. x, delta: L x D; a: D x N; b_seq, c_seq: L x N; h0 detached.
SelectiveSsm::Output selective_scan(const ad::Tensor& x, const ad::Tensor& delta, const ad::Tensor& a,
                                    const ad::Tensor& b_seq, const ad::Tensor& c_seq, const ad::Tensor& h0 = {});

ad::Tensor rms_norm(const ad::Tensor& x, const ad::Tensor& scale, double eps = 1e-6);

/// The last row of an L x D sequence.
ad::Tensor last_hidden_select(const ad::Tensor& y);
/// The last element of a list of per-step outputs; ContractError when empty.
ad::Tensor last_hidden_select(const std::vector<ad::Tensor>& steps);

}  // namespace sprkit::ssm
