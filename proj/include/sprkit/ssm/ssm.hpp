#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace sprkit::ssm {

/// Row-major D x N array: one row per channel, one column per state.
using ChannelStates = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Row-major L x D sequence: one row per time step.
using Sequence = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Continuous-time SSM h' = A h + B x, y = C h with diagonal A, stored per
/// channel. Every entry of `a` must be strictly negative.
struct ContinuousSsmParams {
  ChannelStates a;
  ChannelStates b;
  ChannelStates c;

  std::size_t channels() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t states() const { return static_cast<std::size_t>(a.cols()); }
  /// Throws ContractError on inconsistent extents or a non-negative A entry.
  void validate() const;
};

struct Discretization {
  ChannelStates abar;
  ChannelStates bbar;
};

/// Zero-order hold: Abar = exp(delta a), Bbar = (exp(delta a) - 1) / a * B per
/// diagonal entry, with Bbar -> delta B as a -> 0.
Discretization discretize_zoh(const ContinuousSsmParams& params, double delta);

struct ScanResult {
  Sequence y;           // L x D
  ChannelStates final;  // D x N, the state after the last step
};

/// h_t = Abar_t h_{t-1} + Bbar_t x_t, y_t = sum_n C h_t, from h_0 = 0.
/// `disc` holds either one discretization (time-invariant) or one per step.
ScanResult scan_recurrent(std::span<const Discretization> disc, const ChannelStates& c, const Sequence& x);

/// Per-channel kernel K_s = sum_n C Abar^s Bbar for s = 0..L-1 (L x D).
Sequence ssm_kernel(const Discretization& disc, const ChannelStates& c, std::size_t length);

/// Causal convolution y_t = sum_{s<=t} K_s x_{t-s}. Time-invariant only: a
/// multi-element `disc` whose entries differ throws ContractError.
Sequence scan_convolutional(std::span<const Discretization> disc, const ChannelStates& c, const Sequence& x);

}  // namespace sprkit::ssm
