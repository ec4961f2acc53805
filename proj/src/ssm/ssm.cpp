#include "sprkit/ssm/ssm.hpp"

#include <cmath>

#include "sprkit/core/error.hpp"

namespace sprkit::ssm {

void ContinuousSsmParams::validate() const {
  if (a.rows() == 0 || a.cols() == 0) throw ContractError("SSM needs at least one channel and one state");
  if (b.rows() != a.rows() || b.cols() != a.cols() || c.rows() != a.rows() || c.cols() != a.cols()) {
    throw DimensionError("SSM parameter extents disagree");
  }
  if ((a >= 0.0).any()) throw ContractError("SSM state matrix must have strictly negative diagonal");
}

Discretization discretize_zoh(const ContinuousSsmParams& params, double delta) {
  if (!(delta > 0.0)) throw ContractError("ZOH step delta must be positive, got " + std::to_string(delta));
  params.validate();
  Discretization d{ChannelStates(params.a.rows(), params.a.cols()), ChannelStates(params.a.rows(), params.a.cols())};
  for (Eigen::Index i = 0; i < params.a.size(); ++i) {
    const double a = params.a(i);
    const double da = delta * a;
    d.abar(i) = std::exp(da);
    // expm1 keeps (e^{da} - 1)/a accurate when da is tiny.
    const double gain = std::abs(a) < 1e-12 ? delta : std::expm1(da) / a;
    d.bbar(i) = gain * params.b(i);
  }
  return d;
}

ScanResult scan_recurrent(std::span<const Discretization> disc, const ChannelStates& c, const Sequence& x) {
  const auto L = x.rows();
  const auto D = c.rows();
  const auto N = c.cols();
  if (disc.empty()) throw ContractError("scan_recurrent needs at least one discretization");
  if (disc.size() != 1 && static_cast<Eigen::Index>(disc.size()) != L) {
    throw DimensionError("scan_recurrent: " + std::to_string(disc.size()) + " discretizations for " +
                         std::to_string(L) + " steps");
  }
  if (x.cols() != D) throw DimensionError("scan_recurrent: input channels disagree with C");

  ScanResult out{Sequence::Zero(L, D), ChannelStates::Zero(D, N)};
  ChannelStates& h = out.final;
  for (Eigen::Index t = 0; t < L; ++t) {
    const Discretization& dt = disc.size() == 1 ? disc[0] : disc[t];
    for (Eigen::Index d = 0; d < D; ++d) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < N; ++n) {
        h(d, n) = dt.abar(d, n) * h(d, n) + dt.bbar(d, n) * x(t, d);
        acc += c(d, n) * h(d, n);
      }
      out.y(t, d) = acc;
    }
  }
  return out;
}

Sequence ssm_kernel(const Discretization& disc, const ChannelStates& c, std::size_t length) {
  const auto D = c.rows();
  const auto N = c.cols();
  Sequence k = Sequence::Zero(static_cast<Eigen::Index>(length), D);
  ChannelStates power = disc.bbar;  // Abar^s Bbar
  for (std::size_t s = 0; s < length; ++s) {
    for (Eigen::Index d = 0; d < D; ++d) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < N; ++n) acc += c(d, n) * power(d, n);
      k(static_cast<Eigen::Index>(s), d) = acc;
    }
    power *= disc.abar;
  }
  return k;
}

Sequence scan_convolutional(std::span<const Discretization> disc, const ChannelStates& c, const Sequence& x) {
  if (disc.empty()) throw ContractError("scan_convolutional needs a discretization");
  for (std::size_t i = 1; i < disc.size(); ++i) {
    if (!(disc[i].abar == disc[0].abar).all() || !(disc[i].bbar == disc[0].bbar).all()) {
      throw ContractError("convolution mode requires a time-invariant discretization");
    }
  }
  const auto L = x.rows();
  const auto D = x.cols();
  if (D != c.rows()) throw DimensionError("scan_convolutional: input channels disagree with C");
  const Sequence k = ssm_kernel(disc[0], c, static_cast<std::size_t>(L));
  Sequence y = Sequence::Zero(L, D);
  for (Eigen::Index t = 0; t < L; ++t)
    for (Eigen::Index d = 0; d < D; ++d) {
      double acc = 0.0;
      for (Eigen::Index s = 0; s <= t; ++s) acc += k(s, d) * x(t - s, d);
      y(t, d) = acc;
    }
  return y;
}

}  // namespace sprkit::ssm
