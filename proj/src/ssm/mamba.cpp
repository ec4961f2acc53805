#include "sprkit/ssm/mamba.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "sprkit/core/error.hpp"

namespace sprkit::ssm {

using ad::Tensor;

namespace {

// softplus^-1(0.1): the step size every channel starts from.
const double kDeltaBias = std::log(std::expm1(0.1));

}  // namespace

SelectiveSsm::SelectiveSsm(ad::ParamSet& params, const std::string& name, std::size_t channels, std::size_t states,
                           Rng& rng)
    : channels_(channels), states_(states) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  w_b = params.add(name + ".w_b", ad::uniform_tensor({channels, states}, bound, rng));
  w_c = params.add(name + ".w_c", ad::uniform_tensor({channels, states}, bound, rng));
  w_delta = params.add(name + ".w_delta", ad::uniform_tensor({channels, channels}, 0.1 * bound, rng));
  b_delta = params.add(name + ".b_delta", Tensor::full({1, channels}, kDeltaBias));
  // S4D-real initialization: A[d, n] = -(n + 1)
  std::vector<double> a_log(channels * states);
  for (std::size_t d = 0; d < channels; ++d)
    for (std::size_t n = 0; n < states; ++n) a_log[d * states + n] = std::log(static_cast<double>(n + 1));
  this->a_log = params.add(name + ".a_log", Tensor::from({channels, states}, std::move(a_log)));
}

Tensor SelectiveSsm::state_matrix() const { return ad::neg(ad::exp(a_log)); }

SelectiveSsm::Output SelectiveSsm::forward(const Tensor& x, const Tensor& h0) const {
  if (x.rank() != 2 || x.cols() != channels_) {
    throw DimensionError("SelectiveSsm expects [L x " + std::to_string(channels_) + "], got " +
                         ad::shape_str(x.shape()));
  }
  const std::size_t L = x.rows();
  const std::size_t D = channels_;
  const std::size_t N = states_;

  const Tensor a = state_matrix();
  const Tensor b_seq = ad::matmul(x, w_b);                                                          // L x N
  const Tensor c_seq = ad::matmul(x, w_c);                                                          // L x N
  const Tensor delta = ad::softplus(ad::add(ad::matmul(x, w_delta), ad::repeat_rows(b_delta, L)));  // L x D
  if (h0.defined() && h0.shape() != ad::Shape{D, N}) throw DimensionError("SelectiveSsm initial state must be [D x N]");
  return selective_scan(x, delta, a, b_seq, c_seq, h0);
}

SelectiveSsm::Output selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b_seq,
                                    const Tensor& c_seq, const Tensor& h0) {
  const std::size_t L = x.rows(), D = x.cols(), N = a.cols();
  if (delta.shape() != x.shape() || a.rows() != D || b_seq.shape() != ad::Shape{L, N} ||
      c_seq.shape() != ad::Shape{L, N}) {
    throw DimensionError("selective_scan operand shapes disagree");
  }
  // hs holds h_0 .. h_L so the backward pass can read h_{t-1}
  auto hs = std::make_shared<std::vector<double>>((L + 1) * D * N, 0.0);
  if (h0.defined()) std::copy(h0.data().begin(), h0.data().end(), hs->begin());
  const auto u = x.data(), dl = delta.data(), av = a.data(), bv = b_seq.data(), cv = c_seq.data();
  std::vector<double> y(L * D, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    const double* prev = hs->data() + t * D * N;
    double* h = hs->data() + (t + 1) * D * N;
    for (std::size_t d = 0; d < D; ++d) {
      const double dt = dl[t * D + d];
      const double ut = u[t * D + d];
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double z = dt * av[d * N + n];
        const double hn = std::exp(z) * prev[d * N + n] + std::expm1(z) / av[d * N + n] * bv[t * N + n] * ut;
        h[d * N + n] = hn;
        acc += hn * cv[t * N + n];
      }
      y[t * D + d] = acc;
    }
  }
  Tensor h_final = Tensor::from({D, N}, std::vector<double>(hs->end() - static_cast<std::ptrdiff_t>(D * N), hs->end()));

  auto backward_fn = [L, D, N, hs](const ad::Node& node) {
    const auto& in = node.inputs;
    const double* u = in[0]->value.data();
    const double* dl = in[1]->value.data();
    const double* av = in[2]->value.data();
    const double* bv = in[3]->value.data();
    const double* cv = in[4]->value.data();
    double* gu = ad::input_grad(node, 0);
    double* gdl = ad::input_grad(node, 1);
    double* ga = ad::input_grad(node, 2);
    double* gb = ad::input_grad(node, 3);
    double* gc = ad::input_grad(node, 4);
    const double* gy = node.output->grad.data();
    std::vector<double> dh(D * N, 0.0);
    for (std::size_t t = L; t-- > 0;) {
      const double* h = hs->data() + (t + 1) * D * N;
      const double* prev = hs->data() + t * D * N;
      for (std::size_t d = 0; d < D; ++d) {
        const double g = gy[t * D + d];
        const double dt = dl[t * D + d];
        const double ut = u[t * D + d];
        double du = 0.0, ddt = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t k = d * N + n;
          const double an = av[k];
          const double bn = bv[t * N + n];
          if (gc) gc[t * N + n] += g * h[k];
          double& dk = dh[k];
          dk += g * cv[t * N + n];
          const double z = dt * an;
          const double abar = std::exp(z);
          const double em1 = std::expm1(z);
          const double gain = em1 / an;
          const double d_abar = dk * prev[k];
          const double d_gain = dk * bn * ut;
          if (gb) gb[t * N + n] += dk * gain * ut;
          du += dk * gain * bn;
          ddt += d_abar * an * abar + d_gain * abar;
          if (ga) ga[k] += d_abar * dt * abar + d_gain * (z * abar - em1) / (an * an);
          dk *= abar;
        }
        if (gu) gu[t * D + d] += du;
        if (gdl) gdl[t * D + d] += ddt;
      }
    }
  };
  Tensor y_t = ad::custom_op({L, D}, std::move(y), {x, delta, a, b_seq, c_seq}, std::move(backward_fn));
  return {y_t, h_final};
}

Tensor rms_norm(const Tensor& x, const Tensor& scale, double eps) {
  const std::size_t L = x.rows();
  const std::size_t D = x.cols();
  const Tensor inv_rms = ad::reciprocal(ad::sqrt(ad::add_scalar(ad::mean(ad::square(x), 1), eps)));  // L x 1
  return ad::mul(ad::mul(x, ad::repeat_cols(inv_rms, D)), ad::repeat_rows(scale, L));
}

MambaBlock::MambaBlock(ad::ParamSet& params, const std::string& name, std::size_t d_model, std::size_t expand,
                       std::size_t states, Rng& rng)
    : d_model_(d_model) {
  const std::size_t hidden = expand * d_model;
  norm_scale = params.add(name + ".norm.scale", Tensor::full({1, d_model}, 1.0));
  in_proj = ad::Linear(params, name + ".in_proj", d_model, hidden, false, rng);
  gate_proj = ad::Linear(params, name + ".gate_proj", d_model, hidden, false, rng);
  ssm_ = SelectiveSsm(params, name + ".ssm", hidden, states, rng);
  out_proj = ad::Linear(params, name + ".out_proj", hidden, d_model, false, rng);
}

Tensor MambaBlock::mix(const Tensor& x, const Tensor& h0, Tensor* h_out) const {
  if (x.rank() != 2 || x.cols() != d_model_) {
    throw ContractError("MambaBlock expects [L x " + std::to_string(d_model_) + "], got " + ad::shape_str(x.shape()));
  }
  const Tensor n = rms_norm(x, norm_scale);
  const Tensor u = ad::silu(in_proj.forward(n));
  const Tensor z = ad::silu(gate_proj.forward(n));
  auto s = ssm_.forward(u, h0);
  if (h_out) *h_out = s.h;
  return ad::add(x, out_proj.forward(ad::mul(z, s.y)));
}

Tensor MambaBlock::forward(const Tensor& x) const { return mix(x, {}, nullptr); }

Tensor MambaBlock::step(const Tensor& x_row, Tensor& h) const {
  if (x_row.rank() != 2 || x_row.rows() != 1) throw ContractError("MambaBlock::step expects a single row");
  Tensor next;
  Tensor y = mix(x_row, h, &next);
  h = next;
  return y;
}

Tensor last_hidden_select(const Tensor& y) {
  if (!y.defined() || y.rank() != 2) throw ContractError("last_hidden_select expects an L x D sequence");
  return ad::row(y, y.rows() - 1);
}

Tensor last_hidden_select(const std::vector<Tensor>& steps) {
  if (steps.empty()) throw ContractError("last_hidden_select of an empty sequence");
  return steps.back();
}

}  // namespace sprkit::ssm
