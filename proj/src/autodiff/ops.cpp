#include "sprkit/autodiff/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "sprkit/core/error.hpp"

namespace sprkit::ad {

namespace {

using BackwardFn = std::function<void(const Node&)>;

Tensor make_output(Shape shape, std::vector<double> values, OpKind kind, std::initializer_list<const Tensor*> inputs,
                   BackwardFn backward_fn) {
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor* in : inputs) track = track || in->requires_grad();
  }
  Tensor out = Tensor::from(std::move(shape), std::move(values), track);
  if (track) {
    Node node{kind, {}, out.impl(), std::move(backward_fn)};
    node.inputs.reserve(inputs.size());
    for (const Tensor* in : inputs) node.inputs.push_back(in->impl());
    Graph::current().record(std::move(node));
  }
  return out;
}

/// Gradient buffer of an input, or nullptr when it does not participate.
double* grad_target(const std::shared_ptr<TensorData>& d) {
  if (!d->requires_grad) return nullptr;
  if (d->grad.empty()) d->grad.assign(d->value.size(), 0.0);
  return d->grad.data();
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " + shape_str(t.shape()));
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// c[m x n] += a[m x k] . b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  MutMap(c, M, N).noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
}

// c[m x k] += g[m x n] . b[k x n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  MutMap(c, M, K).noalias() += ConstMap(g, M, N) * ConstMap(b, K, N).transpose();
}

// c[k x n] += a[m x k]^T . g[m x n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  MutMap(c, K, N).noalias() += ConstMap(a, M, K).transpose() * ConstMap(g, M, N);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  // log(1 + e^x) without overflow
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " . " + shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_output({m, n}, std::move(out), OpKind::MatMul, {&a, &b}, [m, k, n](const Node& node) {
    const double* g = node.output->grad.data();
    const auto& A = node.inputs[0];
    const auto& B = node.inputs[1];
    if (double* ga = grad_target(A)) gemm_nt(g, B->value.data(), ga, m, k, n);
    if (double* gb = grad_target(B)) gemm_tn(A->value.data(), g, gb, m, k, n);
  });
}

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryKind kind) {
  if (a.shape() != b.shape()) {
    throw DimensionError("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.numel();
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(n);
  OpKind op = OpKind::Add;
  switch (kind) {
    case BinaryKind::Add:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
      op = OpKind::Add;
      break;
    case BinaryKind::Sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
      op = OpKind::Sub;
      break;
    case BinaryKind::Mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
      op = OpKind::Mul;
      break;
  }
  return make_output(a.shape(), std::move(out), op, {&a, &b}, [kind, n](const Node& node) {
    const double* g = node.output->grad.data();
    const auto& A = node.inputs[0];
    const auto& B = node.inputs[1];
    double* ga = grad_target(A);
    double* gb = grad_target(B);
    switch (kind) {
      case BinaryKind::Add:
        if (ga) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
        break;
      case BinaryKind::Sub:
        if (ga) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
        break;
      case BinaryKind::Mul:
        if (ga) for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * B->value[i];
        if (gb) for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * A->value[i];
        break;
    }
  });
}

Tensor unary(const Tensor& a, UnaryKind kind) {
  const std::size_t n = a.numel();
  const auto x = a.data();
  std::vector<double> out(n);
  OpKind op = OpKind::Exp;
  switch (kind) {
    case UnaryKind::Exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
      op = OpKind::Exp;
      break;
    case UnaryKind::Softplus:
      for (std::size_t i = 0; i < n; ++i) out[i] = softplus_value(x[i]);
      op = OpKind::Softplus;
      break;
    case UnaryKind::Tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
      op = OpKind::Tanh;
      break;
    case UnaryKind::Silu:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * sigmoid(x[i]);
      op = OpKind::Silu;
      break;
    case UnaryKind::Neg:
      for (std::size_t i = 0; i < n; ++i) out[i] = -x[i];
      op = OpKind::Neg;
      break;
    case UnaryKind::Reciprocal:
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(x[i]) <= 1e-12) {
          throw NumericDomainError("reciprocal of near-zero value " + std::to_string(x[i]) + " at index " +
                                   std::to_string(i));
        }
        out[i] = 1.0 / x[i];
      }
      op = OpKind::Reciprocal;
      break;
    case UnaryKind::Abs:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(x[i]);
      op = OpKind::Abs;
      break;
    case UnaryKind::Sqrt:
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i] < 0.0) throw NumericDomainError("sqrt of negative value at index " + std::to_string(i));
        out[i] = std::sqrt(x[i]);
      }
      op = OpKind::Sqrt;
      break;
    case UnaryKind::Square:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * x[i];
      op = OpKind::Square;
      break;
  }
  return make_output(a.shape(), std::move(out), op, {&a}, [kind, n](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const double* g = node.output->grad.data();
    const double* x = node.inputs[0]->value.data();
    const double* y = node.output->value.data();
    switch (kind) {
      case UnaryKind::Exp:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i];
        break;
      case UnaryKind::Softplus:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * sigmoid(x[i]);
        break;
      case UnaryKind::Tanh:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      case UnaryKind::Silu:
        for (std::size_t i = 0; i < n; ++i) {
          const double s = sigmoid(x[i]);
          ga[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
        }
        break;
      case UnaryKind::Neg:
        for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i];
        break;
      case UnaryKind::Reciprocal:
        for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i] * y[i] * y[i];
        break;
      case UnaryKind::Abs:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0));
        break;
      case UnaryKind::Sqrt:
        for (std::size_t i = 0; i < n; ++i) ga[i] += y[i] > 0 ? g[i] * 0.5 / y[i] : 0.0;
        break;
      case UnaryKind::Square:
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * 2.0 * x[i];
        break;
    }
  });
}

Tensor reduce(const Tensor& a, ReduceKind kind, std::optional<std::size_t> axis) {
  const OpKind op = kind == ReduceKind::Sum ? OpKind::Sum : OpKind::Mean;
  const auto x = a.data();
  if (!axis) {
    double acc = 0.0;
    for (double v : x) acc += v;
    const double factor = kind == ReduceKind::Mean ? 1.0 / static_cast<double>(x.size()) : 1.0;
    const std::size_t n = x.size();
    return make_output({1}, {acc * factor}, op, {&a}, [factor, n](const Node& node) {
      double* ga = grad_target(node.inputs[0]);
      if (!ga) return;
      const double g = node.output->grad[0] * factor;
      for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
  }
  if (*axis >= a.rank()) {
    throw DimensionError("reduce axis " + std::to_string(*axis) + " out of range for " + shape_str(a.shape()));
  }
  const auto& shape = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < *axis; ++i) outer *= shape[i];
  for (std::size_t i = *axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[*axis];
  const double factor = kind == ReduceKind::Mean ? 1.0 / static_cast<double>(len) : 1.0;

  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * len + l) * inner + i];
  for (double& v : out) v *= factor;

  Shape out_shape = shape;
  out_shape[*axis] = 1;
  return make_output(std::move(out_shape), std::move(out), op, {&a}, [=](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const double* g = node.output->grad.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) ga[(o * len + l) * inner + i] += g[o * inner + i] * factor;
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  const std::size_t n = out.size();
  return make_output(a.shape(), std::move(out), OpKind::Scale, {&a}, [factor, n](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const double* g = node.output->grad.data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v += offset;
  const std::size_t n = out.size();
  return make_output(a.shape(), std::move(out), OpKind::AddScalar, {&a}, [n](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const double* g = node.output->grad.data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto x = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return make_output({n, m}, std::move(out), OpKind::Transpose, {&a}, [m, n](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const double* g = node.output->grad.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (begin >= end || end > m) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         shape_str(a.shape()));
  }
  const auto x = a.data();
  std::vector<double> out(x.begin() + begin * n, x.begin() + end * n);
  return make_output({end - begin, n}, std::move(out), OpKind::SliceRows, {&a}, [begin, n](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const auto& g = node.output->grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of an empty list");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows column mismatch: " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    }
    m += p.rows();
    track = track || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());

  track = track && grad_enabled();
  Tensor result = Tensor::from({m, n}, std::move(out), track);
  if (track) {
    Node node{OpKind::ConcatRows, {}, result.impl(), [](const Node& nd) {
                const auto& g = nd.output->grad;
                std::size_t offset = 0;
                for (const auto& in : nd.inputs) {
                  const std::size_t len = in->value.size();
                  if (double* gi = grad_target(in)) {
                    for (std::size_t i = 0; i < len; ++i) gi[i] += g[offset + i];
                  }
                  offset += len;
                }
              }};
    for (const auto& p : parts) node.inputs.push_back(p.impl());
    Graph::current().record(std::move(node));
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  const std::size_t n = out.size();
  return make_output(std::move(shape), std::move(out), OpKind::Reshape, {&a}, [n](const Node& node) {
    double* ga = grad_target(node.inputs[0]);
    if (!ga) return;
    const double* g = node.output->grad.data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
  });
}

Tensor repeat_rows(const Tensor& row_vec, std::size_t m) {
  require_rank2(row_vec, "repeat_rows");
  if (row_vec.rows() != 1) throw DimensionError("repeat_rows expects [1 x n], got " + shape_str(row_vec.shape()));
  return matmul(Tensor::full({m, 1}, 1.0), row_vec);
}

Tensor repeat_cols(const Tensor& col_vec, std::size_t n) {
  require_rank2(col_vec, "repeat_cols");
  if (col_vec.cols() != 1) throw DimensionError("repeat_cols expects [m x 1], got " + shape_str(col_vec.shape()));
  return matmul(col_vec, Tensor::full({1, n}, 1.0));
}

Tensor custom_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                 std::function<void(const Node&)> backward_fn) {
  if (shape_numel(shape) != values.size()) throw DimensionError("custom op values do not match its shape");
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor& in : inputs) track = track || in.requires_grad();
  }
  Tensor out = Tensor::from(std::move(shape), std::move(values), track);
  if (track) {
    Node node{OpKind::Custom, {}, out.impl(), std::move(backward_fn)};
    for (const Tensor& in : inputs) node.inputs.push_back(in.impl());
    Graph::current().record(std::move(node));
  }
  return out;
}

double* input_grad(const Node& node, std::size_t i) { return grad_target(node.inputs.at(i)); }

}  // namespace sprkit::ad
