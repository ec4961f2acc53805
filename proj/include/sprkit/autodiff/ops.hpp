#pragma once

#include <optional>
#include <vector>

#include "sprkit/autodiff/tensor.hpp"

namespace sprkit::ad {

enum class BinaryKind { Add, Sub, Mul };
enum class UnaryKind { Exp, Softplus, Tanh, Silu, Neg, Reciprocal, Abs, Sqrt, Square };
enum class ReduceKind { Sum, Mean };

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Pointwise binary op on identically shaped operands (no broadcasting).
Tensor elementwise(const Tensor& a, const Tensor& b, BinaryKind kind);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::Add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::Sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryKind::Mul); }

Tensor unary(const Tensor& a, UnaryKind kind);
inline Tensor exp(const Tensor& a) { return unary(a, UnaryKind::Exp); }
inline Tensor softplus(const Tensor& a) { return unary(a, UnaryKind::Softplus); }
inline Tensor tanh(const Tensor& a) { return unary(a, UnaryKind::Tanh); }
inline Tensor silu(const Tensor& a) { return unary(a, UnaryKind::Silu); }
inline Tensor neg(const Tensor& a) { return unary(a, UnaryKind::Neg); }
inline Tensor reciprocal(const Tensor& a) { return unary(a, UnaryKind::Reciprocal); }
inline Tensor abs(const Tensor& a) { return unary(a, UnaryKind::Abs); }
inline Tensor sqrt(const Tensor& a) { return unary(a, UnaryKind::Sqrt); }
inline Tensor square(const Tensor& a) { return unary(a, UnaryKind::Square); }

/// Full reduction yields shape {1}; an axis reduction keeps the axis with
/// extent 1 so 2-D row/column results stay 2-D.
Tensor reduce(const Tensor& a, ReduceKind kind, std::optional<std::size_t> axis = std::nullopt);
inline Tensor sum(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(a, ReduceKind::Sum, axis);
}
inline Tensor mean(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(a, ReduceKind::Mean, axis);
}

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor transpose(const Tensor& a);
/// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
inline Tensor row(const Tensor& a, std::size_t r) { return slice_rows(a, r, r + 1); }
/// Stacks rank-2 tensors with equal column counts.
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& a, Shape shape);

/// [1 x n] -> [m x n] by repeating the row (ones[m x 1] . row).
Tensor repeat_rows(const Tensor& row_vec, std::size_t m);
/// [m x 1] -> [m x n] by repeating the column (col . ones[1 x n]).
Tensor repeat_cols(const Tensor& col_vec, std::size_t n);

/// Records an op whose forward values were computed by the caller. The
/// backward callback reads `node.output->grad` and accumulates into
/// `node.inputs[i]->grad`, allocating a buffer only for inputs that require
/// grad (see `input_grad`). Nothing is recorded when no input requires grad.
Tensor custom_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                 std::function<void(const Node&)> backward_fn);
/// Gradient buffer of a node input, or nullptr when it takes no gradient.
double* input_grad(const Node& node, std::size_t i);

}  // namespace sprkit::ad
