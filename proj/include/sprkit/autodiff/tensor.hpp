#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sprkit::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient first reaches this tensor
  bool requires_grad = false;
  std::int64_t node_id = -1;  // position on the active tape, -1 for leaves/constants
};

/// Handle to a dense row-major float64 array. Copies share storage; use
/// `clone()` for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 2-D convenience: `matrix({{1, 2}, {3, 4}})`.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Allocates (if needed) and zero-fills the gradient buffer.
  void zero_grad();

  std::int64_t node_id() const;
  Tensor clone() const;  // detached deep copy, no grad

  const std::shared_ptr<TensorData>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorData> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorData> impl_;
};

enum class OpKind {
  MatMul,
  Add,
  Sub,
  Mul,
  Exp,
  Softplus,
  Tanh,
  Silu,
  Neg,
  Reciprocal,
  Abs,
  Sqrt,
  Square,
  Sum,
  Mean,
  Transpose,
  SliceRows,
  ConcatRows,
  Reshape,
  Scale,
  AddScalar,
  Custom,
};

const char* op_name(OpKind kind);

struct Node {
  OpKind kind;
  std::vector<std::shared_ptr<TensorData>> inputs;
  std::shared_ptr<TensorData> output;
  /// Reads `output->grad` and accumulates into the inputs that require grad.
  std::function<void(const Node&)> backward;
};

/// Append-only tape of operation records for the current thread. Inputs of a
/// node always carry a smaller node id (or are leaves), so reverse iteration
/// is a valid topological order.
class Graph {
 public:
  static Graph& current();

  std::int64_t record(Node node);
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  /// Drops every record and turns recorded outputs into constants.
  void clear();

  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  friend void backward(const Tensor& loss);
  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

bool grad_enabled();

/// Disables tape recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populates dLoss/dLeaf for every requires_grad leaf reachable from `loss`,
/// accumulating into existing buffers, then frees the tape.
void backward(const Tensor& loss);

}  // namespace sprkit::ad
