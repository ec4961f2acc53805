#include "sprkit/autodiff/tensor.hpp"

#include <algorithm>

#include "sprkit/core/error.hpp"

namespace sprkit::ad {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor rank must be >= 1");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<TensorData>();
  impl->value.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                         " values");
  }
  auto impl = std::make_shared<TensorData>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return from({m, n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->value.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() needs a rank-2 tensor, got " + shape_str(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() needs a rank-2 tensor, got " + shape_str(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const { return impl_->value; }
std::span<double> Tensor::mutable_data() { return impl_->value; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar " + shape_str(shape()));
  return impl_->value[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(numel(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(numel(), 0.0); }
std::int64_t Tensor::node_id() const { return impl_->node_id; }

Tensor Tensor::clone() const { return from(shape(), impl_->value, false); }

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Exp: return "exp";
    case OpKind::Softplus: return "softplus";
    case OpKind::Tanh: return "tanh";
    case OpKind::Silu: return "silu";
    case OpKind::Neg: return "neg";
    case OpKind::Reciprocal: return "reciprocal";
    case OpKind::Abs: return "abs";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Square: return "square";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Transpose: return "transpose";
    case OpKind::SliceRows: return "slice_rows";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::Reshape: return "reshape";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Custom: return "custom";
  }
  return "?";
}

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Graph& Graph::current() {
  thread_local Graph graph;
  return graph;
}

std::int64_t Graph::record(Node node) {
  const auto id = static_cast<std::int64_t>(nodes_.size());
  for (const auto& in : node.inputs) {
    if (in->node_id >= id) throw ContractError("tape input does not precede its consumer");
  }
  node.output->node_id = id;
  nodes_.push_back(std::move(node));
  return id;
}

void Graph::clear() {
  for (auto& n : nodes_) {
    n.output->node_id = -1;
    n.output->requires_grad = false;
  }
  nodes_.clear();
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  auto& graph = Graph::current();
  auto& impl = *loss.impl();
  graph.last_visits_ = 0;
  if (!impl.requires_grad) {
    graph.clear();
    return;
  }
  if (impl.grad.empty()) impl.grad.assign(1, 0.0);
  impl.grad[0] += 1.0;

  if (impl.node_id >= 0) {
    if (static_cast<std::size_t>(impl.node_id) >= graph.nodes_.size() ||
        graph.nodes_[impl.node_id].output.get() != &impl) {
      throw ContractError("loss does not belong to the active tape");
    }
    std::vector<std::uint8_t> visited(graph.nodes_.size(), 0);
    for (auto id = impl.node_id; id >= 0; --id) {
      const Node& node = graph.nodes_[id];
      if (node.output->grad.empty()) continue;  // unreachable from the loss
      if (visited[id]++) throw ContractError("tape node visited twice");
      ++graph.last_visits_;
      node.backward(node);
    }
  }
  graph.clear();
}

}  // namespace sprkit::ad
