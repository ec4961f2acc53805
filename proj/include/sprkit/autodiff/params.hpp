#pragma once

#include <string>
#include <vector>

#include "sprkit/autodiff/tensor.hpp"

namespace sprkit::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered registry of learnable tensors. Order is insertion order and is
/// what the checkpoint writer and the optimizer iterate over.
class ParamSet {
 public:
  /// Registers `t` (marking it requires_grad) and returns the stored handle.
  Tensor add(std::string name, Tensor t);
  /// Registers every entry of `other` under `prefix`.
  void extend(const std::string& prefix, const ParamSet& other);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<NamedTensor>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const;

  void zero_grad();
  /// Copies values from `other` by name; shapes must match.
  void assign_from(const ParamSet& other);

 private:
  std::vector<NamedTensor> items_;
};

}  // namespace sprkit::ad
