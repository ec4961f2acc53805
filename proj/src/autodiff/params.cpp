#include "sprkit/autodiff/params.hpp"

#include "sprkit/core/error.hpp"

namespace sprkit::ad {

Tensor ParamSet::add(std::string name, Tensor t) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  items_.push_back({std::move(name), t});
  return t;
}

void ParamSet::extend(const std::string& prefix, const ParamSet& other) {
  for (const auto& item : other.items()) add(prefix + item.name, item.tensor);
}

Tensor ParamSet::get(const std::string& name) const {
  for (const auto& item : items_) {
    if (item.name == name) return item.tensor;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& item : items_) {
    if (item.name == name) return true;
  }
  return false;
}

std::vector<Tensor> ParamSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const auto& item : items_) out.push_back(item.tensor);
  return out;
}

std::size_t ParamSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& item : items_) n += item.tensor.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& item : items_) item.tensor.zero_grad();
}

void ParamSet::assign_from(const ParamSet& other) {
  for (auto& item : items_) {
    const Tensor src = other.get(item.name);
    if (src.shape() != item.tensor.shape()) {
      throw DimensionError("parameter '" + item.name + "' shape " + shape_str(item.tensor.shape()) + " vs " +
                           shape_str(src.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), item.tensor.mutable_data().begin());
  }
}

}  // namespace sprkit::ad
