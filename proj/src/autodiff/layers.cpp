#include "sprkit/autodiff/layers.hpp"

#include <cmath>

#include "sprkit/core/error.hpp"

namespace sprkit::ad {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = uniform(rng, -bound, bound);
  return Tensor::from(std::move(shape), std::move(v));
}

Linear::Linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = params.add(name + ".weight", uniform_tensor({in, out}, bound, rng));
  if (bias) bias_ = params.add(name + ".bias", uniform_tensor({1, out}, bound, rng));
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_features()) {
    throw DimensionError("Linear expects [L x " + std::to_string(in_features()) + "], got " + shape_str(x.shape()));
  }
  Tensor y = matmul(x, weight_);
  if (bias_.defined()) y = add(y, repeat_rows(bias_, x.rows()));
  return y;
}

}  // namespace sprkit::ad
