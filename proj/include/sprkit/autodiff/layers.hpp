#pragma once

#include <string>

#include "sprkit/autodiff/ops.hpp"
#include "sprkit/autodiff/params.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::ad {

/// Uniform(-bound, bound) tensor.
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

/// Affine map on row vectors: y[L x out] = x[L x in] . W[in x out] (+ b).
class Linear {
 public:
  Linear() = default;
  /// Registers "<name>.weight" (and "<name>.bias") in `params`, initialized
  /// U(-1/sqrt(in), 1/sqrt(in)).
  Linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng);

  Tensor forward(const Tensor& x) const;

  std::size_t in_features() const { return weight_.shape()[0]; }
  std::size_t out_features() const { return weight_.shape()[1]; }
  bool has_bias() const { return bias_.defined(); }
  Tensor weight() const { return weight_; }
  Tensor bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

}  // namespace sprkit::ad
