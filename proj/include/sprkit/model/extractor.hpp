#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sprkit/autodiff/tensor.hpp"
#include "sprkit/sim/render.hpp"

namespace sprkit::model {

/// Frozen patch projection standing in for a pretrained image backbone.
///
/// The panorama is cut into `sectors` equal azimuth strips. Every strip is
/// flattened (rows, then columns, then channels) and mapped by the same
/// orthonormal-column matrix to d_model / sectors values, so a yaw by one
/// strip width permutes feature blocks. No bias: a zero image maps to zero.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(int pano_height, int pano_width, int channels, std::size_t d_model, int sectors,
                   std::uint64_t seed);

  Eigen::VectorXd extract(const sim::Image& img) const;
  /// One row per frame; throws ContractError if any frame has other dims.
  ad::Tensor extract_sequence(const std::vector<sim::Image>& frames) const;

  std::size_t d_model() const { return d_model_; }
  int sectors() const { return sectors_; }
  std::uint64_t seed() const { return seed_; }

 private:
  int height_ = 0, width_ = 0, channels_ = 0, sectors_ = 1;
  std::size_t d_model_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd projection_;  // patch_dim x (d_model / sectors)
};

}  // namespace sprkit::model
