#include "sprkit/model/extractor.hpp"

#include <Eigen/QR>
#include <cmath>
#include <string>

#include "sprkit/core/error.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::model {

FeatureExtractor::FeatureExtractor(int pano_height, int pano_width, int channels, std::size_t d_model, int sectors,
                                   std::uint64_t seed)
    : height_(pano_height), width_(pano_width), channels_(channels), sectors_(sectors), d_model_(d_model), seed_(seed) {
  if (pano_height < 1 || pano_width < 1 || channels < 1 || sectors < 1 || d_model < 1) {
    throw ContractError("feature extractor dimensions must be positive");
  }
  if (pano_width % sectors != 0 || d_model % static_cast<std::size_t>(sectors) != 0) {
    throw ContractError("sectors must divide both the panorama width and d_model");
  }
  const Eigen::Index patch = static_cast<Eigen::Index>(pano_height) * (pano_width / sectors) * channels;
  const Eigen::Index out = static_cast<Eigen::Index>(d_model) / sectors;
  if (out > patch) throw ContractError("feature extractor cannot project a patch to more values than it holds");
  Rng rng(seed);
  Eigen::MatrixXd g(patch, out);
  for (Eigen::Index j = 0; j < out; ++j)
    for (Eigen::Index i = 0; i < patch; ++i) g(i, j) = gaussian(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  projection_ = qr.householderQ() * Eigen::MatrixXd::Identity(patch, out);
  // orthonormal columns keep out/patch of a generic patch's energy; undo that
  projection_ *= std::sqrt(static_cast<double>(patch) / static_cast<double>(out));
}

Eigen::VectorXd FeatureExtractor::extract(const sim::Image& img) const {
  if (img.rows != height_ || img.cols != width_ || img.channels != channels_) {
    throw ContractError("feature extractor built for " + std::to_string(height_) + "x" + std::to_string(width_) + "x" +
                        std::to_string(channels_) + " panoramas, got " + std::to_string(img.rows) + "x" +
                        std::to_string(img.cols) + "x" + std::to_string(img.channels));
  }
  const int strip = width_ / sectors_;
  const Eigen::Index out = projection_.cols();
  Eigen::VectorXd f(static_cast<Eigen::Index>(d_model_));
  Eigen::VectorXd patch(projection_.rows());
  for (int s = 0; s < sectors_; ++s) {
    Eigen::Index k = 0;
    for (int r = 0; r < height_; ++r)
      for (int c = s * strip; c < (s + 1) * strip; ++c) {
        const double* px = img.pixel(r, c);
        for (int ch = 0; ch < channels_; ++ch) patch(k++) = px[ch];
      }
    f.segment(s * out, out) = projection_.transpose() * patch;
  }
  return f;
}

ad::Tensor FeatureExtractor::extract_sequence(const std::vector<sim::Image>& frames) const {
  std::vector<double> values;
  values.reserve(frames.size() * d_model_);
  for (const auto& img : frames) {
    const Eigen::VectorXd f = extract(img);
    values.insert(values.end(), f.data(), f.data() + f.size());
  }
  return ad::Tensor::from({frames.size(), d_model_}, std::move(values));
}

}  // namespace sprkit::model
