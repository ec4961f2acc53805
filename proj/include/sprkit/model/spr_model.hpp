#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sprkit/autodiff/layers.hpp"
#include "sprkit/autodiff/params.hpp"
#include "sprkit/geometry/pose.hpp"
#include "sprkit/ssm/mamba.hpp"

namespace sprkit::model {

/// Component ablations. NoGlobal drops the Mamba stack and predicts by
/// chaining the auxiliary step outputs, which is exactly visual odometry.
enum class Variant { Full, NoAux, GlobalOnly, NoGlobal };

const char* variant_name(Variant v);
/// "full", "no-aux", "global-only", "no-global"; ContractError otherwise.
Variant parse_variant(std::string_view name);

struct SprModelConfig {
  std::size_t d_model = 64;
  std::size_t n_local_blocks = 4;
  std::size_t n_mamba_blocks = 4;
  std::size_t hidden_mult = 2;
  std::size_t n_states = 16;
  double alpha = 1.0;
  double beta = 10.0;
  Variant variant = Variant::Full;

  bool has_local() const { return variant != Variant::GlobalOnly; }
  bool has_global() const { return variant != Variant::NoGlobal; }
  bool has_aux() const { return variant == Variant::Full || variant == Variant::NoGlobal; }
  void validate() const;
  std::string canonical() const;
};

/// Translation and rotation-log regression target or output.
struct PoseVector {
  geo::Vec3 t = geo::Vec3::Zero();
  geo::Vec3 w = geo::Vec3::Zero();

  static PoseVector from_pose(const geo::Pose& p);
  geo::Pose to_pose() const;
};

/// Supervision for one window of q frames: the query (last frame) in the
/// origin (first frame) and the q-1 consecutive step poses.
struct WindowTargets {
  PoseVector main;
  std::vector<PoseVector> steps;

  static WindowTargets from_poses(const std::vector<geo::Pose>& window);
};

/// Tape outputs of one forward pass. `t`/`w` are 1 x 3 and undefined when the
/// variant has no global branch; `aux_t`/`aux_w` are (q-1) x 3 and undefined
/// without auxiliary heads.
struct ModelOutput {
  ad::Tensor t, w;
  ad::Tensor aux_t, aux_w;
};

/// x + Linear(SiLU(Linear(x))), widening by `mult` in between.
class ResidualMlp {
 public:
  ResidualMlp() = default;
  ResidualMlp(ad::ParamSet& params, const std::string& name, std::size_t d, std::size_t mult, Rng& rng);
  ad::Tensor forward(const ad::Tensor& x) const;

 private:
  ad::Linear up_, down_;
};

struct PoseHeads {
  PoseHeads() = default;
  PoseHeads(ad::ParamSet& params, const std::string& name, std::size_t d, Rng& rng);
  ad::Linear t, w;
};

class SprModel {
 public:
  SprModel(const SprModelConfig& config, std::uint64_t seed);
  SprModel(const SprModel&) = delete;
  SprModel& operator=(const SprModel&) = delete;

  struct LocalOutput {
    ad::Tensor feature;    // 1 x d, mean of the processed differences
    ad::Tensor processed;  // (q-1) x d
    ad::Tensor aux_t, aux_w;
  };
  /// Differences of consecutive features through the linear stack; q >= 2.
  LocalOutput local_branch(const ad::Tensor& features) const;
  /// Last hidden state of the final Mamba block; q >= 1.
  ad::Tensor global_branch(const ad::Tensor& features) const;
  /// Sum of whichever branch features exist, one linear layer, then heads.
  PoseVector fuse_and_head(const ad::Tensor& local, const ad::Tensor& global) const;
  ModelOutput forward(const ad::Tensor& features) const;
  /// Query pose relative to the first frame; q >= 2.
  geo::Pose predict(const ad::Tensor& features) const;

  const SprModelConfig& config() const { return config_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }

 private:
  friend class StreamingPredictor;
  ad::Tensor fuse(const ad::Tensor& local, const ad::Tensor& global) const;
  static geo::Pose chain_steps(const ad::Tensor& aux_t, const ad::Tensor& aux_w);

  SprModelConfig config_;
  ad::ParamSet params_;
  std::vector<ResidualMlp> local_blocks_;
  PoseHeads aux_heads_;
  std::vector<ssm::MambaBlock> mamba_blocks_;
  ad::Linear fusion_;
  PoseHeads heads_;
};

/// Alpha * |t_hat - t|_1 + beta * |w_hat - w|_1 for the main output plus the
/// mean of the same term over auxiliary step outputs, weighted equally.
ad::Tensor spr_loss(const ModelOutput& out, const WindowTargets& gt, double alpha, double beta);

/// Frame-by-frame inference carrying the recurrent state, the running sum of
/// processed differences and the previous feature; linear in sequence length.
class StreamingPredictor {
 public:
  explicit StreamingPredictor(const SprModel& model);
  void push(const Eigen::VectorXd& feature);
  std::size_t length() const { return length_; }
  /// Prediction for the frames pushed so far; needs at least two.
  geo::Pose current() const;

 private:
  const SprModel* model_;
  std::size_t length_ = 0;
  ad::Tensor previous_;
  ad::Tensor diff_sum_;
  std::vector<ad::Tensor> states_;
  ad::Tensor global_;
  geo::Pose chained_;
};

}  // namespace sprkit::model
