#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sprkit/model/spr_model.hpp"
#include "sprkit/model/training.hpp"

namespace sprkit::bench {

enum class Paradigm { APR, RPR, VO, SPR };

/// "apr", "rpr", "vo", "spr".
const char* paradigm_name(Paradigm p);
/// Upper-case label used in reports.
const char* paradigm_label(Paradigm p);
Paradigm parse_paradigm(std::string_view name);

/// Absolute regression from one frame: Linear, residual MLP stack, heads.
class AprModel {
 public:
  AprModel(std::size_t d_model, std::size_t blocks, std::uint64_t seed);
  /// rows x d features -> per-row (t, w), each rows x 3.
  std::pair<ad::Tensor, ad::Tensor> forward(const ad::Tensor& features) const;
  geo::Pose predict(const ad::Tensor& feature_row) const;
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }

 private:
  ad::ParamSet params_;
  ad::Linear input_;
  std::vector<model::ResidualMlp> blocks_;
  model::PoseHeads heads_;
};

/// Pair network: [f_ref, f_query] -> reference-to-query pose. The
/// concatenation is realized as the sum of two input maps.
class RprModel {
 public:
  RprModel(std::size_t d_model, std::size_t blocks, std::uint64_t seed);
  std::pair<ad::Tensor, ad::Tensor> forward(const ad::Tensor& ref, const ad::Tensor& query) const;
  geo::Pose predict(const ad::Tensor& ref_row, const ad::Tensor& query_row) const;
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }

 private:
  ad::ParamSet params_;
  ad::Linear ref_in_, query_in_;
  std::vector<model::ResidualMlp> blocks_;
  model::PoseHeads heads_;
};

/// Reference frames with absolute poses, grouped by scene.
class RetrievalDatabase {
 public:
  void add(const std::string& scene_id, const std::string& traj_id, const Eigen::VectorXd& feature,
           const geo::Pose& pose);
  /// Every frame of every trajectory.
  void add_all(const std::vector<model::FeatureTrajectory>& trajs);
  std::size_t size() const { return entries_.size(); }

  struct Entry {
    std::string scene_id;
    std::string traj_id;
    Eigen::VectorXd feature;
    geo::Pose pose;
  };
  /// Most cosine-similar entry of `scene_id`, skipping `exclude_traj`; ties
  /// go to the earliest entry. ContractError if nothing is eligible.
  const Entry& nearest(const std::string& scene_id, const Eigen::VectorXd& query, const std::string& exclude_traj = {},
                       double* similarity = nullptr) const;

 private:
  std::vector<Entry> entries_;
};

Eigen::VectorXd feature_row(const model::FeatureTrajectory& traj, std::size_t i);

/// Everything needed to rebuild a trained model of any paradigm.
struct ModelSpec {
  Paradigm paradigm = Paradigm::SPR;
  model::SprModelConfig spr;  // VO and SPR; d_model is shared by all paradigms
  std::size_t mlp_blocks = 4;  // APR and RPR stacks
  int sectors = 8;
  std::uint64_t master_seed = 0;
  std::uint64_t dataset_hash = 0;
  std::string training;  // TrainConfig::canonical() of the run behind the weights; empty if untrained

  std::uint64_t init_seed() const;
  std::uint64_t batch_seed() const;
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// A model of one paradigm plus its frozen extractor.
class TrainedModel {
 public:
  explicit TrainedModel(const ModelSpec& spec);
  TrainedModel(const TrainedModel&) = delete;
  TrainedModel& operator=(const TrainedModel&) = delete;

  const ModelSpec& spec() const { return spec_; }
  Paradigm paradigm() const { return spec_.paradigm; }
  ad::ParamSet& params();
  const ad::ParamSet& params() const;
  model::SprModel& sequence_model() { return *seq_; }
  const model::SprModel& sequence_model() const { return *seq_; }
  const AprModel& apr() const { return *apr_; }
  const RprModel& rpr() const { return *rpr_; }
  AprModel& apr() { return *apr_; }
  RprModel& rpr() { return *rpr_; }

  void set_training(std::string canonical) { spec_.training = std::move(canonical); }

  void save(const std::filesystem::path& file) const;
  static std::unique_ptr<TrainedModel> load(const std::filesystem::path& file);

 private:
  ModelSpec spec_;
  std::unique_ptr<model::SprModel> seq_;
  std::unique_ptr<AprModel> apr_;
  std::unique_ptr<RprModel> rpr_;
};

/// Trains any paradigm on the train split and records the recipe in the
/// spec. `val` feeds per-epoch metrics.
std::vector<model::EpochMetrics> train_model(TrainedModel& m, const std::vector<model::FeatureTrajectory>& train,
                                             const std::vector<model::FeatureTrajectory>& val,
                                             const model::TrainConfig& config,
                                             const std::function<void(const model::EpochMetrics&)>& on_epoch = {});

}  // namespace sprkit::bench
