#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sprkit/autodiff/params.hpp"
#include "sprkit/geometry/pose.hpp"
#include "sprkit/model/extractor.hpp"
#include "sprkit/model/spr_model.hpp"
#include "sprkit/sim/dataset.hpp"

namespace sprkit::model {

/// A trajectory reduced to poses and frozen per-frame features.
struct FeatureTrajectory {
  std::string scene_id;
  std::string id;
  std::string split;
  double height_m = 0.0;
  std::vector<geo::Pose> poses;
  ad::Tensor features;  // n x d_model, constant

  std::size_t size() const { return poses.size(); }
  /// Rows [begin, begin + len) of the features.
  ad::Tensor window(std::size_t begin, std::size_t len) const;
  std::vector<geo::Pose> window_poses(std::size_t begin, std::size_t len) const;
};

struct FeatureOptions {
  double fov_deg = 360.0;                  // crop applied before extraction
  std::optional<double> height_m;          // keep only trajectories at this sensor height
};

std::vector<FeatureTrajectory> load_features(const std::filesystem::path& root, const sim::DatasetManifest& manifest,
                                             const std::string& split, const FeatureExtractor& extractor,
                                             const FeatureOptions& options = {});

/// The extractor every paradigm shares for a dataset: seeded from the master
/// seed, sized from the manifest.
FeatureExtractor dataset_extractor(const sim::DatasetManifest& manifest, std::size_t d_model, int sectors = 8);

struct TrainConfig {
  int epochs = 30;
  int warmup_epochs = 2;
  double lr = 1e-3;
  double weight_decay = 0.01;
  int batch_size = 8;
  int window = 5;
  std::uint64_t seed = 0;

  void validate() const;
  std::string canonical() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_te_median = 0.0;
  double val_re_median = 0.0;
};

/// What a paradigm supplies to the shared optimization loop.
struct TrainTask {
  std::size_t items = 0;
  /// Loss of one training item, recorded on the tape.
  std::function<ad::Tensor(std::size_t)> item_loss;
  /// Median TE/RE on held-out data after an epoch; may be empty.
  std::function<geo::PoseError()> validate;
};

/// AdamW with linear warmup and cosine annealing over `epochs` passes of
/// shuffled mini-batches. Throws NumericDomainError on a non-finite loss.
std::vector<EpochMetrics> fit(ad::ParamSet& params, const TrainTask& task, const TrainConfig& config,
                              const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Every window of `len` consecutive frames, as (trajectory, start) pairs.
std::vector<std::pair<std::size_t, std::size_t>> enumerate_windows(const std::vector<FeatureTrajectory>& trajs,
                                                                   std::size_t len);

/// Trains `model` on every length-`window` window of `train`; validation
/// queries are the last window of each `val` trajectory.
std::vector<EpochMetrics> train_spr(SprModel& model, const std::vector<FeatureTrajectory>& train,
                                    const std::vector<FeatureTrajectory>& val, const TrainConfig& config,
                                    const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Mean loss over all training windows, without recording.
double mean_window_loss(const SprModel& model, const std::vector<FeatureTrajectory>& trajs, std::size_t window);

/// Errors of the query (last frame of the last `window` frames) against
/// ground truth relative to that window's first frame. Trajectories shorter
/// than the window are skipped.
std::vector<geo::PoseError> evaluate_last_windows(const std::function<geo::Pose(const FeatureTrajectory&, std::size_t, std::size_t)>& predict,
                                                  const std::vector<FeatureTrajectory>& trajs, std::size_t window);

geo::PoseError median_error(const std::vector<geo::PoseError>& errors);

}  // namespace sprkit::model
