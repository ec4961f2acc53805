#include "sprkit/model/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sprkit/autodiff/optim.hpp"
#include "sprkit/core/error.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::model {

using ad::Tensor;

Tensor FeatureTrajectory::window(std::size_t begin, std::size_t len) const {
  if (begin + len > size()) throw ContractError("window runs past the end of the trajectory");
  return ad::slice_rows(features, begin, begin + len);
}

std::vector<geo::Pose> FeatureTrajectory::window_poses(std::size_t begin, std::size_t len) const {
  if (begin + len > size()) throw ContractError("window runs past the end of the trajectory");
  return {poses.begin() + static_cast<std::ptrdiff_t>(begin), poses.begin() + static_cast<std::ptrdiff_t>(begin + len)};
}

FeatureExtractor dataset_extractor(const sim::DatasetManifest& manifest, std::size_t d_model, int sectors) {
  return FeatureExtractor(manifest.pano_height, manifest.pano_width, manifest.channels, d_model, sectors,
                          derive_seed(manifest.config.master_seed, 0xE7F0));
}

std::vector<FeatureTrajectory> load_features(const std::filesystem::path& root, const sim::DatasetManifest& manifest,
                                             const std::string& split, const FeatureExtractor& extractor,
                                             const FeatureOptions& options) {
  ad::NoGradGuard guard;
  std::vector<FeatureTrajectory> out;
  for (const sim::TrajectoryEntry* entry : manifest.split(split)) {
    if (options.height_m && entry->height_m != *options.height_m) continue;
    sim::TrajectoryData data = sim::load_trajectory(root, *entry);
    std::vector<sim::Image> frames;
    frames.reserve(data.panos.size());
    for (std::size_t i = 0; i < data.panos.size(); ++i) {
      if (options.fov_deg >= 360.0) {
        frames.push_back(std::move(data.panos[i]));
      } else {
        frames.push_back(sim::crop_fov({std::move(data.panos[i]), data.poses[i]}, options.fov_deg).pano);
      }
    }
    out.push_back({entry->scene_id, entry->id, entry->split, entry->height_m, std::move(data.poses),
                   extractor.extract_sequence(frames)});
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("training needs at least one epoch");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) throw ContractError("warmup epochs must be in [0, epochs)");
  if (!(lr > 0.0) || weight_decay < 0.0) throw ContractError("learning rate must be positive, weight decay non-negative");
  if (batch_size < 1) throw ContractError("batch size must be positive");
  if (window < 2) throw ContractError("training windows need at least two frames");
}

std::string TrainConfig::canonical() const {
  return fmt::format("epochs={};warmup={};lr={};wd={};batch={};window={};seed={}", epochs, warmup_epochs, lr,
                     weight_decay, batch_size, window, seed);
}

std::vector<EpochMetrics> fit(ad::ParamSet& params, const TrainTask& task, const TrainConfig& config,
                              const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  if (task.items == 0) throw ContractError("training split is empty");
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t per_epoch = (task.items + batch - 1) / batch;
  ad::AdamW opt(params.tensors(), {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  const ad::WarmupCosineSchedule schedule(config.lr, per_epoch * static_cast<std::size_t>(config.warmup_epochs),
                                          per_epoch * static_cast<std::size_t>(config.epochs));
  std::vector<std::size_t> order(task.items);
  std::vector<EpochMetrics> history;
  std::size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      Tensor loss;
      for (std::size_t i = b; i < end; ++i) {
        const Tensor l = task.item_loss(order[i]);
        loss = loss.defined() ? ad::add(loss, l) : l;
      }
      loss = ad::scale(loss, 1.0 / static_cast<double>(end - b));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        ad::Graph::current().clear();
        throw NumericDomainError(fmt::format("non-finite training loss at epoch {} step {}", epoch, step));
      }
      opt.zero_grad();
      ad::backward(loss);
      opt.step(schedule.lr(step++));
      total += value * static_cast<double>(end - b);
    }
    EpochMetrics m{epoch, total / static_cast<double>(task.items), std::numeric_limits<double>::quiet_NaN(),
                   std::numeric_limits<double>::quiet_NaN()};
    if (task.validate) {
      const geo::PoseError e = task.validate();
      m.val_te_median = e.te;
      m.val_re_median = e.re;
    }
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

std::vector<std::pair<std::size_t, std::size_t>> enumerate_windows(const std::vector<FeatureTrajectory>& trajs,
                                                                   std::size_t len) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < trajs.size(); ++k)
    for (std::size_t s = 0; s + len <= trajs[k].size(); ++s) out.emplace_back(k, s);
  return out;
}

geo::PoseError median_error(const std::vector<geo::PoseError>& errors) {
  if (errors.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return geo::aggregate_errors(errors, geo::Statistic::Median);
}

std::vector<geo::PoseError> evaluate_last_windows(
    const std::function<geo::Pose(const FeatureTrajectory&, std::size_t, std::size_t)>& predict,
    const std::vector<FeatureTrajectory>& trajs, std::size_t window) {
  std::vector<geo::PoseError> out;
  for (const auto& traj : trajs) {
    if (traj.size() < window) continue;
    const std::size_t begin = traj.size() - window;
    const geo::Pose gt = geo::relative(traj.poses[begin], traj.poses.back());
    out.push_back(geo::pose_error(predict(traj, begin, window), gt));
  }
  return out;
}

std::vector<EpochMetrics> train_spr(SprModel& model, const std::vector<FeatureTrajectory>& train,
                                    const std::vector<FeatureTrajectory>& val, const TrainConfig& config,
                                    const std::function<void(const EpochMetrics&)>& on_epoch) {
  const std::size_t len = static_cast<std::size_t>(config.window);
  const auto windows = enumerate_windows(train, len);
  std::vector<WindowTargets> targets;
  targets.reserve(windows.size());
  for (const auto& [k, s] : windows) targets.push_back(WindowTargets::from_poses(train[k].window_poses(s, len)));

  TrainTask task;
  task.items = windows.size();
  task.item_loss = [&](std::size_t i) {
    const auto& [k, s] = windows[i];
    return spr_loss(model.forward(train[k].window(s, len)), targets[i], model.config().alpha, model.config().beta);
  };
  if (!val.empty()) {
    task.validate = [&] {
      return median_error(evaluate_last_windows(
          [&](const FeatureTrajectory& t, std::size_t b, std::size_t n) { return model.predict(t.window(b, n)); }, val,
          len));
    };
  }
  return fit(model.params(), task, config, on_epoch);
}

double mean_window_loss(const SprModel& model, const std::vector<FeatureTrajectory>& trajs, std::size_t window) {
  ad::NoGradGuard guard;
  const auto windows = enumerate_windows(trajs, window);
  if (windows.empty()) throw ContractError("no windows to score");
  double total = 0.0;
  for (const auto& [k, s] : windows) {
    const auto gt = WindowTargets::from_poses(trajs[k].window_poses(s, window));
    total += spr_loss(model.forward(trajs[k].window(s, window)), gt, model.config().alpha, model.config().beta).item();
  }
  return total / static_cast<double>(windows.size());
}

}  // namespace sprkit::model
