#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sprkit/bench/evaluate.hpp"

namespace sprkit::bench {

/// One line of a study table. TE/RE are the unseen-split average median
/// across scenes.
struct StudyRow {
  std::string study;
  std::string paradigm;
  std::string variant;
  std::string train_setting;  // "-" when the study does not vary training
  std::string eval_setting;
  double te_m = 0.0;
  double re_deg = 0.0;
  std::string flag;  // "ok", "trend-violation" or "-"
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

inline constexpr const char* kStudyHeader = "study,paradigm,variant,train,eval,te_m,re_deg,flag,seed,config_hash";
std::string study_csv(const std::vector<StudyRow>& rows);
void write_study(const std::filesystem::path& file, const std::vector<StudyRow>& rows);

using StudyLog = std::function<void(const std::string&)>;

// ---- drift -----------------------------------------------------------------

/// Fresh trajectories of `points` frames in every unseen scene, rendered and
/// extracted exactly like the dataset. Seeded from the dataset master seed.
std::vector<model::FeatureTrajectory> drift_trajectories(const BenchData& data, int per_scene = 10, int points = 20);

/// Each trajectory is queried with its first `len` frames (origin = frame 0,
/// query = frame len-1), so every length sees the same trajectories.
std::vector<Query> prefix_queries(const TrainedModel& m, const std::vector<model::FeatureTrajectory>& trajs,
                                  std::size_t len);

/// VO and SPR at each length: 2 x lengths.size() rows, VO first at each
/// length. VO rows are flagged when TE falls as the length grows.
std::vector<StudyRow> drift_study(const TrainedModel& vo, const TrainedModel& spr,
                                  const std::vector<model::FeatureTrajectory>& trajs, const std::vector<int>& lengths);

/// Monte-Carlo drift law: random walks of gt steps, each step translation
/// perturbed by i.i.d. N(0, sigma^2 I) and chained like VO.
struct DriftLaw {
  std::vector<int> lengths;
  std::vector<double> mean_te;          // noisy VO chain, per length
  std::vector<double> spr_oracle_te;    // origin-relative gt passthrough, per length
  double exponent = 0.0;                // slope of log mean_te against log length
  bool monotone = false;                // mean_te non-decreasing
  double composition_residual = 0.0;    // max TE of the exact-step chain
};
DriftLaw drift_law(const std::vector<int>& lengths, double sigma, int rollouts, std::uint64_t seed);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---- FoV -------------------------------------------------------------------

/// Re-extracts the unseen split with crop_fov at each FoV and evaluates the
/// model; rows in the given order. Flags TE increases with wider FoV.
std::vector<StudyRow> fov_study(const TrainedModel& m, const BenchData& data, const std::vector<double>& fovs);

// ---- height ----------------------------------------------------------------

inline constexpr const char* kMixedHeights = "mixed";

/// Trajectories of `trajs` at `mix` ("0.1", "0.5", "1.7" or "mixed").
std::vector<model::FeatureTrajectory> filter_height(const std::vector<model::FeatureTrajectory>& trajs,
                                                    const std::string& mix);

/// Trains one SPR model per training mix {0.1, 0.5, 1.7, mixed} and
/// evaluates each on the unseen split at every single height: a 4 x 3
/// matrix in row-major order. The mixed row is flagged in a column where it
/// is worse than the worst single-height row. Up to `jobs` models train
/// concurrently; results do not depend on it.
std::vector<StudyRow> height_study(const BenchData& data, const ModelSpec& spec, const model::TrainConfig& train,
                                   const StudyLog& log = {}, int jobs = 1);

// ---- ablation --------------------------------------------------------------

/// Trains the four SPR variants identically and evaluates each on the
/// unseen split. The full row is flagged when some variant beats it.
std::vector<StudyRow> ablation_study(const BenchData& data, const ModelSpec& spec, const model::TrainConfig& train,
                                     const StudyLog& log = {}, int jobs = 1);

/// Runs fn(0..n-1) on up to `jobs` threads. Each call must only touch its
/// own state; the autodiff tape is per thread.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// ---- plotting --------------------------------------------------------------

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG line chart: axes with ticks, one polyline with markers per
/// series, and a legend. `note` is embedded as an XML comment.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, const std::string& note = {});

}  // namespace sprkit::bench
