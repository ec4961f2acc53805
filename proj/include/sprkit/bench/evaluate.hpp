#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sprkit/bench/paradigms.hpp"

namespace sprkit::bench {

struct Query {
  std::string scene_id;
  std::string traj_id;
  geo::Pose pred;
  geo::Pose gt;
};

struct QueryProtocol {
  /// Sequence paradigms see the last `window` frames of each trajectory and
  /// predict its last frame relative to the window's first.
  std::size_t window = 5;
  /// Ground-truth passthrough instead of the model.
  bool oracle = false;
};

/// APR and RPR answer one query per frame in the scene's own frame; VO and
/// SPR one query per trajectory, origin-relative. RPR retrieves from `db`
/// within the query's scene, never from the query's own trajectory.
std::vector<Query> run_queries(const TrainedModel& m, const std::vector<model::FeatureTrajectory>& eval,
                               const RetrievalDatabase* db, const QueryProtocol& protocol);

struct ReportRow {
  std::string paradigm;
  std::string variant;
  std::string split;
  std::string scene;  // scene id, or "all" for the cross-scene average
  std::string stat;   // "median" or "mean"
  double te_m = 0.0;
  double re_deg = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct RowTag {
  std::string paradigm;
  std::string variant;
  std::string split;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// Per-scene median and mean rows (scenes in id order), then the "all" rows
/// holding the average median and average mean across scenes.
std::vector<ReportRow> summarize(const std::vector<Query>& queries, const RowTag& tag);

/// The scene == "all" row with the given statistic; ContractError if absent.
const ReportRow& aggregate_row(const std::vector<ReportRow>& rows, const std::string& stat);

inline constexpr const char* kReportHeader = "paradigm,variant,split,scene,stat,te_m,re_deg,seed,config_hash";
std::string report_csv(const std::vector<ReportRow>& rows);
void write_report(const std::filesystem::path& file, const std::vector<ReportRow>& rows);

/// Everything the evaluation of one dataset needs, loaded once.
struct BenchData {
  std::filesystem::path root;
  sim::DatasetManifest manifest;
  model::FeatureExtractor extractor;
  std::vector<model::FeatureTrajectory> train, seen, unseen;

  static BenchData load(const std::filesystem::path& root, std::size_t d_model = 64, int sectors = 8,
                        const model::FeatureOptions& options = {});
  const std::vector<model::FeatureTrajectory>& split(const std::string& name) const;
  /// Train frames plus the frames of `eval`, so every scene has references.
  RetrievalDatabase database_for(const std::vector<model::FeatureTrajectory>& eval) const;
};

/// Queries of one paradigm on one split, summarized.
std::vector<ReportRow> evaluate(const TrainedModel& m, const BenchData& data, const std::string& split,
                                const QueryProtocol& protocol = {});

}  // namespace sprkit::bench
