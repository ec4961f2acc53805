#include "sprkit/bench/evaluate.hpp"

#include <fmt/format.h>

#include <map>

#include "sprkit/core/error.hpp"
#include "sprkit/core/io.hpp"

namespace sprkit::bench {

using model::FeatureTrajectory;

std::vector<Query> run_queries(const TrainedModel& m, const std::vector<FeatureTrajectory>& eval,
                               const RetrievalDatabase* db, const QueryProtocol& protocol) {
  std::vector<Query> out;
  switch (m.paradigm()) {
    case Paradigm::APR:
      for (const auto& t : eval)
        for (std::size_t i = 0; i < t.size(); ++i) {
          const geo::Pose gt = t.poses[i];
          out.push_back({t.scene_id, t.id, protocol.oracle ? gt : m.apr().predict(t.window(i, 1)), gt});
        }
      break;
    case Paradigm::RPR:
      if (!protocol.oracle && (!db || db->size() == 0)) throw ContractError("RPR needs a non-empty retrieval database");
      for (const auto& t : eval)
        for (std::size_t i = 0; i < t.size(); ++i) {
          const geo::Pose gt = t.poses[i];
          if (protocol.oracle) {
            out.push_back({t.scene_id, t.id, gt, gt});
            continue;
          }
          const Eigen::VectorXd q = feature_row(t, i);
          const auto& ref = db->nearest(t.scene_id, q, t.id);
          ad::NoGradGuard guard;
          const ad::Tensor ref_row =
              ad::Tensor::from({1, static_cast<std::size_t>(ref.feature.size())},
                               std::vector<double>(ref.feature.data(), ref.feature.data() + ref.feature.size()));
          out.push_back({t.scene_id, t.id, geo::compose(ref.pose, m.rpr().predict(ref_row, t.window(i, 1))), gt});
        }
      break;
    case Paradigm::VO:
    case Paradigm::SPR:
      for (const auto& t : eval) {
        if (t.size() < protocol.window) continue;
        const std::size_t begin = t.size() - protocol.window;
        const geo::Pose gt = geo::relative(t.poses[begin], t.poses.back());
        out.push_back({t.scene_id, t.id,
                       protocol.oracle ? gt : m.sequence_model().predict(t.window(begin, protocol.window)), gt});
      }
      break;
  }
  return out;
}

std::vector<ReportRow> summarize(const std::vector<Query>& queries, const RowTag& tag) {
  if (queries.empty()) throw ContractError("no queries to summarize for split " + tag.split);
  std::map<std::string, std::vector<geo::PoseError>> by_scene;
  for (const auto& q : queries) by_scene[q.scene_id].push_back(geo::pose_error(q.pred, q.gt));
  std::vector<ReportRow> rows;
  auto row = [&](const std::string& scene, const char* stat, const geo::PoseError& e) {
    rows.push_back({tag.paradigm, tag.variant, tag.split, scene, stat, e.te, e.re, tag.seed, tag.config_hash});
  };
  geo::PoseError med_sum, mean_sum;
  for (const auto& [scene, errs] : by_scene) {
    const auto med = geo::aggregate_errors(errs, geo::Statistic::Median);
    const auto mean = geo::aggregate_errors(errs, geo::Statistic::Mean);
    row(scene, "median", med);
    row(scene, "mean", mean);
    med_sum.te += med.te;
    med_sum.re += med.re;
    mean_sum.te += mean.te;
    mean_sum.re += mean.re;
  }
  const double n = static_cast<double>(by_scene.size());
  row("all", "median", {med_sum.te / n, med_sum.re / n});
  row("all", "mean", {mean_sum.te / n, mean_sum.re / n});
  return rows;
}

const ReportRow& aggregate_row(const std::vector<ReportRow>& rows, const std::string& stat) {
  for (const auto& r : rows)
    if (r.scene == "all" && r.stat == stat) return r;
  throw ContractError("report has no aggregate " + stat + " row");
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{},{:016x}\n", r.paradigm, r.variant, r.split, r.scene, r.stat,
                       r.te_m, r.re_deg, r.seed, r.config_hash);
  }
  return out;
}

void write_report(const std::filesystem::path& file, const std::vector<ReportRow>& rows) {
  write_text(file, report_csv(rows));
}

BenchData BenchData::load(const std::filesystem::path& root, std::size_t d_model, int sectors,
                          const model::FeatureOptions& options) {
  BenchData data;
  data.root = root;
  data.manifest = sim::load_manifest(root);
  data.extractor = model::dataset_extractor(data.manifest, d_model, sectors);
  data.train = model::load_features(root, data.manifest, sim::kSplitTrain, data.extractor, options);
  data.seen = model::load_features(root, data.manifest, sim::kSplitSeenTest, data.extractor, options);
  data.unseen = model::load_features(root, data.manifest, sim::kSplitUnseen, data.extractor, options);
  return data;
}

const std::vector<FeatureTrajectory>& BenchData::split(const std::string& name) const {
  if (name == sim::kSplitTrain) return train;
  if (name == sim::kSplitSeenTest || name == "seen") return seen;
  if (name == sim::kSplitUnseen) return unseen;
  throw ContractError("unknown split '" + name + "' (expected train, seen-test or unseen)");
}

RetrievalDatabase BenchData::database_for(const std::vector<FeatureTrajectory>& eval) const {
  RetrievalDatabase db;
  db.add_all(train);
  if (&eval != &train) db.add_all(eval);
  return db;
}

std::vector<ReportRow> evaluate(const TrainedModel& m, const BenchData& data, const std::string& split,
                                const QueryProtocol& protocol) {
  const auto& eval = data.split(split);
  if (eval.empty()) throw ContractError("split '" + split + "' is empty");
  const RetrievalDatabase db = data.database_for(eval);
  RowTag tag{paradigm_label(m.paradigm()), model::variant_name(m.spec().spr.variant), split == "seen" ? sim::kSplitSeenTest : split,
             m.spec().master_seed, m.spec().hash()};
  if (m.paradigm() != Paradigm::SPR) tag.variant = "-";
  return summarize(run_queries(m, eval, m.paradigm() == Paradigm::RPR ? &db : nullptr, protocol), tag);
}

}  // namespace sprkit::bench
