#include "sprkit/bench/paradigms.hpp"

#include <fmt/format.h>

#include <charconv>
#include <limits>

#include "sprkit/autodiff/checkpoint.hpp"
#include "sprkit/bench/evaluate.hpp"
#include "sprkit/core/error.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::bench {

using ad::Tensor;
using model::FeatureTrajectory;

const char* paradigm_name(Paradigm p) {
  switch (p) {
    case Paradigm::APR: return "apr";
    case Paradigm::RPR: return "rpr";
    case Paradigm::VO: return "vo";
    case Paradigm::SPR: return "spr";
  }
  return "?";
}

const char* paradigm_label(Paradigm p) {
  switch (p) {
    case Paradigm::APR: return "APR";
    case Paradigm::RPR: return "RPR";
    case Paradigm::VO: return "VO";
    case Paradigm::SPR: return "SPR";
  }
  return "?";
}

Paradigm parse_paradigm(std::string_view name) {
  for (Paradigm p : {Paradigm::APR, Paradigm::RPR, Paradigm::VO, Paradigm::SPR})
    if (name == paradigm_name(p) || name == paradigm_label(p)) return p;
  throw ContractError(fmt::format("unknown paradigm '{}' (expected apr, rpr, vo or spr)", name));
}

AprModel::AprModel(std::size_t d, std::size_t blocks, std::uint64_t seed) {
  Rng rng(seed);
  input_ = ad::Linear(params_, "apr.input", d, d, true, rng);
  for (std::size_t i = 0; i < blocks; ++i) blocks_.emplace_back(params_, fmt::format("apr.block{}", i), d, 2, rng);
  heads_ = model::PoseHeads(params_, "apr.head", d, rng);
}

std::pair<Tensor, Tensor> AprModel::forward(const Tensor& f) const {
  Tensor x = input_.forward(f);
  for (const auto& b : blocks_) x = b.forward(x);
  return {heads_.t.forward(x), heads_.w.forward(x)};
}

namespace {

geo::Pose row_pose(const Tensor& t, const Tensor& w) {
  return model::PoseVector{{t.at(0), t.at(1), t.at(2)}, {w.at(0), w.at(1), w.at(2)}}.to_pose();
}

Tensor as_row(const Eigen::VectorXd& v) {
  return Tensor::from({1, static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

Tensor pose_l1(const std::pair<Tensor, Tensor>& out, const geo::Pose& gt, double alpha, double beta) {
  model::ModelOutput o;
  o.t = out.first;
  o.w = out.second;
  return model::spr_loss(o, {model::PoseVector::from_pose(gt), {}}, alpha, beta);
}

}  // namespace

geo::Pose AprModel::predict(const Tensor& row) const {
  ad::NoGradGuard guard;
  const auto [t, w] = forward(row);
  return row_pose(t, w);
}

RprModel::RprModel(std::size_t d, std::size_t blocks, std::uint64_t seed) {
  Rng rng(seed);
  ref_in_ = ad::Linear(params_, "rpr.ref_in", d, d, false, rng);
  query_in_ = ad::Linear(params_, "rpr.query_in", d, d, true, rng);
  for (std::size_t i = 0; i < blocks; ++i) blocks_.emplace_back(params_, fmt::format("rpr.block{}", i), d, 2, rng);
  heads_ = model::PoseHeads(params_, "rpr.head", d, rng);
}

std::pair<Tensor, Tensor> RprModel::forward(const Tensor& ref, const Tensor& query) const {
  Tensor x = ad::add(ref_in_.forward(ref), query_in_.forward(query));
  for (const auto& b : blocks_) x = b.forward(x);
  return {heads_.t.forward(x), heads_.w.forward(x)};
}

geo::Pose RprModel::predict(const Tensor& ref, const Tensor& query) const {
  ad::NoGradGuard guard;
  const auto [t, w] = forward(ref, query);
  return row_pose(t, w);
}

void RetrievalDatabase::add(const std::string& scene_id, const std::string& traj_id, const Eigen::VectorXd& feature,
                            const geo::Pose& pose) {
  entries_.push_back({scene_id, traj_id, feature, pose});
}

Eigen::VectorXd feature_row(const FeatureTrajectory& traj, std::size_t i) {
  const auto d = traj.features.cols();
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) v(static_cast<Eigen::Index>(k)) = traj.features.at(i, k);
  return v;
}

void RetrievalDatabase::add_all(const std::vector<FeatureTrajectory>& trajs) {
  for (const auto& t : trajs)
    for (std::size_t i = 0; i < t.size(); ++i) add(t.scene_id, t.id, feature_row(t, i), t.poses[i]);
}

const RetrievalDatabase::Entry& RetrievalDatabase::nearest(const std::string& scene_id, const Eigen::VectorXd& query,
                                                           const std::string& exclude_traj, double* similarity) const {
  if (entries_.empty()) throw ContractError("retrieval database is empty");
  const Entry* best = nullptr;
  double best_sim = -std::numeric_limits<double>::infinity();
  const double qn = query.norm();
  for (const auto& e : entries_) {
    if (e.scene_id != scene_id || (!exclude_traj.empty() && e.traj_id == exclude_traj)) continue;
    const double den = qn * e.feature.norm();
    const double sim = den > 0 ? query.dot(e.feature) / den : 0.0;
    if (sim > best_sim) {
      best_sim = sim;
      best = &e;
    }
  }
  if (!best) throw ContractError("no reference frame in scene " + scene_id);
  if (similarity) *similarity = best_sim;
  return *best;
}

std::uint64_t ModelSpec::init_seed() const {
  return derive_seed(master_seed, 0x1000 + static_cast<std::uint64_t>(paradigm));
}

std::uint64_t ModelSpec::batch_seed() const {
  return derive_seed(master_seed, 0x2000 + static_cast<std::uint64_t>(paradigm));
}

std::string ModelSpec::canonical() const {
  return fmt::format("paradigm={};{};mlp_blocks={};sectors={};master_seed={};dataset={:016x}", paradigm_name(paradigm),
                     spr.canonical(), mlp_blocks, sectors, master_seed, dataset_hash) +
         (training.empty() ? "" : ";training=" + training);
}

std::uint64_t ModelSpec::hash() const { return fnv1a(canonical()); }

TrainedModel::TrainedModel(const ModelSpec& spec) : spec_(spec) {
  if (spec_.paradigm == Paradigm::VO) spec_.spr.variant = model::Variant::NoGlobal;
  spec_.spr.validate();
  const std::size_t d = spec_.spr.d_model;
  switch (spec_.paradigm) {
    case Paradigm::APR: apr_ = std::make_unique<AprModel>(d, spec_.mlp_blocks, spec_.init_seed()); break;
    case Paradigm::RPR: rpr_ = std::make_unique<RprModel>(d, spec_.mlp_blocks, spec_.init_seed()); break;
    case Paradigm::VO:
    case Paradigm::SPR: seq_ = std::make_unique<model::SprModel>(spec_.spr, spec_.init_seed()); break;
  }
}

ad::ParamSet& TrainedModel::params() {
  if (apr_) return apr_->params();
  if (rpr_) return rpr_->params();
  return seq_->params();
}

const ad::ParamSet& TrainedModel::params() const { return const_cast<TrainedModel*>(this)->params(); }

void TrainedModel::save(const std::filesystem::path& file) const {
  std::vector<ad::NamedTensor> records = {
      ad::meta_record("format", "sprkit-model"),
      ad::meta_record("paradigm", paradigm_name(spec_.paradigm)),
      ad::meta_record("variant", model::variant_name(spec_.spr.variant)),
      ad::meta_record("d_model", std::to_string(spec_.spr.d_model)),
      ad::meta_record("n_local_blocks", std::to_string(spec_.spr.n_local_blocks)),
      ad::meta_record("n_mamba_blocks", std::to_string(spec_.spr.n_mamba_blocks)),
      ad::meta_record("hidden_mult", std::to_string(spec_.spr.hidden_mult)),
      ad::meta_record("n_states", std::to_string(spec_.spr.n_states)),
      ad::meta_record("alpha", fmt::format("{}", spec_.spr.alpha)),
      ad::meta_record("beta", fmt::format("{}", spec_.spr.beta)),
      ad::meta_record("mlp_blocks", std::to_string(spec_.mlp_blocks)),
      ad::meta_record("sectors", std::to_string(spec_.sectors)),
      ad::meta_record("master_seed", std::to_string(spec_.master_seed)),
      ad::meta_record("dataset_hash", fmt::format("{:016x}", spec_.dataset_hash)),
      ad::meta_record("config_hash", fmt::format("{:016x}", spec_.hash())),
  };
  if (!spec_.training.empty()) records.push_back(ad::meta_record("training", spec_.training));
  for (const auto& item : params().items()) records.push_back(item);
  ad::save_checkpoint(file, records);
}

namespace {

std::uint64_t parse_u64(const std::string& text, int base, const std::string& what) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v, base);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw CorruptDataError("checkpoint metadata '" + what + "' is not a number: " + text, 0);
  }
  return v;
}

}  // namespace

std::unique_ptr<TrainedModel> TrainedModel::load(const std::filesystem::path& file) {
  const auto records = ad::load_checkpoint(file);
  std::map<std::string, std::string> meta;
  ad::ParamSet stored;
  for (const auto& r : records) {
    if (r.name.rfind("meta:", 0) == 0) {
      const auto eq = r.name.find('=');
      if (eq != std::string::npos) meta[r.name.substr(5, eq - 5)] = r.name.substr(eq + 1);
    } else {
      stored.add(r.name, r.tensor);
    }
  }
  auto get = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw CorruptDataError(file.string() + ": checkpoint lacks metadata '" + key + "'", 0);
    return it->second;
  };
  if (get("format") != "sprkit-model") throw CorruptDataError(file.string() + ": not a model checkpoint", 0);
  ModelSpec spec;
  spec.paradigm = parse_paradigm(get("paradigm"));
  spec.spr.variant = model::parse_variant(get("variant"));
  spec.spr.d_model = parse_u64(get("d_model"), 10, "d_model");
  spec.spr.n_local_blocks = parse_u64(get("n_local_blocks"), 10, "n_local_blocks");
  spec.spr.n_mamba_blocks = parse_u64(get("n_mamba_blocks"), 10, "n_mamba_blocks");
  spec.spr.hidden_mult = parse_u64(get("hidden_mult"), 10, "hidden_mult");
  spec.spr.n_states = parse_u64(get("n_states"), 10, "n_states");
  spec.spr.alpha = std::stod(get("alpha"));
  spec.spr.beta = std::stod(get("beta"));
  spec.mlp_blocks = parse_u64(get("mlp_blocks"), 10, "mlp_blocks");
  spec.sectors = static_cast<int>(parse_u64(get("sectors"), 10, "sectors"));
  spec.master_seed = parse_u64(get("master_seed"), 10, "master_seed");
  spec.dataset_hash = parse_u64(get("dataset_hash"), 16, "dataset_hash");
  if (auto it = meta.find("training"); it != meta.end()) spec.training = it->second;
  if (fmt::format("{:016x}", spec.hash()) != get("config_hash"))
    throw CorruptDataError(file.string() + ": metadata does not match its config hash", 0);
  auto m = std::make_unique<TrainedModel>(spec);
  if (stored.size() != m->params().size()) {
    throw CorruptDataError(fmt::format("{}: checkpoint holds {} tensors, model expects {}", file.string(), stored.size(),
                                       m->params().size()),
                           0);
  }
  m->params().assign_from(stored);
  return m;
}

std::vector<model::EpochMetrics> train_model(TrainedModel& m, const std::vector<FeatureTrajectory>& train,
                                             const std::vector<FeatureTrajectory>& val,
                                             const model::TrainConfig& config,
                                             const std::function<void(const model::EpochMetrics&)>& on_epoch) {
  model::TrainConfig cfg = config;
  cfg.seed = m.spec().batch_seed();
  cfg.validate();
  m.set_training(cfg.canonical());
  const double alpha = m.spec().spr.alpha;
  const double beta = m.spec().spr.beta;
  auto validate_with = [&](const RetrievalDatabase* db) -> std::function<geo::PoseError()> {
    if (val.empty()) return {};
    return [&m, &val, db, window = static_cast<std::size_t>(cfg.window)] {
      QueryProtocol p;
      p.window = window;
      std::vector<geo::PoseError> errs;
      for (const Query& q : run_queries(m, val, db, p)) errs.push_back(geo::pose_error(q.pred, q.gt));
      return model::median_error(errs);
    };
  };

  switch (m.paradigm()) {
    case Paradigm::VO:
    case Paradigm::SPR: return model::train_spr(m.sequence_model(), train, val, cfg, on_epoch);
    case Paradigm::APR: {
      std::vector<std::pair<std::size_t, std::size_t>> frames;
      for (std::size_t k = 0; k < train.size(); ++k)
        for (std::size_t i = 0; i < train[k].size(); ++i) frames.emplace_back(k, i);
      model::TrainTask task;
      task.items = frames.size();
      task.item_loss = [&](std::size_t i) {
        const auto [k, f] = frames[i];
        return pose_l1(m.apr().forward(train[k].window(f, 1)), train[k].poses[f], alpha, beta);
      };
      task.validate = validate_with(nullptr);
      return model::fit(m.params(), task, cfg, on_epoch);
    }
    case Paradigm::RPR: {
      RetrievalDatabase train_db;
      train_db.add_all(train);
      // training pairs mirror inference: each frame with its nearest
      // reference from another trajectory of the same scene
      struct Pair {
        Tensor ref, query;
        geo::Pose rel;
      };
      std::vector<Pair> pairs;
      for (const auto& t : train) {
        for (std::size_t i = 0; i < t.size(); ++i) {
          const Eigen::VectorXd q = feature_row(t, i);
          const RetrievalDatabase::Entry* ref = nullptr;
          try {
            ref = &train_db.nearest(t.scene_id, q, t.id);
          } catch (const ContractError&) {
            continue;  // the only trajectory of its scene
          }
          pairs.push_back({as_row(ref->feature), t.window(i, 1), geo::relative(ref->pose, t.poses[i])});
        }
      }
      RetrievalDatabase val_db = train_db;
      val_db.add_all(val);
      model::TrainTask task;
      task.items = pairs.size();
      task.item_loss = [&](std::size_t i) {
        return pose_l1(m.rpr().forward(pairs[i].ref, pairs[i].query), pairs[i].rel, alpha, beta);
      };
      task.validate = validate_with(&val_db);
      return model::fit(m.params(), task, cfg, on_epoch);
    }
  }
  return {};
}

}  // namespace sprkit::bench
