#include "sprkit/model/spr_model.hpp"

#include <fmt/format.h>

#include "sprkit/core/error.hpp"

namespace sprkit::model {

using ad::Tensor;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoAux: return "no-aux";
    case Variant::GlobalOnly: return "global-only";
    case Variant::NoGlobal: return "no-global";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::Full, Variant::NoAux, Variant::GlobalOnly, Variant::NoGlobal})
    if (name == variant_name(v)) return v;
  throw ContractError(fmt::format("unknown model variant '{}' (expected full, no-aux, global-only or no-global)", name));
}

void SprModelConfig::validate() const {
  if (d_model < 1 || n_local_blocks < 1 || n_mamba_blocks < 1 || hidden_mult < 1 || n_states < 1) {
    throw ContractError("model sizes must all be positive");
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ContractError("loss weights must be positive");
}

std::string SprModelConfig::canonical() const {
  return fmt::format("d_model={};local={};mamba={};mult={};states={};alpha={};beta={};variant={}", d_model,
                     n_local_blocks, n_mamba_blocks, hidden_mult, n_states, alpha, beta, variant_name(variant));
}

PoseVector PoseVector::from_pose(const geo::Pose& p) { return {p.t, geo::quat_log(p.q).w}; }

geo::Pose PoseVector::to_pose() const { return {t, geo::quat_exp({w})}; }

WindowTargets WindowTargets::from_poses(const std::vector<geo::Pose>& window) {
  if (window.size() < 2) throw ContractError("a training window needs at least two frames");
  WindowTargets gt;
  gt.main = PoseVector::from_pose(geo::relative(window.front(), window.back()));
  for (std::size_t i = 0; i + 1 < window.size(); ++i)
    gt.steps.push_back(PoseVector::from_pose(geo::relative(window[i], window[i + 1])));
  return gt;
}

ResidualMlp::ResidualMlp(ad::ParamSet& params, const std::string& name, std::size_t d, std::size_t mult, Rng& rng)
    : up_(params, name + ".up", d, d * mult, true, rng), down_(params, name + ".down", d * mult, d, true, rng) {}

Tensor ResidualMlp::forward(const Tensor& x) const { return ad::add(x, down_.forward(ad::silu(up_.forward(x)))); }

PoseHeads::PoseHeads(ad::ParamSet& params, const std::string& name, std::size_t d, Rng& rng)
    : t(params, name + ".t", d, 3, true, rng), w(params, name + ".w", d, 3, true, rng) {}

SprModel::SprModel(const SprModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  if (config_.has_local()) {
    for (std::size_t i = 0; i < config_.n_local_blocks; ++i)
      local_blocks_.emplace_back(params_, fmt::format("local.block{}", i), d, config_.hidden_mult, rng);
    if (config_.has_aux()) aux_heads_ = PoseHeads(params_, "local.aux", d, rng);
  }
  if (config_.has_global()) {
    for (std::size_t i = 0; i < config_.n_mamba_blocks; ++i)
      mamba_blocks_.emplace_back(params_, fmt::format("global.block{}", i), d, config_.hidden_mult, config_.n_states,
                                 rng);
    fusion_ = ad::Linear(params_, "fusion", d, d, true, rng);
    heads_ = PoseHeads(params_, "head", d, rng);
  }
}

SprModel::LocalOutput SprModel::local_branch(const Tensor& f) const {
  if (!config_.has_local()) throw ContractError("this variant has no local branch");
  if (f.rank() != 2 || f.rows() < 2) throw ContractError("the local branch needs at least two frames");
  if (f.cols() != config_.d_model) throw ContractError("feature width does not match d_model");
  const std::size_t q = f.rows();
  Tensor x = ad::sub(ad::slice_rows(f, 1, q), ad::slice_rows(f, 0, q - 1));
  for (const auto& block : local_blocks_) x = block.forward(x);
  LocalOutput out{ad::mean(x, 0), x, {}, {}};
  if (config_.has_aux()) {
    out.aux_t = aux_heads_.t.forward(x);
    out.aux_w = aux_heads_.w.forward(x);
  }
  return out;
}

Tensor SprModel::global_branch(const Tensor& f) const {
  if (!config_.has_global()) throw ContractError("this variant has no global branch");
  if (f.rank() != 2 || f.rows() < 1) throw ContractError("the global branch needs at least one frame");
  if (f.cols() != config_.d_model) throw ContractError("feature width does not match d_model");
  Tensor x = f;
  for (const auto& block : mamba_blocks_) x = block.forward(x);
  return ssm::last_hidden_select(x);
}

Tensor SprModel::fuse(const Tensor& local, const Tensor& global) const {
  Tensor sum;
  if (local.defined() && global.defined()) {
    if (local.shape() != global.shape()) throw ContractError("branch features to fuse differ in shape");
    sum = ad::add(local, global);
  } else {
    sum = local.defined() ? local : global;
  }
  if (!sum.defined()) throw ContractError("nothing to fuse");
  return fusion_.forward(sum);
}

PoseVector SprModel::fuse_and_head(const Tensor& local, const Tensor& global) const {
  if (!config_.has_global()) throw ContractError("this variant has no fusion head");
  ad::NoGradGuard guard;
  const Tensor fused = fuse(local, global);
  const Tensor t = heads_.t.forward(fused);
  const Tensor w = heads_.w.forward(fused);
  return {{t.at(0), t.at(1), t.at(2)}, {w.at(0), w.at(1), w.at(2)}};
}

ModelOutput SprModel::forward(const Tensor& f) const {
  if (f.rank() != 2 || f.rows() < 2) throw ContractError("prediction needs at least two frames");
  ModelOutput out;
  Tensor local;
  if (config_.has_local()) {
    auto lo = local_branch(f);
    local = lo.feature;
    out.aux_t = lo.aux_t;
    out.aux_w = lo.aux_w;
  }
  if (config_.has_global()) {
    const Tensor fused = fuse(local, global_branch(f));
    out.t = heads_.t.forward(fused);
    out.w = heads_.w.forward(fused);
  }
  return out;
}

geo::Pose SprModel::chain_steps(const Tensor& aux_t, const Tensor& aux_w) {
  geo::Pose pose;
  for (std::size_t i = 0; i < aux_t.rows(); ++i) {
    const PoseVector step{{aux_t.at(i, 0), aux_t.at(i, 1), aux_t.at(i, 2)}, {aux_w.at(i, 0), aux_w.at(i, 1), aux_w.at(i, 2)}};
    pose = geo::compose(pose, step.to_pose());
  }
  return pose;
}

geo::Pose SprModel::predict(const Tensor& features) const {
  ad::NoGradGuard guard;
  const ModelOutput out = forward(features);
  if (!config_.has_global()) return chain_steps(out.aux_t, out.aux_w);
  return PoseVector{{out.t.at(0), out.t.at(1), out.t.at(2)}, {out.w.at(0), out.w.at(1), out.w.at(2)}}.to_pose();
}

namespace {

Tensor l1_term(const Tensor& t_hat, const Tensor& w_hat, const std::vector<const PoseVector*>& gt, double alpha,
               double beta) {
  std::vector<double> t, w;
  for (const PoseVector* p : gt) {
    t.insert(t.end(), p->t.data(), p->t.data() + 3);
    w.insert(w.end(), p->w.data(), p->w.data() + 3);
  }
  const Tensor t_gt = Tensor::from({gt.size(), 3}, std::move(t));
  const Tensor w_gt = Tensor::from({gt.size(), 3}, std::move(w));
  return ad::add(ad::scale(ad::sum(ad::abs(ad::sub(t_hat, t_gt))), alpha),
                 ad::scale(ad::sum(ad::abs(ad::sub(w_hat, w_gt))), beta));
}

}  // namespace

Tensor spr_loss(const ModelOutput& out, const WindowTargets& gt, double alpha, double beta) {
  Tensor loss;
  if (out.t.defined()) loss = l1_term(out.t, out.w, {&gt.main}, alpha, beta);
  if (out.aux_t.defined()) {
    if (out.aux_t.rows() != gt.steps.size()) {
      throw ContractError(fmt::format("{} auxiliary predictions but {} step targets", out.aux_t.rows(), gt.steps.size()));
    }
    std::vector<const PoseVector*> steps;
    for (const auto& s : gt.steps) steps.push_back(&s);
    const Tensor aux = ad::scale(l1_term(out.aux_t, out.aux_w, steps, alpha, beta), 1.0 / static_cast<double>(steps.size()));
    loss = loss.defined() ? ad::add(loss, aux) : aux;
  }
  if (!loss.defined()) throw ContractError("model output carries no predictions");
  return loss;
}

StreamingPredictor::StreamingPredictor(const SprModel& model) : model_(&model) {
  states_.resize(model.mamba_blocks_.size());
}

void StreamingPredictor::push(const Eigen::VectorXd& feature) {
  const auto& cfg = model_->config();
  if (static_cast<std::size_t>(feature.size()) != cfg.d_model) throw ContractError("feature width does not match d_model");
  ad::NoGradGuard guard;
  const Tensor row = Tensor::from({1, cfg.d_model}, std::vector<double>(feature.data(), feature.data() + feature.size()));
  if (cfg.has_global()) {
    Tensor x = row;
    for (std::size_t k = 0; k < model_->mamba_blocks_.size(); ++k) x = model_->mamba_blocks_[k].step(x, states_[k]);
    global_ = x;
  }
  if (cfg.has_local() && length_ > 0) {
    Tensor x = ad::sub(row, previous_);
    for (const auto& block : model_->local_blocks_) x = block.forward(x);
    diff_sum_ = diff_sum_.defined() ? ad::add(diff_sum_, x) : x;
    if (!cfg.has_global()) {
      chained_ = geo::compose(chained_, SprModel::chain_steps(model_->aux_heads_.t.forward(x),
                                                              model_->aux_heads_.w.forward(x)));
    }
  }
  previous_ = row;
  ++length_;
}

geo::Pose StreamingPredictor::current() const {
  if (length_ < 2) throw ContractError("streaming prediction needs at least two frames");
  if (!model_->config().has_global()) return chained_;
  ad::NoGradGuard guard;
  Tensor local;
  if (model_->config().has_local()) local = ad::scale(diff_sum_, 1.0 / static_cast<double>(length_ - 1));
  const Tensor fused = model_->fuse(local, global_);
  const Tensor t = model_->heads_.t.forward(fused);
  const Tensor w = model_->heads_.w.forward(fused);
  return PoseVector{{t.at(0), t.at(1), t.at(2)}, {w.at(0), w.at(1), w.at(2)}}.to_pose();
}

}  // namespace sprkit::model
