#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sprkit/autodiff/optim.hpp"
#include "sprkit/core/error.hpp"
#include "sprkit/model/extractor.hpp"
#include "sprkit/model/spr_model.hpp"
#include "sprkit/model/training.hpp"
#include "support/gradcheck.hpp"

using namespace sprkit;
using namespace sprkit::model;
using ad::Tensor;
using sprkit::testing::gradcheck;
using sprkit::testing::random_tensor;

namespace {

sim::Image random_image(Rng& rng, int h, int w, int f) {
  sim::Image img(h, w, f);
  for (double& v : img.data) v = uniform(rng, -1, 1);
  return img;
}

SprModelConfig toy_config(Variant v = Variant::Full) {
  SprModelConfig c;
  c.d_model = 8;
  c.n_local_blocks = 1;
  c.n_mamba_blocks = 1;
  c.hidden_mult = 2;
  c.n_states = 4;
  c.variant = v;
  return c;
}

std::vector<geo::Pose> random_walk(Rng& rng, std::size_t n) {
  std::vector<geo::Pose> poses(n);
  for (std::size_t i = 0; i < n; ++i) {
    poses[i].t = geo::Vec3(uniform(rng, 0, 8), uniform(rng, 0, 8), 1.7);
    poses[i].q = geo::UnitQuaternion::from_yaw(uniform(rng, -M_PI, M_PI));
  }
  return poses;
}

double pose_gap(const geo::Pose& a, const geo::Pose& b) {
  return std::max((a.t - b.t).cwiseAbs().maxCoeff(),
                  std::min(std::abs(a.q.u() - b.q.u()) + (a.q.v() - b.q.v()).cwiseAbs().sum(),
                           std::abs(a.q.u() + b.q.u()) + (a.q.v() + b.q.v()).cwiseAbs().sum()));
}

const std::vector<Variant> kVariants = {Variant::Full, Variant::NoAux, Variant::GlobalOnly, Variant::NoGlobal};

}  // namespace

// ---- extractor ---------------------------------------------------------------

TEST(Extractor, ZeroImageMapsToZero) {
  FeatureExtractor ex(8, 16, 4, 16, 8, 3);
  const Eigen::VectorXd f = ex.extract(sim::Image(8, 16, 4));
  ASSERT_EQ(f.size(), 16);
  EXPECT_EQ(f.norm(), 0.0);
}

TEST(Extractor, IdenticalInputsGiveIdenticalFeatures) {
  Rng rng(1);
  FeatureExtractor ex(8, 16, 4, 16, 8, 3);
  const auto img = random_image(rng, 8, 16, 4);
  EXPECT_EQ(ex.extract(img), ex.extract(img));
  FeatureExtractor again(8, 16, 4, 16, 8, 3);
  EXPECT_EQ(ex.extract(img), again.extract(img));
}

TEST(Extractor, SequenceShapeAndDimensionMismatch) {
  Rng rng(2);
  FeatureExtractor ex(8, 16, 4, 16, 8, 3);
  std::vector<sim::Image> frames = {random_image(rng, 8, 16, 4), random_image(rng, 8, 16, 4),
                                    random_image(rng, 8, 16, 4)};
  const Tensor seq = ex.extract_sequence(frames);
  EXPECT_EQ(seq.rows(), 3u);
  EXPECT_EQ(seq.cols(), 16u);
  for (int k = 0; k < 16; ++k) EXPECT_EQ(seq.at(16 + k), ex.extract(frames[1])(k));
  frames.push_back(random_image(rng, 8, 12, 4));
  EXPECT_THROW(ex.extract_sequence(frames), ContractError);
  EXPECT_THROW(FeatureExtractor(8, 16, 4, 12, 8, 3), ContractError);  // d not divisible by sectors
}

TEST(Extractor, YawBySectorPermutesBlocks) {
  Rng rng(3);
  const int h = 8, w = 32, f = 4, sectors = 8, strip = w / sectors;
  const std::size_t d = 32, block = d / sectors;
  FeatureExtractor ex(h, w, f, d, sectors, 5);
  const auto a = random_image(rng, h, w, f);
  sim::Image b(h, w, f);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < f; ++k) b.pixel(r, (c + strip) % w)[k] = a.pixel(r, c)[k];
  const auto fa = ex.extract(a), fb = ex.extract(b);
  for (int s = 0; s < sectors; ++s)
    for (std::size_t k = 0; k < block; ++k)
      EXPECT_NEAR(fb(static_cast<Eigen::Index>(((s + 1) % sectors) * block + k)),
                  fa(static_cast<Eigen::Index>(s * block + k)), 1e-12);
}

TEST(Extractor, LinearInTheImage) {
  Rng rng(4);
  FeatureExtractor ex(8, 16, 4, 16, 8, 3);
  const auto a = random_image(rng, 8, 16, 4), b = random_image(rng, 8, 16, 4);
  sim::Image sum = a;
  for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = 2.0 * a.data[i] - b.data[i];
  EXPECT_LT((ex.extract(sum) - (2.0 * ex.extract(a) - ex.extract(b))).norm(), 1e-12);
}

// ---- targets and loss --------------------------------------------------------

TEST(Targets, MainIsOriginRelativeAndStepsAreConsecutive) {
  Rng rng(5);
  const auto poses = random_walk(rng, 5);
  const auto gt = WindowTargets::from_poses(poses);
  ASSERT_EQ(gt.steps.size(), 4u);
  EXPECT_LT(pose_gap(gt.main.to_pose(), geo::relative(poses[0], poses[4])), 1e-12);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_LT(pose_gap(gt.steps[i].to_pose(), geo::relative(poses[i], poses[i + 1])), 1e-12);
  EXPECT_THROW(WindowTargets::from_poses({poses[0]}), ContractError);
}

TEST(Loss, TranslationOffByOneMetreIsOne) {
  ModelOutput out;
  out.t = Tensor::matrix({{2.0, 0.0, 0.5}});
  out.w = Tensor::matrix({{0.1, 0.2, 0.3}});
  WindowTargets gt{{{1.0, 0.0, 0.5}, {0.1, 0.2, 0.3}}, {}};
  EXPECT_NEAR(spr_loss(out, gt, 1.0, 10.0).item(), 1.0, 1e-12);
}

TEST(Loss, RotationLogOffByATenthIsOne) {
  ModelOutput out;
  out.t = Tensor::matrix({{1.0, 2.0, 3.0}});
  out.w = Tensor::matrix({{0.1, 0.2, 0.4}});
  WindowTargets gt{{{1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}}, {}};
  EXPECT_NEAR(spr_loss(out, gt, 1.0, 10.0).item(), 1.0, 1e-12);
}

TEST(Loss, AuxiliaryStepsAreAveragedAndAddedOneToOne) {
  ModelOutput out;
  out.t = Tensor::matrix({{0.0, 0.0, 0.0}});
  out.w = Tensor::matrix({{0.0, 0.0, 0.0}});
  out.aux_t = Tensor::matrix({{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
  out.aux_w = Tensor::matrix({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.2}});
  WindowTargets gt;
  gt.steps.resize(2);
  // main 0, steps 1 and 2 -> 0 + (1 + 2) / 2
  EXPECT_NEAR(spr_loss(out, gt, 1.0, 10.0).item(), 1.5, 1e-12);
}

// ---- model -------------------------------------------------------------------

TEST(SprModel, VariantNamesRoundTrip) {
  for (Variant v : kVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("no-local"), ContractError);
}

TEST(SprModel, VariantsHashDifferently) {
  std::vector<std::string> seen;
  for (Variant v : kVariants) {
    const std::string c = toy_config(v).canonical();
    for (const auto& s : seen) EXPECT_NE(s, c);
    seen.push_back(c);
  }
}

TEST(SprModel, LocalBranchShapesAndAuxCount) {
  Rng rng(6);
  SprModel m(toy_config(), 11);
  for (std::size_t q : {2u, 5u, 9u}) {
    const auto out = m.local_branch(random_tensor({q, 8}, rng));
    EXPECT_EQ(out.processed.rows(), q - 1);
    EXPECT_EQ(out.aux_t.rows(), q - 1);
    EXPECT_EQ(out.aux_w.rows(), q - 1);
    EXPECT_EQ(out.feature.shape(), (ad::Shape{1, 8}));
  }
  EXPECT_THROW(m.local_branch(random_tensor({1, 8}, rng)), ContractError);
  ad::Graph::current().clear();
}

TEST(SprModel, LocalBranchIgnoresAConstantOffset) {
  Rng rng(7);
  SprModel m(toy_config(), 12);
  const Tensor x = random_tensor({5, 8}, rng);
  Tensor y = x.clone();
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) y.mutable_data()[r * 8 + c] += 0.3 * static_cast<double>(c);
  ad::NoGradGuard guard;
  const auto a = m.local_branch(x).feature, b = m.local_branch(y).feature;
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a.at(i), b.at(i), 1e-12);
}

TEST(SprModel, OutputsPerVariant) {
  Rng rng(8);
  for (Variant v : kVariants) {
    SprModel m(toy_config(v), 13);
    ad::NoGradGuard guard;
    const auto out = m.forward(random_tensor({4, 8}, rng));
    EXPECT_EQ(out.t.defined(), v != Variant::NoGlobal) << variant_name(v);
    EXPECT_EQ(out.aux_t.defined(), v == Variant::Full || v == Variant::NoGlobal) << variant_name(v);
  }
}

TEST(SprModel, GradcheckEndToEnd) {
  // q = 3, d = 8 toy; five seeded instances of the full model plus one of
  // every other variant
  for (int s = 0; s < 8; ++s) {
    const Variant v = s < 5 ? Variant::Full : kVariants[static_cast<std::size_t>(s - 4)];
    Rng rng(100 + s);
    SprModel m(toy_config(v), 200 + s);
    const Tensor x = random_tensor({3, 8}, rng);
    std::vector<geo::Pose> poses = random_walk(rng, 3);
    const auto gt = WindowTargets::from_poses(poses);
    auto loss = [&] { return spr_loss(m.forward(x), gt, 1.0, 10.0); };
    std::vector<Tensor> inputs = m.params().tensors();
    inputs.push_back(x);
    // losses near 30 leave ~1e-9 of finite-difference roundoff, so the
    // relative floor sits at 1e-5
    const auto r = gradcheck(loss, inputs, 1e-5, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-4) << variant_name(v) << " seed " << s << ": " << r.worst;
    for (auto& t : inputs) t.set_requires_grad(false);
    for (auto& t : m.params().tensors()) t.set_requires_grad(true);
  }
}

TEST(SprModel, DeterministicGivenSeed) {
  Rng rng(9);
  const Tensor x = random_tensor({6, 8}, rng);
  SprModel a(toy_config(), 21), b(toy_config(), 21), c(toy_config(), 22);
  const auto pa = a.predict(x), pb = b.predict(x), pc = c.predict(x);
  EXPECT_EQ(pose_gap(pa, pb), 0.0);
  EXPECT_GT(pose_gap(pa, pc), 1e-6);
}

TEST(SprModel, PredictionsAreValidPosesForAllLengths) {
  Rng rng(10);
  for (Variant v : kVariants) {
    SprModel m(toy_config(v), 31);
    for (std::size_t q = 2; q <= 20; ++q) {
      const auto p = m.predict(random_tensor({q, 8}, rng));
      EXPECT_NEAR(p.q.u() * p.q.u() + p.q.v().squaredNorm(), 1.0, 1e-12);
      EXPECT_GE(p.q.u(), 0.0);
      EXPECT_TRUE(p.t.allFinite());
    }
  }
}

TEST(SprModel, NoGlobalChainsItsStepOutputs) {
  Rng rng(11);
  SprModel m(toy_config(Variant::NoGlobal), 41);
  const Tensor x = random_tensor({6, 8}, rng);
  ad::NoGradGuard guard;
  const auto out = m.forward(x);
  geo::Pose chained;
  for (std::size_t i = 0; i < 5; ++i) {
    const PoseVector step{{out.aux_t.at(i * 3), out.aux_t.at(i * 3 + 1), out.aux_t.at(i * 3 + 2)},
                          {out.aux_w.at(i * 3), out.aux_w.at(i * 3 + 1), out.aux_w.at(i * 3 + 2)}};
    chained = geo::compose(chained, step.to_pose());
  }
  EXPECT_LT(pose_gap(m.predict(x), chained), 1e-12);
}

TEST(SprModel, StreamingEqualsBatchForEveryVariant) {
  Rng rng(12);
  SprModelConfig cfg;  // default desk size
  cfg.d_model = 16;
  for (Variant v : kVariants) {
    cfg.variant = v;
    SprModel m(cfg, 51);
    const Tensor x = random_tensor({20, 16}, rng);
    StreamingPredictor stream(m);
    double worst = 0.0;
    for (std::size_t q = 1; q <= 20; ++q) {
      Eigen::VectorXd row(16);
      for (Eigen::Index k = 0; k < 16; ++k) row(k) = x.at((q - 1) * 16 + static_cast<std::size_t>(k));
      stream.push(row);
      if (q < 2) continue;
      worst = std::max(worst, pose_gap(stream.current(), m.predict(ad::slice_rows(x, 0, q))));
    }
    EXPECT_LT(worst, 1e-9) << variant_name(v);
  }
}

TEST(SprModel, StreamingNeedsTwoFrames) {
  SprModel m(toy_config(), 61);
  StreamingPredictor stream(m);
  EXPECT_THROW(stream.current(), ContractError);
  stream.push(Eigen::VectorXd::Zero(8));
  EXPECT_THROW(stream.current(), ContractError);
  EXPECT_THROW(stream.push(Eigen::VectorXd::Zero(7)), ContractError);
}

TEST(SprModel, OverfitsASingleWindow) {
  Rng rng(13);
  SprModel m(toy_config(), 71);
  const Tensor x = random_tensor({5, 8}, rng);
  const auto gt = WindowTargets::from_poses(random_walk(rng, 5));
  TrainTask task;
  task.items = 1;
  task.item_loss = [&](std::size_t) { return spr_loss(m.forward(x), gt, 1.0, 10.0); };
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.warmup_epochs = 10;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  cfg.batch_size = 1;
  const auto history = fit(m.params(), task, cfg);
  EXPECT_LT(history.back().train_loss, 0.02 * history.front().train_loss);
}

// ---- training plumbing -------------------------------------------------------

TEST(Training, ConfigValidation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 1;
  EXPECT_THROW(c.validate(), ContractError);  // warmup 2 >= epochs
  c.warmup_epochs = 0;
  EXPECT_NO_THROW(c.validate());
  c.window = 1;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(Training, EnumerateWindows) {
  std::vector<FeatureTrajectory> trajs(2);
  trajs[0].poses.resize(5);
  trajs[1].poses.resize(7);
  const auto w = enumerate_windows(trajs, 5);
  ASSERT_EQ(w.size(), 1u + 3u);
  EXPECT_EQ(w[0], (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_EQ(w[3], (std::pair<std::size_t, std::size_t>{1, 2}));
}

TEST(Training, NonFiniteLossIsNumericError) {
  ad::ParamSet params;
  Tensor p = Tensor::scalar(1.0, true);
  params.add("p", p);
  TrainTask task;
  task.items = 1;
  task.item_loss = [&](std::size_t) { return ad::mul(p, Tensor::scalar(std::nan(""))); };
  TrainConfig cfg;
  cfg.epochs = 3;
  EXPECT_THROW(fit(params, task, cfg), NumericDomainError);
}

TEST(Training, MedianOfNoErrorsIsNan) { EXPECT_TRUE(std::isnan(median_error({}).te)); }
