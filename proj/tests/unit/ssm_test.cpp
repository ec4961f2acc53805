#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sprkit/core/error.hpp"
#include "sprkit/ssm/mamba.hpp"
#include "sprkit/ssm/ssm.hpp"
#include "support/expm_oracle.hpp"
#include "support/gradcheck.hpp"

using namespace sprkit::ssm;
namespace ad = sprkit::ad;
using ad::Tensor;
using sprkit::testing::gradcheck;
using sprkit::testing::random_tensor;

namespace {

ContinuousSsmParams random_lti(sprkit::Rng& rng, Eigen::Index d, Eigen::Index n) {
  ContinuousSsmParams p{ChannelStates(d, n), ChannelStates(d, n), ChannelStates(d, n)};
  for (Eigen::Index i = 0; i < p.a.size(); ++i) {
    p.a(i) = -sprkit::uniform(rng, 0.05, 4.0);
    p.b(i) = sprkit::uniform(rng, -1, 1);
    p.c(i) = sprkit::uniform(rng, -1, 1);
  }
  return p;
}

Sequence random_sequence(sprkit::Rng& rng, Eigen::Index l, Eigen::Index d) {
  Sequence x(l, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = sprkit::uniform(rng, -1, 1);
  return x;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

}  // namespace

TEST(Zoh, HalfDecay) {
  ContinuousSsmParams p{ChannelStates::Constant(1, 1, -1.0), ChannelStates::Constant(1, 1, 2.0),
                        ChannelStates::Constant(1, 1, 1.0)};
  auto d = discretize_zoh(p, std::log(2.0));
  EXPECT_NEAR(d.abar(0, 0), 0.5, 1e-16);
  EXPECT_NEAR(d.bbar(0, 0), 2.0 * 0.5, 1e-15);  // (1 - 1/2) / 1 * B
}

TEST(Zoh, VanishingRateLimit) {
  ContinuousSsmParams p{ChannelStates::Constant(1, 1, -1e-14), ChannelStates::Constant(1, 1, 3.0),
                        ChannelStates::Constant(1, 1, 1.0)};
  auto d = discretize_zoh(p, 0.25);
  EXPECT_NEAR(d.bbar(0, 0), 0.75, 1e-13);
}

TEST(Zoh, NonPositiveStepIsContractError) {
  ContinuousSsmParams p{ChannelStates::Constant(1, 1, -1.0), ChannelStates::Constant(1, 1, 1.0),
                        ChannelStates::Constant(1, 1, 1.0)};
  EXPECT_THROW(discretize_zoh(p, 0.0), sprkit::ContractError);
  EXPECT_THROW(discretize_zoh(p, -0.1), sprkit::ContractError);
  p.a(0) = 0.5;
  EXPECT_THROW(discretize_zoh(p, 0.1), sprkit::ContractError);
}

TEST(Zoh, MatchesMatrixExponentialOracle) {
  sprkit::Rng rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_lti(rng, 3, 8);
    if (trial % 10 == 0) p.a(0, 0) = -1e-13;  // a -> 0 limit
    const double delta = sprkit::uniform(rng, 0.01, 1.5);
    auto d = discretize_zoh(p, delta);
    for (Eigen::Index ch = 0; ch < 3; ++ch) {
      auto [abar, bbar] = sprkit::testing::zoh_oracle_diagonal(p.a.row(ch).transpose().matrix(),
                                                               p.b.row(ch).transpose().matrix(), delta);
      for (Eigen::Index n = 0; n < 8; ++n) {
        worst = std::max(worst, std::abs(d.abar(ch, n) - abar(n)) / std::max(1.0, std::abs(abar(n))));
        worst = std::max(worst, std::abs(d.bbar(ch, n) - bbar(n)) / std::max(1.0, std::abs(bbar(n))));
      }
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Zoh, StableDecayFactorInUnitInterval) {
  sprkit::Rng rng(2);
  auto p = random_lti(rng, 4, 6);
  auto d = discretize_zoh(p, 0.3);
  EXPECT_TRUE((d.abar > 0.0).all());
  EXPECT_TRUE((d.abar < 1.0).all());
}

TEST(Scan, ZeroInputGivesZeroOutput) {
  sprkit::Rng rng(3);
  auto p = random_lti(rng, 2, 4);
  const auto d = discretize_zoh(p, 0.1);
  auto r = scan_recurrent(std::span(&d, 1), p.c, Sequence::Zero(7, 2));
  EXPECT_TRUE(r.y.isZero(0.0));
  EXPECT_TRUE(r.final.isZero(0.0));
}

TEST(Scan, SingleStep) {
  sprkit::Rng rng(4);
  auto p = random_lti(rng, 2, 3);
  const auto d = discretize_zoh(p, 0.2);
  Sequence x(1, 2);
  x << 0.7, -1.3;
  auto r = scan_recurrent(std::span(&d, 1), p.c, x);
  for (Eigen::Index ch = 0; ch < 2; ++ch) {
    const double expect = (p.c.row(ch) * d.bbar.row(ch)).sum() * x(0, ch);
    EXPECT_NEAR(r.y(0, ch), expect, 1e-15);
  }
}

TEST(Scan, FourStepScalarUnroll) {
  // y_t = C Bbar sum_{s<=t} Abar^{t-s} x_s written out as polynomials in Abar
  ContinuousSsmParams p{ChannelStates::Constant(1, 1, -0.7), ChannelStates::Constant(1, 1, 1.3),
                        ChannelStates::Constant(1, 1, -0.4)};
  const auto d = discretize_zoh(p, 0.5);
  const double A = d.abar(0, 0), B = d.bbar(0, 0), C = -0.4;
  Sequence x(4, 1);
  x << 1.0, -2.0, 0.5, 3.0;
  const double expect[4] = {
      C * B * x(0),
      C * B * (A * x(0) + x(1)),
      C * B * (A * A * x(0) + A * x(1) + x(2)),
      C * B * (A * A * A * x(0) + A * A * x(1) + A * x(2) + x(3)),
  };
  auto r = scan_recurrent(std::span(&d, 1), p.c, x);
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(r.y(t, 0), expect[t], 1e-15);
  EXPECT_NEAR(r.final(0, 0), expect[3] / C, 1e-15);
}

TEST(Scan, BoundedOverLongHorizon) {
  sprkit::Rng rng(5);
  auto p = random_lti(rng, 3, 4);
  const auto d = discretize_zoh(p, 0.05);
  auto x = random_sequence(rng, 10000, 3);
  auto r = scan_recurrent(std::span(&d, 1), p.c, x);
  // |h| <= |Bbar| / (1 - Abar) for |x| <= 1
  const ChannelStates bound = d.bbar.abs() / (1.0 - d.abar);
  EXPECT_TRUE((r.final.abs() <= bound + 1e-12).all());
  EXPECT_TRUE(r.y.allFinite());
  EXPECT_LE(r.y.cwiseAbs().maxCoeff(), (p.c.abs() * bound).rowwise().sum().maxCoeff() + 1e-12);
}

TEST(Conv, FirstTapAndImpulse) {
  sprkit::Rng rng(6);
  auto p = random_lti(rng, 2, 5);
  const auto d = discretize_zoh(p, 0.3);
  auto k = ssm_kernel(d, p.c, 10);
  for (Eigen::Index ch = 0; ch < 2; ++ch) EXPECT_NEAR(k(0, ch), (p.c.row(ch) * d.bbar.row(ch)).sum(), 1e-16);
  Sequence impulse = Sequence::Zero(10, 2);
  impulse.row(0).setOnes();
  EXPECT_EQ(scan_convolutional(std::span(&d, 1), p.c, impulse), k);
}

TEST(Conv, TimeVaryingIsContractError) {
  sprkit::Rng rng(7);
  auto p = random_lti(rng, 2, 3);
  std::vector<Discretization> steps{discretize_zoh(p, 0.1), discretize_zoh(p, 0.2)};
  EXPECT_THROW(scan_convolutional(steps, p.c, Sequence::Zero(2, 2)), sprkit::ContractError);
  std::vector<Discretization> same{discretize_zoh(p, 0.1), discretize_zoh(p, 0.1)};
  EXPECT_NO_THROW(scan_convolutional(same, p.c, Sequence::Zero(2, 2)));
}

TEST(Conv, DualityWithRecurrentScan) {
  sprkit::Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto l = sprkit::uniform_int(rng, 1, 64);
    const auto dch = sprkit::uniform_int(rng, 1, 4);
    const auto n = sprkit::uniform_int(rng, 1, 8);
    auto p = random_lti(rng, dch, n);
    const auto d = discretize_zoh(p, sprkit::uniform(rng, 0.01, 1.0));
    auto x = random_sequence(rng, l, dch);
    const Sequence rec = scan_recurrent(std::span(&d, 1), p.c, x).y;
    const Sequence conv = scan_convolutional(std::span(&d, 1), p.c, x);
    worst = std::max(worst, (rec - conv).cwiseAbs().maxCoeff() / std::max(rec.cwiseAbs().maxCoeff(), 1e-300));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Selective, ZeroInputGivesZeroOutput) {
  sprkit::Rng rng(9);
  ad::ParamSet params;
  SelectiveSsm ssm(params, "s", 3, 4, rng);
  auto out = ssm.forward(Tensor::zeros({6, 3}));
  for (double v : out.y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Selective, ReducesToLtiScanWhenProjectionsArePinned) {
  // Channel 0 carries a constant 1, the only row of W_B / W_C that is non-zero,
  // so B_t and C_t are constant; W_delta = 0 makes delta_t = softplus(b_delta).
  sprkit::Rng rng(10);
  const std::size_t D = 3, N = 4, L = 9;
  ad::ParamSet params;
  SelectiveSsm ssm(params, "s", D, N, rng);
  auto wb = ssm.w_b.mutable_data();
  auto wc = ssm.w_c.mutable_data();
  for (std::size_t d = 1; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) wb[d * N + n] = wc[d * N + n] = 0.0;
  for (auto& w : ssm.w_delta.mutable_data()) w = 0.0;
  for (auto& b : ssm.b_delta.mutable_data()) b = 0.3;
  for (std::size_t i = 0; i < ssm.a_log.numel(); ++i) ssm.a_log.mutable_data()[i] = sprkit::uniform(rng, -1, 1);

  Sequence x = random_sequence(rng, L, D);
  x.col(0).setOnes();
  std::vector<double> xv(x.data(), x.data() + x.size());
  auto out = ssm.forward(Tensor::from({L, D}, xv));

  ContinuousSsmParams p{ChannelStates(D, N), ChannelStates(D, N), ChannelStates(D, N)};
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) {
      p.a(d, n) = -std::exp(ssm.a_log.at(d, n));
      p.b(d, n) = wb[n];
      p.c(d, n) = wc[n];
    }
  const auto disc = discretize_zoh(p, std::log1p(std::exp(0.3)));
  auto ref = scan_recurrent(std::span(&disc, 1), p.c, x);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t d = 0; d < D; ++d) EXPECT_NEAR(out.y.at(t, d), ref.y(t, d), 1e-12);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) EXPECT_NEAR(out.h.at(d, n), ref.final(d, n), 1e-12);
}

TEST(Selective, StepSizeStartsNearOneTenth) {
  sprkit::Rng rng(11);
  ad::ParamSet params;
  SelectiveSsm ssm(params, "s", 2, 3, rng);
  for (double b : ssm.b_delta.data()) EXPECT_NEAR(std::log1p(std::exp(b)), 0.1, 1e-12);
  auto a = ssm.state_matrix();
  EXPECT_DOUBLE_EQ(a.at(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(a.at(1, 2), -3.0);
}

TEST(Selective, GradcheckAllParameters) {
  sprkit::Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    ad::ParamSet params;
    SelectiveSsm ssm(params, "s", 3, 4, rng);
    Tensor x = random_tensor({6, 3}, rng);
    Tensor w = random_tensor({6, 3}, rng);
    auto loss = [&] { return ad::sum(ad::mul(ssm.forward(x).y, w)); };
    auto r_delta = gradcheck(loss, {ssm.w_delta});
    EXPECT_LT(r_delta.max_rel_error, 1e-4) << r_delta.worst;
    auto r_all = gradcheck(loss, {ssm.w_b, ssm.w_c, ssm.b_delta, ssm.a_log, x});
    EXPECT_LT(r_all.max_rel_error, 1e-4) << r_all.worst;
  }
}

TEST(Mamba, ZeroOutProjectionIsIdentity) {
  sprkit::Rng rng(13);
  ad::ParamSet params;
  MambaBlock block(params, "m", 4, 2, 3, rng);
  for (auto& w : block.out_proj.weight().mutable_data()) w = 0.0;
  Tensor x = random_tensor({5, 4}, rng);
  EXPECT_EQ(max_abs_diff(block.forward(x), x), 0.0);
}

TEST(Mamba, PreservesLength) {
  sprkit::Rng rng(14);
  ad::ParamSet params;
  MambaBlock block(params, "m", 4, 2, 3, rng);
  EXPECT_EQ(block.hidden(), 8u);
  for (std::size_t l : {1u, 5u, 20u}) EXPECT_EQ(block.forward(random_tensor({l, 4}, rng)).shape(), (ad::Shape{l, 4}));
  EXPECT_THROW(block.forward(Tensor::zeros({3, 5})), sprkit::ContractError);
}

TEST(Mamba, Causality) {
  sprkit::Rng rng(15);
  ad::ParamSet params;
  MambaBlock block(params, "m", 4, 2, 3, rng);
  Tensor x = random_tensor({8, 4}, rng);
  const Tensor base = block.forward(x);
  for (std::size_t t = 0; t < 8; ++t) {
    Tensor xp = x.clone();
    xp.mutable_data()[t * 4 + 1] += 0.5;
    const Tensor y = block.forward(xp);
    for (std::size_t s = 0; s < 8; ++s) {
      double diff = 0.0;
      for (std::size_t c = 0; c < 4; ++c) diff = std::max(diff, std::abs(y.at(s, c) - base.at(s, c)));
      if (s < t) {
        EXPECT_EQ(diff, 0.0) << "t=" << t << " s=" << s;
      } else if (s == t) {
        EXPECT_GT(diff, 0.0);
      }
    }
  }
}

TEST(Mamba, GradcheckAllParameters) {
  sprkit::Rng rng(16);
  for (int trial = 0; trial < 5; ++trial) {
    ad::ParamSet params;
    MambaBlock block(params, "m", 3, 2, 2, rng);
    Tensor x = random_tensor({4, 3}, rng);
    Tensor w = random_tensor({4, 3}, rng);
    auto inputs = params.tensors();
    inputs.push_back(x);
    auto r = gradcheck([&] { return ad::sum(ad::mul(block.forward(x), w)); }, inputs);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  }
}

TEST(Mamba, StreamingStepMatchesForward) {
  sprkit::Rng rng(17);
  ad::ParamSet params;
  MambaBlock block(params, "m", 4, 2, 3, rng);
  Tensor x = random_tensor({12, 4}, rng);
  const Tensor full = block.forward(x);
  Tensor h;
  for (std::size_t t = 0; t < 12; ++t) {
    const Tensor y = block.step(ad::row(x, t), h);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y.at(0, c), full.at(t, c));
  }
}

TEST(LastHidden, Selection) {
  Tensor single = Tensor::matrix({{1, 2}});
  EXPECT_EQ(max_abs_diff(last_hidden_select(single), single), 0.0);
  Tensor seq = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(last_hidden_select(seq).at(0, 1), 6.0);
  EXPECT_THROW(last_hidden_select(std::vector<Tensor>{}), sprkit::ContractError);

  // appending a step changes the selected feature of a stateful stack
  sprkit::Rng rng(18);
  ad::ParamSet params;
  MambaBlock block(params, "m", 4, 2, 3, rng);
  Tensor x = random_tensor({5, 4}, rng);
  Tensor xs = ad::concat_rows({x, random_tensor({1, 4}, rng)});
  EXPECT_GT(max_abs_diff(last_hidden_select(block.forward(x)), last_hidden_select(block.forward(xs))), 0.0);
}
