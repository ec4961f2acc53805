#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sprkit/core/error.hpp"
#include "sprkit/core/seed.hpp"
#include "sprkit/geometry/pose.hpp"

using namespace sprkit::geo;
using std::numbers::pi;

namespace {

UnitQuaternion random_quat(sprkit::Rng& rng) {
  const Vec3 v(sprkit::gaussian(rng), sprkit::gaussian(rng), sprkit::gaussian(rng));
  return UnitQuaternion::normalized(sprkit::gaussian(rng), v);
}

Pose random_pose(sprkit::Rng& rng) {
  Pose p;
  p.t = Vec3(sprkit::uniform(rng, -10, 10), sprkit::uniform(rng, -10, 10), sprkit::uniform(rng, -10, 10));
  p.q = random_quat(rng);
  return p;
}

// Distance up to quaternion sign.
double quat_dist(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double plus = std::hypot(a.u() - b.u(), (a.v() - b.v()).norm());
  const double minus = std::hypot(a.u() + b.u(), (a.v() + b.v()).norm());
  return std::min(plus, minus);
}

double pose_dist(const Pose& a, const Pose& b) { return std::max((a.t - b.t).norm(), quat_dist(a.q, b.q)); }

}  // namespace

TEST(Quaternion, CanonicalSignAndUnitNorm) {
  sprkit::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    auto q = random_quat(rng);
    EXPECT_GE(q.u(), 0.0);
    EXPECT_NEAR(q.u() * q.u() + q.v().squaredNorm(), 1.0, 1e-9);
  }
  auto flipped = UnitQuaternion::normalized(0.0, Vec3(0, -1, 0));
  EXPECT_EQ(flipped.v().y(), 1.0);
}

TEST(Quaternion, CheckedRejectsNonUnit) {
  EXPECT_THROW(UnitQuaternion::checked(1.1, Vec3::Zero()), sprkit::ContractError);
  EXPECT_NO_THROW(UnitQuaternion::checked(1.0 + 5e-7, Vec3::Zero()));
}

TEST(QuatLog, IdentityIsZero) { EXPECT_EQ(quat_log(UnitQuaternion()).w, Vec3::Zero()); }

TEST(QuatLog, HalfTurnAboutZ) {
  auto w = quat_log(0.0, Vec3(0, 0, 1)).w;
  EXPECT_NEAR(w.x(), 0.0, 1e-15);
  EXPECT_NEAR(w.y(), 0.0, 1e-15);
  EXPECT_NEAR(w.z(), pi / 2, 1e-15);
}

TEST(QuatLog, QuarterTurnAboutX) {
  const double c = std::cos(pi / 4);
  auto w = quat_log(c, Vec3(std::sin(pi / 4), 0, 0)).w;
  EXPECT_NEAR(w.x(), pi / 4, 1e-15);
  EXPECT_EQ(w.y(), 0.0);
  EXPECT_EQ(w.z(), 0.0);
}

TEST(QuatLog, NonUnitRawInputThrows) {
  EXPECT_THROW(quat_log(0.5, Vec3(0, 0, 0.5)), sprkit::ContractError);
}

TEST(QuatLog, NormBoundedForCanonicalSign) {
  sprkit::Rng rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_LE(quat_log(random_quat(rng)).w.norm(), pi / 2 + 1e-9);
}

TEST(QuatExp, ZeroAndQuarter) {
  auto id = quat_exp({Vec3::Zero()});
  EXPECT_EQ(id.u(), 1.0);
  EXPECT_EQ(id.v(), Vec3::Zero());
  auto q = quat_exp({Vec3(pi / 2, 0, 0)});
  EXPECT_NEAR(q.u(), 0.0, 1e-15);
  EXPECT_NEAR(q.v().x(), 1.0, 1e-15);
}

TEST(QuatExp, RoundtripOnRandomQuaternions) {
  sprkit::Rng rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto q = random_quat(rng);
    worst = std::max(worst, quat_dist(quat_exp(quat_log(q)), q));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Compose, IdentityAndTranslations) {
  sprkit::Rng rng(4);
  auto p = random_pose(rng);
  EXPECT_LT(pose_dist(compose(p, Pose::identity()), p), 1e-12);
  Pose a, b;
  a.t = Vec3(1, 2, 3);
  b.t = Vec3(-4, 0.5, 1);
  EXPECT_LT((compose(a, b).t - Vec3(-3, 2.5, 4)).norm(), 1e-15);
}

TEST(Compose, GroupLawsOnRandomPoses) {
  sprkit::Rng rng(5);
  double assoc = 0, inv = 0, ident = 0, twice = 0;
  for (int i = 0; i < 1000; ++i) {
    auto a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    assoc = std::max(assoc, pose_dist(compose(compose(a, b), c), compose(a, compose(b, c))));
    inv = std::max(inv, pose_dist(compose(a, inverse(a)), Pose::identity()));
    inv = std::max(inv, pose_dist(compose(inverse(a), a), Pose::identity()));
    ident = std::max(ident, pose_dist(compose(Pose::identity(), a), a));
    twice = std::max(twice, pose_dist(inverse(inverse(a)), a));
  }
  EXPECT_LT(assoc, 1e-9);
  EXPECT_LT(inv, 1e-9);
  EXPECT_LT(ident, 1e-9);
  EXPECT_LT(twice, 1e-9);
}

TEST(Compose, AppliesRightOperandFirst) {
  sprkit::Rng rng(6);
  auto a = random_pose(rng), b = random_pose(rng);
  const Vec3 p(0.3, -1.2, 2.0);
  EXPECT_LT((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
}

TEST(Inverse, IdentityAndTranslation) {
  EXPECT_LT(pose_dist(inverse(Pose::identity()), Pose::identity()), 1e-15);
  Pose t;
  t.t = Vec3(1, -2, 3);
  EXPECT_LT((inverse(t).t + t.t).norm(), 1e-15);
}

TEST(Relative, DefiningIdentity) {
  sprkit::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    auto o = random_pose(rng), q = random_pose(rng);
    EXPECT_LT(pose_dist(compose(o, relative(o, q)), q), 1e-9);
    EXPECT_LT(pose_dist(relative(o, o), Pose::identity()), 1e-9);
    EXPECT_LT(pose_dist(relative(Pose::identity(), q), q), 1e-12);
  }
}

TEST(PoseError, ZeroOnIdenticalAndSignFlips) {
  sprkit::Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    auto p = random_pose(rng);
    auto e = pose_error(p, p);
    EXPECT_EQ(e.te, 0.0);
    EXPECT_NEAR(e.re, 0.0, 1e-5);  // acos near 1 amplifies rounding
    auto other = random_pose(rng);
    Pose flipped = other;
    flipped.q = UnitQuaternion::normalized(-other.q.u(), -other.q.v());
    EXPECT_NEAR(pose_error(p, flipped).re, pose_error(p, other).re, 1e-9);
    EXPECT_NEAR(pose_error(flipped, p).re, pose_error(other, p).re, 1e-9);
  }
}

TEST(PoseError, HalfTurnIs180Degrees) {
  Pose a, b;
  b.q = UnitQuaternion::from_axis_angle(Vec3::UnitY(), pi);
  EXPECT_NEAR(pose_error(a, b).re, 180.0, 1e-9);
}

TEST(PoseError, SymmetricAndSignInvariant) {
  sprkit::Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    auto a = random_pose(rng), b = random_pose(rng);
    const double ab = pose_error(a, b).re, ba = pose_error(b, a).re;
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 180.0);
    // the angle computed via the relative rotation agrees
    auto rel = a.q.conjugate() * b.q;
    EXPECT_NEAR(ab, 2.0 * quat_log(rel).w.norm() * 180.0 / pi, 1e-6);
  }
}

TEST(PoseError, TranslationIsEuclidean) {
  Pose a, b;
  b.t = Vec3(3, 4, 0);
  EXPECT_DOUBLE_EQ(pose_error(a, b).te, 5.0);
}

TEST(Aggregate, Examples) {
  std::vector<PoseError> one{{1.5, 7.0}};
  EXPECT_EQ(aggregate_errors(one, Statistic::Median).te, 1.5);
  EXPECT_EQ(aggregate_errors(one, Statistic::Mean).re, 7.0);
  std::vector<PoseError> three{{1, 0}, {2, 0}, {100, 0}};
  EXPECT_EQ(aggregate_errors(three, Statistic::Median).te, 2.0);
  std::vector<PoseError> mean{{1, 3}, {2, 2}, {3, 1}};
  EXPECT_DOUBLE_EQ(aggregate_errors(mean, Statistic::Mean).te, 2.0);
  std::vector<PoseError> even{{1, 0}, {4, 0}, {2, 0}, {3, 0}};
  EXPECT_EQ(aggregate_errors(even, Statistic::Median).te, 2.5);
  EXPECT_THROW(aggregate_errors(std::vector<PoseError>{}, Statistic::Mean), sprkit::ContractError);
}

TEST(PoseCsv, RoundtripIsExact) {
  sprkit::Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    auto p = random_pose(rng);
    auto back = pose_from_csv(pose_to_csv(p));
    EXPECT_EQ(back.t, p.t);
    EXPECT_EQ(back.q.u(), p.q.u());
    EXPECT_EQ(back.q.v(), p.q.v());
  }
  EXPECT_EQ(pose_to_csv(Pose::identity()), "0,0,0,1,0,0,0");
}
