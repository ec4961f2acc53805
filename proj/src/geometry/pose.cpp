#include "sprkit/geometry/pose.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sprkit/core/error.hpp"

namespace sprkit::geo {

namespace {

constexpr double kSmall = 1e-12;

bool needs_flip(double u, const Vec3& v) {
  if (u != 0.0) return u < 0.0;
  for (int i = 0; i < 3; ++i) {
    if (v[i] != 0.0) return v[i] < 0.0;
  }
  return false;
}

}  // namespace

UnitQuaternion UnitQuaternion::normalized(double u, const Vec3& v) {
  const double n = std::sqrt(u * u + v.squaredNorm());
  if (!(n > kSmall) || !std::isfinite(n)) throw ContractError("cannot normalize a zero or non-finite quaternion");
  u /= n;
  Vec3 vv = v / n;
  if (needs_flip(u, vv)) {
    u = -u;
    vv = -vv;
  }
  return {u, vv};
}

UnitQuaternion UnitQuaternion::checked(double u, const Vec3& v) {
  const double n = std::sqrt(u * u + v.squaredNorm());
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw ContractError(fmt::format("quaternion is not unit: |q| = {:.9g}", n));
  }
  // Already unit to rounding: keep the bits so text roundtrips are exact.
  if (std::abs(n - 1.0) <= 1e-15) return needs_flip(u, v) ? UnitQuaternion(-u, -v) : UnitQuaternion(u, v);
  return normalized(u, v);
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (n < kSmall) return {};
  return normalized(std::cos(angle_rad / 2), axis / n * std::sin(angle_rad / 2));
}

UnitQuaternion UnitQuaternion::from_yaw(double yaw_rad) { return from_axis_angle(Vec3::UnitZ(), yaw_rad); }

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& rhs) const {
  const double u = u_ * rhs.u_ - v_.dot(rhs.v_);
  const Vec3 v = u_ * rhs.v_ + rhs.u_ * v_ + v_.cross(rhs.v_);
  return normalized(u, v);
}

UnitQuaternion UnitQuaternion::conjugate() const { return normalized(u_, -v_); }

Vec3 UnitQuaternion::rotate(const Vec3& p) const {
  // q p q* expanded: p + 2u (v x p) + 2 v x (v x p)
  const Vec3 c = v_.cross(p);
  return p + 2.0 * u_ * c + 2.0 * v_.cross(c);
}

double UnitQuaternion::yaw() const {
  const Vec3 fwd = rotate(Vec3::UnitX());
  return std::atan2(fwd.y(), fwd.x());
}

RotationLog quat_log(const UnitQuaternion& q) {
  const double vn = q.v().norm();
  if (vn <= kSmall) return {};
  return {q.v() / vn * std::acos(std::clamp(q.u(), -1.0, 1.0))};
}

RotationLog quat_log(double u, const Vec3& v) {
  const double n = std::sqrt(u * u + v.squaredNorm());
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw ContractError(fmt::format("quat_log needs a unit quaternion, |q| = {:.9g}", n));
  }
  // The raw components are used as given (no sign canonicalization) so the
  // formula is evaluated on exactly the caller's q.
  const double vn = v.norm();
  if (vn <= kSmall) return {};
  return {v / vn * std::acos(std::clamp(u / n, -1.0, 1.0))};
}

UnitQuaternion quat_exp(const RotationLog& w) {
  const double a = w.w.norm();
  if (a < kSmall) return {};
  return UnitQuaternion::normalized(std::cos(a), w.w / a * std::sin(a));
}

Pose compose(const Pose& a, const Pose& b) { return {a.t + a.q.rotate(b.t), a.q * b.q}; }

Pose inverse(const Pose& p) {
  const UnitQuaternion qi = p.q.conjugate();
  return {-qi.rotate(p.t), qi};
}

Pose relative(const Pose& origin, const Pose& query) { return compose(inverse(origin), query); }

PoseError pose_error(const Pose& pred, const Pose& gt) {
  const double te = (pred.t - gt.t).norm();
  // geodesic angle 2 acos|<q1,q2>|, in the atan2 form that stays exact near zero
  const auto& a = pred.q;
  const auto& b = gt.q;
  // components of conj(a) b, left unnormalized so identical inputs give exactly 0
  const Vec3 dv = a.u() * b.v() - b.u() * a.v() - a.v().cross(b.v());
  const double du = a.u() * b.u() + a.v().dot(b.v());
  const double re = 360.0 / std::numbers::pi * std::atan2(dv.norm(), std::abs(du));
  return {te, re};
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PoseError aggregate_errors(std::span<const PoseError> errors, Statistic stat) {
  if (errors.empty()) throw ContractError("aggregate_errors needs at least one error");
  std::vector<double> te, re;
  te.reserve(errors.size());
  re.reserve(errors.size());
  for (const auto& e : errors) {
    te.push_back(e.te);
    re.push_back(e.re);
  }
  if (stat == Statistic::Median) return {median(std::move(te)), median(std::move(re))};
  double st = 0, sr = 0;
  for (std::size_t i = 0; i < te.size(); ++i) {
    st += te[i];
    sr += re[i];
  }
  const double n = static_cast<double>(errors.size());
  return {st / n, sr / n};
}

std::string pose_to_csv(const Pose& p) {
  return fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", p.t.x(), p.t.y(), p.t.z(), p.q.u(),
                     p.q.v().x(), p.q.v().y(), p.q.v().z());
}

Pose pose_from_csv(const std::string& row) {
  std::stringstream ss(row);
  std::string field;
  std::vector<double> f;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t used = 0;
      f.push_back(std::stod(field, &used));
    } catch (const std::exception&) {
      throw ContractError("malformed pose field '" + field + "'");
    }
  }
  if (f.size() != 7) throw ContractError("pose row needs 7 fields, got " + std::to_string(f.size()));
  return {Vec3(f[0], f[1], f[2]), UnitQuaternion::checked(f[3], Vec3(f[4], f[5], f[6]))};
}

}  // namespace sprkit::geo
