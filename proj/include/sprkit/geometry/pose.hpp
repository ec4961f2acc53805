#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <span>
#include <string>
#include <vector>

namespace sprkit::geo {

using Vec3 = Eigen::Vector3d;

/// Unit quaternion q = [u, v] kept in canonical sign (u > 0, or u == 0 with
/// the first non-zero imaginary component positive). Acts on column vectors
/// as q p q*.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;  // identity

  /// Normalizes and canonicalizes an arbitrary non-zero 4-vector.
  static UnitQuaternion normalized(double u, const Vec3& v);
  /// Requires |norm - 1| <= 1e-6 (ContractError otherwise); canonicalizes the
  /// sign and renormalizes away the residual.
  static UnitQuaternion checked(double u, const Vec3& v);
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad);
  static UnitQuaternion from_yaw(double yaw_rad);

  double u() const { return u_; }
  const Vec3& v() const { return v_; }

  UnitQuaternion operator*(const UnitQuaternion& rhs) const;
  UnitQuaternion conjugate() const;
  Vec3 rotate(const Vec3& p) const;
  double dot(const UnitQuaternion& rhs) const { return u_ * rhs.u_ + v_.dot(rhs.v_); }
  /// Rotation about the world z axis of the rotated x axis (camera heading).
  double yaw() const;

 private:
  UnitQuaternion(double u, const Vec3& v) : u_(u), v_(v) {}
  double u_ = 1.0;
  Vec3 v_ = Vec3::Zero();
};

/// w = log(q), the axis-angle vector up to a factor of two.
struct RotationLog {
  Vec3 w = Vec3::Zero();
};

/// World-from-camera rigid transform.
struct Pose {
  Vec3 t = Vec3::Zero();
  UnitQuaternion q;

  static Pose identity() { return {}; }
  Vec3 apply(const Vec3& p) const { return q.rotate(p) + t; }
};

struct PoseError {
  double te = 0.0;  // meters
  double re = 0.0;  // degrees
};

enum class Statistic { Median, Mean };

RotationLog quat_log(const UnitQuaternion& q);
/// Validating overload for raw components; throws ContractError when the
/// input is not unit within 1e-6.
RotationLog quat_log(double u, const Vec3& v);
UnitQuaternion quat_exp(const RotationLog& w);

/// a then b: the result maps b's frame into a's parent frame.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
/// inverse(origin) o query: the query pose expressed in the origin frame.
Pose relative(const Pose& origin, const Pose& query);

/// te = ||t_pred - t_gt||, re = geodesic angle in degrees (sign invariant).
PoseError pose_error(const Pose& pred, const Pose& gt);
/// Component-wise median (midpoint for even counts) or mean.
PoseError aggregate_errors(std::span<const PoseError> errors, Statistic stat);
double median(std::vector<double> values);

/// "tx,ty,tz,qu,qx,qy,qz" with 17 significant digits.
std::string pose_to_csv(const Pose& p);
/// Parses the seven comma-separated fields written by pose_to_csv.
Pose pose_from_csv(const std::string& row);

}  // namespace sprkit::geo
