#include "sprkit/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sprkit/core/error.hpp"

namespace sprkit::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
// Splats are cut off beyond this many sigmas.
constexpr double kWindow = 3.0;

// Landmark bearings seen from one camera centre, precomputed per render.
struct Bearings {
  std::vector<Vec3> dir;
  const Scene* scene;
};

Bearings bearings_from(const Scene& scene, const Vec3& eye) {
  Bearings b{{}, &scene};
  b.dir.reserve(scene.landmarks.size());
  for (const auto& lm : scene.landmarks) {
    const Vec3 d = lm.position - eye;
    const double n = d.norm();
    b.dir.push_back(n > 1e-12 ? Vec3(d / n) : Vec3::Zero());
  }
  return b;
}

void splat(const Bearings& b, const Vec3& ray, double sigma, double* out, int channels) {
  const double cos_cut = std::cos(std::min(kPi, kWindow * sigma));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < b.dir.size(); ++i) {
    const double c = ray.dot(b.dir[i]);
    if (c < cos_cut) continue;
    const double theta = std::acos(std::min(1.0, c));
    const double w = std::exp(-theta * theta * inv);
    const auto& desc = b.scene->landmarks[i].descriptor;
    for (int k = 0; k < channels; ++k) out[k] += w * desc[static_cast<std::size_t>(k)];
  }
}

int descriptor_channels(const Scene& scene, int fallback) {
  return scene.landmarks.empty() ? fallback : static_cast<int>(scene.landmarks.front().descriptor.size());
}

}  // namespace

double Image::energy() const { return std::inner_product(data.begin(), data.end(), data.begin(), 0.0); }

double pano_longitude(int c, int width) { return kPi - 2.0 * kPi * c / width; }
double pano_latitude(int r, int height) { return kPi / 2 - kPi * r / height; }

Vec3 pano_direction(int r, int c, int height, int width) {
  const double lon = pano_longitude(c, width);
  const double lat = pano_latitude(r, height);
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

double pano_sigma(int height) { return 0.5 * kPi / height; }

geo::UnitQuaternion CaptureRig::view_rotation(int k) const {
  if (k < 0 || k >= kViewCount) throw ContractError("rig view index out of range");
  const double heading = headings_deg[static_cast<std::size_t>(k / 3)] * kDeg;
  const double elevation = elevations_deg[static_cast<std::size_t>(k % 3)] * kDeg;
  // pitching the optical axis up by `elevation` is a rotation about -y
  return geo::UnitQuaternion::from_yaw(heading) * geo::UnitQuaternion::from_axis_angle(Vec3::UnitY(), -elevation);
}

Vec3 CaptureRig::view_axis(int k) const { return view_rotation(k).rotate(Vec3::UnitX()); }

geo::Pose CaptureRig::view_pose(const geo::Pose& rig_pose, int k) const {
  geo::Pose local;
  local.q = view_rotation(k);
  return geo::compose(rig_pose, local);
}

Image render_pinhole(const Scene& scene, const geo::Pose& pose, double fov_deg, int res, double sigma_rad) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ContractError("pinhole fov must be in (0, 180) degrees");
  if (res < 1) throw ContractError("pinhole resolution must be positive");
  const int channels = descriptor_channels(scene, 0);
  Image img(res, res, channels);
  if (scene.landmarks.empty()) return img;
  const double fov = fov_deg * kDeg;
  const double sigma = sigma_rad > 0.0 ? sigma_rad : 0.5 * fov / res;
  const double focal = 0.5 * res / std::tan(fov / 2);
  const double mid = 0.5 * (res - 1);
  const Bearings b = bearings_from(scene, pose.t);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      const Vec3 cam(1.0, -(j - mid) / focal, -(i - mid) / focal);
      splat(b, pose.q.rotate(cam.normalized()), sigma, img.pixel(i, j), channels);
    }
  return img;
}

std::vector<Image> capture_rig(const Scene& scene, const CaptureRig& rig, const geo::Pose& rig_pose, double sigma_rad) {
  std::vector<Image> views;
  views.reserve(CaptureRig::kViewCount);
  for (int k = 0; k < CaptureRig::kViewCount; ++k)
    views.push_back(render_pinhole(scene, rig.view_pose(rig_pose, k), rig.fov_deg, rig.resolution, sigma_rad));
  return views;
}

Observation stitch_panorama(const CaptureRig& rig, const std::vector<Image>& pinholes, const geo::Pose& rig_pose,
                            int pano_height) {
  if (pinholes.size() != CaptureRig::kViewCount) {
    throw ContractError("stitching needs exactly 18 rig images, got " + std::to_string(pinholes.size()));
  }
  const int res = rig.resolution;
  const int channels = pinholes.front().channels;
  for (const Image& img : pinholes) {
    if (img.rows != res || img.cols != res || img.channels != channels) {
      throw ContractError("rig image resolution disagrees with the rig");
    }
  }
  const int width = 2 * pano_height;
  const double focal = 0.5 * res / std::tan(rig.fov_deg * kDeg / 2);
  const double mid = 0.5 * (res - 1);
  std::array<geo::UnitQuaternion, CaptureRig::kViewCount> inv;
  std::array<Vec3, CaptureRig::kViewCount> axis;
  for (int k = 0; k < CaptureRig::kViewCount; ++k) {
    inv[static_cast<std::size_t>(k)] = rig.view_rotation(k).conjugate();
    axis[static_cast<std::size_t>(k)] = rig.view_axis(k);
  }

  Observation obs{Image(pano_height, width, channels), rig.view_pose(rig_pose, CaptureRig::kPanoramaView)};
  // rays are expressed in the panorama (view 9) frame, which is the rig frame
  const geo::UnitQuaternion pano_in_rig = rig.view_rotation(CaptureRig::kPanoramaView);
  std::array<int, CaptureRig::kViewCount> order;
  for (int r = 0; r < pano_height; ++r)
    for (int c = 0; c < width; ++c) {
      const Vec3 ray = pano_in_rig.rotate(pano_direction(r, c, pano_height, width));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return ray.dot(axis[static_cast<std::size_t>(a)]) > ray.dot(axis[static_cast<std::size_t>(b)]);
      });
      int view = order[0];
      double u = 0, v = 0;
      bool found = false;
      for (int k : order) {
        const Vec3 p = inv[static_cast<std::size_t>(k)].rotate(ray);
        if (p.x() <= 1e-9) continue;
        const double uu = mid - focal * p.y() / p.x();  // column
        const double vv = mid - focal * p.z() / p.x();  // row
        if (uu >= 0 && uu <= res - 1 && vv >= 0 && vv <= res - 1) {
          view = k;
          u = uu;
          v = vv;
          found = true;
          break;
        }
      }
      if (!found) {
        const Vec3 p = inv[static_cast<std::size_t>(view)].rotate(ray);
        u = std::clamp(mid - focal * p.y() / p.x(), 0.0, res - 1.0);
        v = std::clamp(mid - focal * p.z() / p.x(), 0.0, res - 1.0);
      }
      const Image& img = pinholes[static_cast<std::size_t>(view)];
      const int c0 = std::min(static_cast<int>(std::floor(u)), res - 1);
      const int r0 = std::min(static_cast<int>(std::floor(v)), res - 1);
      const int c1 = std::min(c0 + 1, res - 1);
      const int r1 = std::min(r0 + 1, res - 1);
      const double fu = u - c0, fv = v - r0;
      double* out = obs.pano.pixel(r, c);
      for (int k = 0; k < channels; ++k) {
        out[k] = (1 - fv) * ((1 - fu) * img.pixel(r0, c0)[k] + fu * img.pixel(r0, c1)[k]) +
                 fv * ((1 - fu) * img.pixel(r1, c0)[k] + fu * img.pixel(r1, c1)[k]);
      }
    }
  return obs;
}

Observation render_observation(const Scene& scene, const geo::Pose& pose, int pano_height, int channels) {
  if (pano_height < 1) throw ContractError("panorama height must be positive");
  const int ch = descriptor_channels(scene, channels);
  if (ch != channels) throw ContractError("panorama channels disagree with the scene descriptors");
  const int width = 2 * pano_height;
  Observation obs{Image(pano_height, width, channels), pose};
  if (scene.landmarks.empty()) return obs;
  const Bearings b = bearings_from(scene, pose.t);
  const double sigma = pano_sigma(pano_height);
  for (int r = 0; r < pano_height; ++r)
    for (int c = 0; c < width; ++c)
      splat(b, pose.q.rotate(pano_direction(r, c, pano_height, width)), sigma, obs.pano.pixel(r, c), channels);
  return obs;
}

Observation crop_fov(const Observation& obs, double fov_deg) {
  if (!(fov_deg > 0.0 && fov_deg <= 360.0)) throw ContractError("crop fov must be in (0, 360] degrees");
  Observation out = obs;
  const int width = obs.pano.cols;
  const int keep = static_cast<int>(std::lround(width * fov_deg / 360.0));
  const int begin = (width - keep) / 2;
  for (int r = 0; r < obs.pano.rows; ++r)
    for (int c = 0; c < width; ++c) {
      if (c >= begin && c < begin + keep) continue;
      std::fill_n(out.pano.pixel(r, c), obs.pano.channels, 0.0);
    }
  return out;
}

double relative_energy_error(const Image& a, const Image& b) {
  if (a.data.size() != b.data.size()) throw DimensionError("energy error between images of different size");
  double num = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) num += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const double den = b.energy();
  return den > 0 ? num / den : (num > 0 ? std::numeric_limits<double>::infinity() : 0.0);
}

}  // namespace sprkit::sim
