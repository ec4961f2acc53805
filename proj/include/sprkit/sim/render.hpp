#pragma once

#include <array>
#include <vector>

#include "sprkit/sim/scene.hpp"

namespace sprkit::sim {

/// rows x cols x channels, row-major with channels innermost.
struct Image {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int r, int c, int ch) : rows(r), cols(c), channels(ch), data(static_cast<std::size_t>(r) * c * ch, 0.0) {}
  double* pixel(int r, int c) { return data.data() + (static_cast<std::size_t>(r) * cols + c) * channels; }
  const double* pixel(int r, int c) const { return data.data() + (static_cast<std::size_t>(r) * cols + c) * channels; }
  double energy() const;
};

struct Observation {
  Image pano;
  geo::Pose pose;
};

/// Equirectangular convention in the camera frame (x forward, y left, z up):
/// column c has longitude pi - 2 pi c / W and row r latitude pi/2 - pi r / H,
/// so the centre column/row (c = W/2, r = H/2) looks straight ahead.
double pano_longitude(int c, int width);
double pano_latitude(int r, int height);
Vec3 pano_direction(int r, int c, int height, int width);
/// Half the angular pixel pitch of an H x 2H panorama.
double pano_sigma(int height);

/// 18-view capture rig: 6 headings x 3 elevations, views enumerated
/// heading-major (view = heading_index * 3 + elevation_index). View 9, the
/// 10th in capture order, is heading 0 / elevation 0 and carries the
/// panorama pose.
struct CaptureRig {
  std::array<double, 6> headings_deg = {-180, -120, -60, 0, 60, 120};
  std::array<double, 3> elevations_deg = {0, 60, -60};
  double fov_deg = 60.0;
  int resolution = 25;

  static constexpr int kViewCount = 18;
  static constexpr int kPanoramaView = 9;

  /// Rotation of view k relative to the rig body frame.
  geo::UnitQuaternion view_rotation(int k) const;
  /// Optical axis of view k in the rig body frame.
  Vec3 view_axis(int k) const;
  geo::Pose view_pose(const geo::Pose& rig_pose, int k) const;
};

/// Pinhole feature image: each pixel ray accumulates landmark descriptors
/// weighted by exp(-theta^2 / (2 sigma^2)) of the angle between ray and
/// landmark bearing (no occlusion). `sigma_rad` <= 0 selects half the pixel
/// pitch, fov / res / 2.
Image render_pinhole(const Scene& scene, const geo::Pose& pose, double fov_deg, int res, double sigma_rad = 0.0);

/// The 18 rig images for a rig placed at `rig_pose`.
std::vector<Image> capture_rig(const Scene& scene, const CaptureRig& rig, const geo::Pose& rig_pose,
                               double sigma_rad = 0.0);

/// Resamples the rig images onto an H x 2H panorama: each pixel goes to the
/// view whose optical axis is angularly nearest (falling back to the next
/// nearest view that contains the ray) and is sampled bilinearly.
Observation stitch_panorama(const CaptureRig& rig, const std::vector<Image>& pinholes, const geo::Pose& rig_pose,
                            int pano_height);

/// Renders every panorama ray directly with the same splat model.
Observation render_observation(const Scene& scene, const geo::Pose& pose, int pano_height, int channels);

/// Zeroes every column outside the central horizontal window of `fov_deg`.
/// The window keeps round(W * fov / 360) columns centred on W / 2.
Observation crop_fov(const Observation& obs, double fov_deg);

/// ||a - b||^2 / ||b||^2.
double relative_energy_error(const Image& a, const Image& b);

}  // namespace sprkit::sim
