#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sprkit/sim/scene.hpp"

namespace sprkit::sim {

inline constexpr std::array<double, 3> kSensorHeights = {0.1, 0.5, 1.7};

struct TrajectorySpec {
  double length_m = 5.0;
  int num_points = 5;
  double height_m = 1.7;
  std::uint64_t seed = 0;
  double max_heading_offset_deg = 60.0;
};

struct Trajectory {
  std::vector<geo::Pose> poses;
  TrajectorySpec spec;
  std::string scene_id;
  std::vector<Vec3> stations;        // resampled path points at z = height
  std::vector<double> base_yaw;      // heading before the random offset
  std::vector<Cell> path;            // the Dijkstra cell path
};

/// Validates the ranges (length in [3, 20] m, 5..20 points, one of
/// the three sensor heights); ContractError otherwise.
void validate(const TrajectorySpec& spec);

/// Points at equal arc-length spacing along a polyline, first and last
/// included.
std::vector<Vec3> resample_equal_arclength(const std::vector<Vec3>& polyline, int count);

/// Yaw of pose i faces from station i-1 toward station i; the first faces
/// its successor.
std::vector<double> path_headings(const std::vector<Vec3>& stations);

/// Picks start and goal with geodesic separation within one cell of
/// spec.length_m, resamples the Dijkstra path, orients each pose along the
/// path and adds an independent heading offset in +-max_heading_offset_deg.
/// GenerationError after 200 failed start draws.
Trajectory sample_trajectory(const Scene& scene, const TrajectorySpec& spec);

/// Builds the poses for a given cell path; exposed so callers can use a
/// fixed path instead of a sampled one.
Trajectory trajectory_along(const Scene& scene, const std::vector<Cell>& path, const TrajectorySpec& spec);

}  // namespace sprkit::sim
