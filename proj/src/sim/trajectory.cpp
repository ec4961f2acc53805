#include "sprkit/sim/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sprkit/core/error.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::sim {

void validate(const TrajectorySpec& spec) {
  if (!(spec.length_m >= 3.0 && spec.length_m <= 20.0)) {
    throw ContractError("trajectory length must be in [3, 20] m, got " + std::to_string(spec.length_m));
  }
  if (spec.num_points < 5 || spec.num_points > 20) {
    throw ContractError("trajectory needs 5..20 points, got " + std::to_string(spec.num_points));
  }
  if (std::find(kSensorHeights.begin(), kSensorHeights.end(), spec.height_m) == kSensorHeights.end()) {
    throw ContractError("sensor height must be one of 0.1, 0.5, 1.7 m");
  }
}

std::vector<Vec3> resample_equal_arclength(const std::vector<Vec3>& polyline, int count) {
  if (polyline.empty() || count < 2) throw ContractError("resampling needs a polyline and at least 2 stations");
  std::vector<double> cum(polyline.size(), 0.0);
  for (std::size_t i = 1; i < polyline.size(); ++i) cum[i] = cum[i - 1] + (polyline[i] - polyline[i - 1]).norm();
  const double total = cum.back();
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    const double s = total * k / (count - 1);
    while (seg + 2 < polyline.size() && cum[seg + 1] < s) ++seg;
    if (polyline.size() == 1) {
      out.push_back(polyline[0]);
      continue;
    }
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(polyline[seg] + f * (polyline[seg + 1] - polyline[seg]));
  }
  out.back() = polyline.back();
  return out;
}

std::vector<double> path_headings(const std::vector<Vec3>& stations) {
  std::vector<double> yaw(stations.size(), 0.0);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    Vec3 d = Vec3::UnitX();
    if (i > 0) {
      d = stations[i] - stations[i - 1];
    } else if (stations.size() > 1) {
      d = stations[1] - stations[0];
    }
    yaw[i] = std::atan2(d.y(), d.x());
  }
  return yaw;
}

Trajectory trajectory_along(const Scene& scene, const std::vector<Cell>& path, const TrajectorySpec& spec) {
  Trajectory traj;
  traj.spec = spec;
  traj.path = path;
  std::vector<Vec3> polyline;
  polyline.reserve(path.size());
  for (const Cell& c : path) polyline.push_back(scene.center(c, spec.height_m));
  traj.stations = resample_equal_arclength(polyline, spec.num_points);
  traj.base_yaw = path_headings(traj.stations);

  Rng rng(derive_seed(spec.seed, 0x0FF5E7));
  const double max_off = spec.max_heading_offset_deg * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < traj.stations.size(); ++i) {
    geo::Pose p;
    p.t = traj.stations[i];
    p.q = geo::UnitQuaternion::from_yaw(traj.base_yaw[i] + uniform(rng, -max_off, max_off));
    traj.poses.push_back(p);
  }
  return traj;
}

Trajectory sample_trajectory(const Scene& scene, const TrajectorySpec& spec) {
  validate(spec);
  const auto cells = scene.navigable_cells();
  if (cells.empty()) throw GenerationError("scene has no navigable cells");
  const double target = spec.length_m / scene.cell_m;  // in cells
  Rng rng(spec.seed);
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Cell start = cells[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(cells.size()) - 1))];
    const DistanceField field = dijkstra(scene, start);
    std::vector<Cell> goals;
    for (const Cell& c : cells) {
      const double d = field.cost[static_cast<std::size_t>(c.r) * scene.cols + c.c];
      if (std::abs(d - target) <= 1.0) goals.push_back(c);
    }
    if (goals.empty()) continue;
    const Cell goal = goals[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(goals.size()) - 1))];
    return trajectory_along(scene, shortest_path(scene, start, goal), spec);
  }
  throw GenerationError("no start/goal pair " + std::to_string(spec.length_m) + " m apart after 200 attempts");
}

}  // namespace sprkit::sim
