#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "sprkit/geometry/pose.hpp"

namespace sprkit::sim {

using geo::Vec3;

struct Cell {
  int r = 0;
  int c = 0;
  auto operator<=>(const Cell&) const = default;
};

struct Landmark {
  Vec3 position;
  std::vector<double> descriptor;  // unit norm
};

struct SceneConfig {
  int rows = 32;
  int cols = 32;
  double cell_m = 0.5;
  int landmark_count = 160;
  int descriptor_dim = 16;
  int max_rooms = 7;
  /// Rooms beyond max_rooms are added until this much of the grid is free.
  double min_free_fraction = 0.35;
};

/// Occupancy grid plus landmarks. World x runs along columns, y along rows,
/// with the grid corner at the origin; cell (r, c) spans
/// [c, c+1) x [r, r+1) times cell_m.
struct Scene {
  std::uint64_t seed = 0;
  int rows = 0;
  int cols = 0;
  double cell_m = 0.5;
  std::vector<std::uint8_t> blocked;  // row-major, 1 = obstacle
  std::vector<Landmark> landmarks;

  bool inside(Cell c) const { return c.r >= 0 && c.c >= 0 && c.r < rows && c.c < cols; }
  bool navigable(Cell c) const { return inside(c) && !blocked[static_cast<std::size_t>(c.r) * cols + c.c]; }
  Vec3 center(Cell c, double z = 0.0) const { return {(c.c + 0.5) * cell_m, (c.r + 0.5) * cell_m, z}; }
  std::vector<Cell> navigable_cells() const;
  double navigable_fraction() const;
};

/// Rooms joined by corridors inside a walled border; everything outside the
/// largest 8-connected free component is filled in, so every free cell is
/// reachable from every other.
Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

/// Neighbours of `c` under the path graph: 4 axial moves of cost 1 and 4
/// diagonal moves of cost sqrt(2). A diagonal move needs both axial cells it
/// passes between to be free (no corner cutting).
std::vector<std::pair<Cell, double>> neighbours(const Scene& scene, Cell c);

/// Dijkstra from `start`. Ties in cost are broken by lexicographic cell
/// order, which makes the predecessor tree deterministic. Unreachable
/// cells hold +inf.
struct DistanceField {
  std::vector<double> cost;  // in cells
  std::vector<int> parent;   // flat index, -1 for start/unreached
};
DistanceField dijkstra(const Scene& scene, Cell start);

/// Minimal-cost cell path from start to goal (inclusive); NoPathError when
/// the goal is unreachable, ContractError when an endpoint is blocked.
std::vector<Cell> shortest_path(const Scene& scene, Cell start, Cell goal);
double path_cost(const std::vector<Cell>& path);

}  // namespace sprkit::sim
