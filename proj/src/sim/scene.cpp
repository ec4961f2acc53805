#include "sprkit/sim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "sprkit/core/error.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::sim {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

struct Room {
  int r0, c0, r1, c1;  // inclusive
  Cell middle() const { return {(r0 + r1) / 2, (c0 + c1) / 2}; }
};

void carve(Scene& s, int r0, int c0, int r1, int c1) {
  r0 = std::clamp(r0, 1, s.rows - 2);
  r1 = std::clamp(r1, 1, s.rows - 2);
  c0 = std::clamp(c0, 1, s.cols - 2);
  c1 = std::clamp(c1, 1, s.cols - 2);
  for (int r = std::min(r0, r1); r <= std::max(r0, r1); ++r)
    for (int c = std::min(c0, c1); c <= std::max(c0, c1); ++c) s.blocked[static_cast<std::size_t>(r) * s.cols + c] = 0;
}

// Labels components of the neighbour graph and keeps only the largest one.
std::size_t keep_largest_component(Scene& s) {
  const std::size_t n = s.blocked.size();
  std::vector<int> label(n, -1);
  int best = -1;
  std::size_t best_size = 0;
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.blocked[i] || label[i] >= 0) continue;
    std::size_t size = 0;
    std::vector<std::size_t> stack{i};
    label[i] = next;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      ++size;
      const Cell cell{static_cast<int>(k) / s.cols, static_cast<int>(k) % s.cols};
      for (const auto& [nb, cost] : neighbours(s, cell)) {
        const std::size_t j = static_cast<std::size_t>(nb.r) * s.cols + nb.c;
        if (label[j] < 0) {
          label[j] = next;
          stack.push_back(j);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = next;
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (label[i] != best) s.blocked[i] = 1;
  return best_size;
}

void place_landmarks(Scene& s, const SceneConfig& config, Rng& rng) {
  struct Face {
    Cell wall;
    int dr, dc;
  };
  std::vector<Face> faces;
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) {
      if (s.navigable({r, c})) continue;
      const int dirs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (const auto& d : dirs)
        if (s.navigable({r + d[0], c + d[1]})) faces.push_back({{r, c}, d[0], d[1]});
    }
  s.landmarks.clear();
  for (int i = 0; i < config.landmark_count; ++i) {
    const Face& f = faces[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(faces.size()) - 1))];
    const double along = uniform(rng, 0.0, 1.0);
    double x, y;
    if (f.dr != 0) {  // face shared with the cell above or below
      x = (f.wall.c + along) * s.cell_m;
      y = (f.wall.r + (f.dr > 0 ? 1.0 : 0.0)) * s.cell_m;
    } else {
      x = (f.wall.c + (f.dc > 0 ? 1.0 : 0.0)) * s.cell_m;
      y = (f.wall.r + along) * s.cell_m;
    }
    Landmark lm;
    lm.position = Vec3(x, y, uniform(rng, 0.0, 2.5));
    lm.descriptor.resize(static_cast<std::size_t>(config.descriptor_dim));
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : lm.descriptor) {
        v = gaussian(rng);
        norm += v * v;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& v : lm.descriptor) v /= norm;
    s.landmarks.push_back(std::move(lm));
  }
}

}  // namespace

std::vector<Cell> Scene::navigable_cells() const {
  std::vector<Cell> out;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (navigable({r, c})) out.push_back({r, c});
  return out;
}

double Scene::navigable_fraction() const {
  const auto free = std::count(blocked.begin(), blocked.end(), std::uint8_t{0});
  return static_cast<double>(free) / static_cast<double>(blocked.size());
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.rows < 8 || config.cols < 8) throw ContractError("scene grid must be at least 8x8 cells");
  if (config.landmark_count < 1) throw ContractError("scene needs at least one landmark");
  if (config.descriptor_dim < 1 || !(config.cell_m > 0.0)) throw ContractError("invalid scene config");

  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    Scene s;
    s.seed = seed;
    s.rows = config.rows;
    s.cols = config.cols;
    s.cell_m = config.cell_m;
    s.blocked.assign(static_cast<std::size_t>(s.rows) * s.cols, 1);

    const int max_h = std::max(4, s.rows * 2 / 5);
    const int max_w = std::max(4, s.cols * 2 / 5);
    const int n_rooms = static_cast<int>(uniform_int(rng, std::min(4, config.max_rooms), config.max_rooms));
    std::vector<Room> rooms;
    auto free_fraction = [&] { return s.navigable_fraction(); };
    // rooms are chained by L-shaped corridors two cells wide; extra rooms are
    // added until the free area reaches the configured fraction
    while (static_cast<int>(rooms.size()) < n_rooms ||
           (free_fraction() < config.min_free_fraction && static_cast<int>(rooms.size()) < 4 * config.max_rooms)) {
      const int h = static_cast<int>(uniform_int(rng, 4, max_h));
      const int w = static_cast<int>(uniform_int(rng, 4, max_w));
      const int r0 = static_cast<int>(uniform_int(rng, 1, std::max(1, s.rows - 1 - h)));
      const int c0 = static_cast<int>(uniform_int(rng, 1, std::max(1, s.cols - 1 - w)));
      rooms.push_back({r0, c0, r0 + h - 1, c0 + w - 1});
      carve(s, r0, c0, r0 + h - 1, c0 + w - 1);
      if (rooms.size() < 2) continue;
      const Cell a = rooms[rooms.size() - 2].middle();
      const Cell b = rooms.back().middle();
      if (uniform(rng, 0.0, 1.0) < 0.5) {
        carve(s, a.r, a.c, a.r + 1, b.c);
        carve(s, a.r, b.c, b.r, b.c + 1);
      } else {
        carve(s, a.r, a.c, b.r, a.c + 1);
        carve(s, b.r, a.c, b.r + 1, b.c);
      }
    }
    // a few free-standing pillars inside large rooms
    for (const Room& room : rooms) {
      if (room.r1 - room.r0 < 6 || room.c1 - room.c0 < 6) continue;
      const int pr = static_cast<int>(uniform_int(rng, room.r0 + 2, room.r1 - 3));
      const int pc = static_cast<int>(uniform_int(rng, room.c0 + 2, room.c1 - 3));
      for (int r = pr; r <= pr + 1; ++r)
        for (int c = pc; c <= pc + 1; ++c) s.blocked[static_cast<std::size_t>(r) * s.cols + c] = 1;
    }
    if (keep_largest_component(s) < 4) continue;
    place_landmarks(s, config, rng);
    return s;
  }
  throw GenerationError("no navigable component of at least 4 cells after 100 attempts (seed " +
                        std::to_string(seed) + ")");
}

std::vector<std::pair<Cell, double>> neighbours(const Scene& scene, Cell c) {
  std::vector<std::pair<Cell, double>> out;
  out.reserve(8);
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const Cell n{c.r + dr, c.c + dc};
      if (!scene.navigable(n)) continue;
      if (dr != 0 && dc != 0) {
        if (!scene.navigable({c.r + dr, c.c}) || !scene.navigable({c.r, c.c + dc})) continue;
        out.emplace_back(n, kSqrt2);
      } else {
        out.emplace_back(n, 1.0);
      }
    }
  return out;
}

DistanceField dijkstra(const Scene& scene, Cell start) {
  const std::size_t n = scene.blocked.size();
  DistanceField field{std::vector<double>(n, std::numeric_limits<double>::infinity()), std::vector<int>(n, -1)};
  if (!scene.navigable(start)) throw ContractError("dijkstra start cell is not navigable");
  auto index = [&](Cell c) { return static_cast<std::size_t>(c.r) * scene.cols + c.c; };

  using Entry = std::pair<double, Cell>;  // (cost, cell) orders ties lexicographically
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::vector<std::uint8_t> done(n, 0);
  field.cost[index(start)] = 0.0;
  open.push({0.0, start});
  while (!open.empty()) {
    const auto [cost, cell] = open.top();
    open.pop();
    const std::size_t i = index(cell);
    if (done[i]) continue;
    done[i] = 1;
    for (const auto& [nb, step] : neighbours(scene, cell)) {
      const std::size_t j = index(nb);
      const double next = cost + step;
      if (next < field.cost[j]) {
        field.cost[j] = next;
        field.parent[j] = static_cast<int>(i);
        open.push({next, nb});
      }
    }
  }
  return field;
}

std::vector<Cell> shortest_path(const Scene& scene, Cell start, Cell goal) {
  if (!scene.navigable(start) || !scene.navigable(goal)) throw ContractError("path endpoints must be navigable");
  const DistanceField field = dijkstra(scene, start);
  std::size_t g = static_cast<std::size_t>(goal.r) * scene.cols + goal.c;
  if (!std::isfinite(field.cost[g])) {
    throw NoPathError("no path from (" + std::to_string(start.r) + "," + std::to_string(start.c) + ") to (" +
                      std::to_string(goal.r) + "," + std::to_string(goal.c) + ")");
  }
  std::vector<Cell> path;
  for (int k = static_cast<int>(g); k >= 0; k = field.parent[static_cast<std::size_t>(k)])
    path.push_back({k / scene.cols, k % scene.cols});
  std::reverse(path.begin(), path.end());
  return path;
}

double path_cost(const std::vector<Cell>& path) {
  double cost = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const bool diagonal = path[i].r != path[i - 1].r && path[i].c != path[i - 1].c;
    cost += diagonal ? kSqrt2 : 1.0;
  }
  return cost;
}

}  // namespace sprkit::sim
