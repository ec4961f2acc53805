#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <set>

#include "sprkit/core/error.hpp"
#include "sprkit/core/io.hpp"
#include "sprkit/core/seed.hpp"
#include "sprkit/sim/dataset.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace sprkit::sim;
using sprkit::geo::Pose;
using sprkit::geo::UnitQuaternion;
using std::numbers::pi;

namespace {

Scene open_grid(int rows, int cols) {
  Scene s;
  s.rows = rows;
  s.cols = cols;
  s.cell_m = 0.5;
  s.blocked.assign(static_cast<std::size_t>(rows) * cols, 0);
  return s;
}

Scene with_landmarks(Scene s, std::vector<Vec3> points, int channels = 4) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    Landmark lm{points[i], std::vector<double>(static_cast<std::size_t>(channels), 0.0)};
    lm.descriptor[i % static_cast<std::size_t>(channels)] = 1.0;
    s.landmarks.push_back(lm);
  }
  return s;
}

Pose pose_at(const Vec3& t, double yaw) {
  Pose p;
  p.t = t;
  p.q = UnitQuaternion::from_yaw(yaw);
  return p;
}

}  // namespace

TEST(Scene, DeterministicForSeed) {
  const SceneConfig cfg;
  const Scene a = generate_scene(42, cfg);
  const Scene b = generate_scene(42, cfg);
  EXPECT_EQ(a.blocked, b.blocked);
  ASSERT_EQ(a.landmarks.size(), b.landmarks.size());
  for (std::size_t i = 0; i < a.landmarks.size(); ++i) {
    EXPECT_EQ(a.landmarks[i].position, b.landmarks[i].position);
    EXPECT_EQ(a.landmarks[i].descriptor, b.landmarks[i].descriptor);
  }
  EXPECT_NE(generate_scene(43, cfg).blocked, a.blocked);
}

TEST(Scene, UnitDescriptorsOnObstacleFaces) {
  const Scene s = generate_scene(5, SceneConfig{});
  EXPECT_EQ(s.landmarks.size(), 160u);
  for (const auto& lm : s.landmarks) {
    double n = 0;
    for (double v : lm.descriptor) n += v * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
    EXPECT_GE(lm.position.z(), 0.0);
    EXPECT_LE(lm.position.z(), 2.5);
    // a face point touches at least one blocked and one free cell
    const double fx = lm.position.x() / s.cell_m, fy = lm.position.y() / s.cell_m;
    bool blocked = false, free = false;
    for (double dx : {-0.25, 0.25})
      for (double dy : {-0.25, 0.25}) {
        const Cell c{static_cast<int>(std::floor(fy + dy)), static_cast<int>(std::floor(fx + dx))};
        if (!s.inside(c)) continue;
        (s.navigable(c) ? free : blocked) = true;
      }
    EXPECT_TRUE(blocked && free);
  }
}

TEST(Scene, NavigableFractionOverSeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = generate_scene(seed, SceneConfig{});
    EXPECT_GE(s.navigable_fraction(), 0.3) << "seed " << seed;
    // a single component: every free cell reachable from the first
    const auto cells = s.navigable_cells();
    const auto field = dijkstra(s, cells.front());
    for (const Cell& c : cells) EXPECT_TRUE(std::isfinite(field.cost[static_cast<std::size_t>(c.r) * s.cols + c.c]));
  }
}

TEST(Scene, RejectsTinyConfigs) {
  SceneConfig cfg;
  cfg.rows = 6;
  EXPECT_THROW(generate_scene(1, cfg), sprkit::ContractError);
  cfg = SceneConfig{};
  cfg.landmark_count = 0;
  EXPECT_THROW(generate_scene(1, cfg), sprkit::ContractError);
}

TEST(ShortestPath, StartEqualsGoal) {
  const Scene s = open_grid(4, 4);
  auto p = shortest_path(s, {1, 2}, {1, 2});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], (Cell{1, 2}));
}

TEST(ShortestPath, OpenGridDiagonal) {
  const Scene s = open_grid(3, 3);
  auto p = shortest_path(s, {0, 0}, {2, 2});
  EXPECT_NEAR(path_cost(p), 2 * std::numbers::sqrt2, 1e-15);
}

TEST(ShortestPath, DisconnectedIsNoPath) {
  Scene s = open_grid(3, 5);
  for (int r = 0; r < 3; ++r) s.blocked[static_cast<std::size_t>(r) * 5 + 2] = 1;
  EXPECT_THROW(shortest_path(s, {0, 0}, {0, 4}), sprkit::NoPathError);
  EXPECT_THROW(shortest_path(s, {0, 0}, {0, 2}), sprkit::ContractError);
}

TEST(ShortestPath, MatchesExhaustiveSearchOnRandomGrids) {
  sprkit::Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = static_cast<int>(sprkit::uniform_int(rng, 3, 12));
    const int cols = static_cast<int>(sprkit::uniform_int(rng, 3, 12));
    Scene s = open_grid(rows, cols);
    for (auto& b : s.blocked) b = sprkit::uniform(rng, 0, 1) < 0.3 ? 1 : 0;
    const auto cells = s.navigable_cells();
    if (cells.size() < 2) continue;
    const Cell start = cells[static_cast<std::size_t>(sprkit::uniform_int(rng, 0, cells.size() - 1))];
    const auto oracle = sprkit::testing::exhaustive_costs(s, start);
    for (const Cell& goal : cells) {
      const double want = oracle[static_cast<std::size_t>(goal.r) * cols + goal.c];
      if (!std::isfinite(want)) {
        EXPECT_THROW(shortest_path(s, start, goal), sprkit::NoPathError);
        continue;
      }
      const auto path = shortest_path(s, start, goal);
      EXPECT_NEAR(path_cost(path), want, 1e-9);
      EXPECT_EQ(path.front(), start);
      EXPECT_EQ(path.back(), goal);
      for (std::size_t i = 1; i < path.size(); ++i) {
        bool adjacent = false;
        for (const auto& [nb, cost] : neighbours(s, path[i - 1])) adjacent |= nb == path[i];
        EXPECT_TRUE(adjacent);
      }
    }
  }
}

TEST(ShortestPath, Deterministic) {
  const Scene s = generate_scene(9, SceneConfig{});
  const auto cells = s.navigable_cells();
  EXPECT_EQ(shortest_path(s, cells.front(), cells.back()), shortest_path(s, cells.front(), cells.back()));
}

TEST(Trajectory, PoseCountHeightAndOffsets) {
  const Scene s = generate_scene(11, SceneConfig{});
  for (int k = 0; k < 20; ++k) {
    TrajectorySpec spec;
    spec.length_m = 3.0 + k * 0.5;
    spec.num_points = 5 + k % 16;
    spec.height_m = kSensorHeights[static_cast<std::size_t>(k % 3)];
    spec.seed = 1000 + static_cast<std::uint64_t>(k);
    const Trajectory t = sample_trajectory(s, spec);
    ASSERT_EQ(t.poses.size(), static_cast<std::size_t>(spec.num_points));
    EXPECT_NEAR(path_cost(t.path) * s.cell_m, spec.length_m, s.cell_m + 1e-9);
    for (std::size_t i = 0; i < t.poses.size(); ++i) {
      EXPECT_EQ(t.poses[i].t.z(), spec.height_m);
      double off = t.poses[i].q.yaw() - t.base_yaw[i];
      off = std::remainder(off, 2 * pi);
      EXPECT_LE(std::abs(off), pi / 3 + 1e-12);
      EXPECT_NEAR(std::abs(t.poses[i].q.u() * t.poses[i].q.u() + t.poses[i].q.v().squaredNorm()), 1.0, 1e-12);
    }
  }
}

TEST(Trajectory, RejectsBadSpecs) {
  const Scene s = generate_scene(11, SceneConfig{});
  TrajectorySpec spec;
  spec.length_m = 2.0;
  EXPECT_THROW(sample_trajectory(s, spec), sprkit::ContractError);
  spec.length_m = 5.0;
  spec.height_m = 1.0;
  EXPECT_THROW(sample_trajectory(s, spec), sprkit::ContractError);
  spec.height_m = 0.5;
  spec.num_points = 4;
  EXPECT_THROW(sample_trajectory(s, spec), sprkit::ContractError);
}

TEST(Trajectory, EqualArclengthSpacing) {
  // an L-shaped polyline: stations sit at equal arc length along it
  std::vector<Vec3> poly{{0, 0, 0}, {4, 0, 0}, {4, 3, 0}};
  auto st = resample_equal_arclength(poly, 8);
  ASSERT_EQ(st.size(), 8u);
  EXPECT_EQ(st.front(), poly.front());
  EXPECT_EQ(st.back(), poly.back());
  for (std::size_t i = 1; i < st.size(); ++i) {
    const double chord = (st[i] - st[i - 1]).norm();
    EXPECT_LE(chord, 1.0 + 1e-12);
    EXPECT_GE(chord, 0.9 * 1.0 * std::cos(pi / 4));  // a 90 degree corner shortens one chord
  }
  const Scene s = generate_scene(12, SceneConfig{});
  TrajectorySpec spec;
  spec.length_m = 8;
  spec.num_points = 9;
  spec.seed = 3;
  const Trajectory t = sample_trajectory(s, spec);
  std::vector<double> chords;
  for (std::size_t i = 1; i < t.stations.size(); ++i) chords.push_back((t.stations[i] - t.stations[i - 1]).norm());
  const double longest = *std::max_element(chords.begin(), chords.end());
  for (double c : chords) EXPECT_GE(c, 0.9 * longest * std::cos(pi / 8) - 1e-9);
}

TEST(Trajectory, HeadingsFollowStraightCorridor) {
  Scene s = open_grid(3, 30);
  std::vector<Cell> path;
  for (int c = 2; c <= 25; ++c) path.push_back({1, c});
  TrajectorySpec spec;
  spec.num_points = 6;
  spec.height_m = 0.5;
  const Trajectory t = trajectory_along(s, path, spec);
  for (std::size_t i = 0; i < t.stations.size(); ++i) {
    EXPECT_NEAR(t.base_yaw[i], 0.0, 1e-15);
    if (i > 0) EXPECT_NEAR((t.stations[i] - t.stations[i - 1]).norm(), 23 * 0.5 / 5, 1e-12);
  }
  std::vector<Cell> diag;
  for (int k = 0; k < 3; ++k) diag.push_back({2 - k, k});
  Scene open = open_grid(3, 3);
  const Trajectory d = trajectory_along(open, diag, spec);
  for (double yaw : d.base_yaw) EXPECT_NEAR(yaw, -pi / 4, 1e-12);  // rows decrease, so y decreases
}

TEST(Render, EmptySceneIsZero) {
  const Scene s = open_grid(4, 4);
  const Image img = render_pinhole(s, pose_at({1, 1, 1}, 0), 60, 9);
  for (double v : img.data) EXPECT_EQ(v, 0.0);
  const Observation obs = render_observation(s, pose_at({1, 1, 1}, 0), 8, 4);
  EXPECT_EQ(obs.pano.cols, 16);
  EXPECT_EQ(obs.pano.energy(), 0.0);
}

TEST(Render, OnAxisLandmarkPeaksAtCentre) {
  const Scene s = with_landmarks(open_grid(4, 4), {{5, 1, 1}});
  const Image img = render_pinhole(s, pose_at({1, 1, 1}, 0), 60, 9);
  int best_r = -1, best_c = -1;
  double best = -1;
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c)
      if (img.pixel(r, c)[0] > best) {
        best = img.pixel(r, c)[0];
        best_r = r;
        best_c = c;
      }
  EXPECT_EQ(best_r, 4);
  EXPECT_EQ(best_c, 4);
  EXPECT_NEAR(best, 1.0, 1e-12);
}

TEST(Render, PinholeShiftConsistency) {
  // Yawing left by the angular pitch of the central pixel moves the blob
  // one pixel to the right.
  const Scene s = with_landmarks(open_grid(4, 4), {{6, 1.2, 1}}, 1);
  const int res = 31;
  const double fov = 60;
  const double focal = 0.5 * res / std::tan(fov * pi / 360);
  const double pitch = std::atan(1.0 / focal);
  auto centroid = [&](const Image& img) {
    double w = 0, m = 0;
    for (int r = 0; r < res; ++r)
      for (int c = 0; c < res; ++c) {
        w += img.pixel(r, c)[0];
        m += c * img.pixel(r, c)[0];
      }
    return m / w;
  };
  const double base_yaw = std::atan2(0.2, 5.0);
  const double a = centroid(render_pinhole(s, pose_at({1, 1, 1}, base_yaw), fov, res));
  const double b = centroid(render_pinhole(s, pose_at({1, 1, 1}, base_yaw + pitch), fov, res));
  EXPECT_NEAR(b - a, 1.0, 0.05);
}

TEST(Equirect, CentreLooksForward) {
  const Vec3 d = pano_direction(8, 16, 16, 32);
  EXPECT_NEAR(d.x(), 1.0, 1e-15);
  EXPECT_NEAR(d.y(), 0.0, 1e-15);
  EXPECT_NEAR(d.z(), 0.0, 1e-15);
  EXPECT_GT(pano_direction(8, 8, 16, 32).y(), 0.99);  // quarter width to the left
  CaptureRig rig;
  const Vec3 axis = rig.view_axis(CaptureRig::kPanoramaView);
  EXPECT_NEAR(axis.x(), 1.0, 1e-15);
  EXPECT_NEAR(rig.view_axis(1).z(), std::sin(pi / 3), 1e-12);  // heading -180, elevation +60
  EXPECT_NEAR(rig.view_axis(1).x(), -0.5, 1e-12);
}

TEST(Stitch, ConstantInputsGiveConstantPanorama) {
  CaptureRig rig;
  rig.resolution = 7;
  std::vector<Image> views(18, Image(7, 7, 2));
  for (auto& v : views) std::fill(v.data.begin(), v.data.end(), 0.75);
  const Observation obs = stitch_panorama(rig, views, Pose::identity(), 8);
  for (double v : obs.pano.data) EXPECT_NEAR(v, 0.75, 1e-15);
  views.pop_back();
  EXPECT_THROW(stitch_panorama(rig, views, Pose::identity(), 8), sprkit::ContractError);
  views.push_back(Image(5, 5, 2));
  EXPECT_THROW(stitch_panorama(rig, views, Pose::identity(), 8), sprkit::ContractError);
}

TEST(Stitch, AgreesWithDirectRender) {
  CaptureRig rig;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene s = generate_scene(100 + seed, SceneConfig{});
    sprkit::Rng rng(seed);
    const auto cells = s.navigable_cells();
    const Cell c = cells[static_cast<std::size_t>(sprkit::uniform_int(rng, 0, cells.size() - 1))];
    const Pose p = pose_at(s.center(c, kSensorHeights[seed % 3]), sprkit::uniform(rng, -pi, pi));
    const Observation direct = render_observation(s, p, 16, 16);
    const Observation stitched = stitch_panorama(rig, capture_rig(s, rig, p, pano_sigma(16)), p, 16);
    EXPECT_LT(relative_energy_error(stitched.pano, direct.pano), 0.05) << "seed " << seed;
    EXPECT_EQ(stitched.pose.t, p.t);
  }
}

TEST(Observation, YawEquivarianceShiftsColumns) {
  const Scene s = generate_scene(21, SceneConfig{});
  const Vec3 eye = s.center(s.navigable_cells()[10], 0.5);
  const int h = 16, w = 32;
  const Observation a = render_observation(s, pose_at(eye, 0.3), h, 16);
  for (int shift : {1, 3, 8}) {
    const Observation b = render_observation(s, pose_at(eye, 0.3 + 2 * pi * shift / w), h, 16);
    // longitude falls with column, so yawing left moves content to higher columns
    double err = 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (int k = 0; k < 16; ++k) err = std::max(err, std::abs(b.pano.pixel(r, c)[k] - a.pano.pixel(r, (c - shift + w) % w)[k]));
    EXPECT_LT(err, 1e-9) << "shift " << shift;
  }
}

TEST(Observation, HeightSensitivity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene s = generate_scene(seed, SceneConfig{});
    const Cell c = s.navigable_cells()[7];
    const Observation lo = render_observation(s, pose_at(s.center(c, 0.1), 0), 16, 16);
    const Observation hi = render_observation(s, pose_at(s.center(c, 1.7), 0), 16, 16);
    EXPECT_GT(relative_energy_error(lo.pano, hi.pano), 1e-3);
  }
}

TEST(CropFov, IdentityHalfAndMonotone) {
  const Scene s = generate_scene(3, SceneConfig{});
  const Observation obs = render_observation(s, pose_at(s.center(s.navigable_cells()[3], 1.7), 1.0), 16, 16);
  const Observation full = crop_fov(obs, 360);
  EXPECT_EQ(full.pano.data, obs.pano.data);

  Observation ones = obs;
  std::fill(ones.pano.data.begin(), ones.pano.data.end(), 1.0);
  const Observation half = crop_fov(ones, 180);
  int kept = 0;
  for (int c = 0; c < 32; ++c) kept += half.pano.pixel(0, c)[0] != 0.0;
  EXPECT_EQ(kept, 16);
  EXPECT_NE(half.pano.pixel(0, 16)[0], 0.0);  // the forward column survives

  double prev = 0;
  for (double fov = 10; fov <= 360; fov += 10) {
    const double e = crop_fov(obs, fov).pano.energy();
    EXPECT_GE(e, prev);
    prev = e;
  }
  EXPECT_THROW(crop_fov(obs, 0), sprkit::ContractError);
  EXPECT_THROW(crop_fov(obs, 361), sprkit::ContractError);
}

TEST(Dataset, HeightMixIsOneOneTwo) {
  DatasetConfig cfg;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 400; ++i) {
    const auto spec = draw_spec(cfg, sprkit::derive_seed(99, static_cast<std::uint64_t>(i)), 0);
    for (int k = 0; k < 3; ++k) counts[k] += spec.height_m == kSensorHeights[static_cast<std::size_t>(k)];
  }
  // multinomial: 4 standard deviations around 100 / 100 / 200
  EXPECT_NEAR(counts[0], 100, 4 * std::sqrt(400 * 0.25 * 0.75));
  EXPECT_NEAR(counts[1], 100, 4 * std::sqrt(400 * 0.25 * 0.75));
  EXPECT_NEAR(counts[2], 200, 4 * std::sqrt(400 * 0.5 * 0.5));
}

TEST(Dataset, BuildIsDeterministicAndSplitsAreClean) {
  sprkit::testing::TempDir tmp;
  DatasetConfig cfg;
  cfg.scenes = 4;
  cfg.unseen_scenes = 1;
  cfg.traj_per_scene = 5;
  cfg.pano_height = 8;
  const auto m1 = build_dataset(cfg, tmp.path() / "a");
  build_dataset(cfg, tmp.path() / "b");
  EXPECT_EQ(sprkit::read_bytes(tmp.path() / "a/manifest.json"), sprkit::read_bytes(tmp.path() / "b/manifest.json"));
  for (const auto& t : m1.trajectories) {
    EXPECT_EQ(sprkit::read_bytes(tmp.path() / "a" / t.path / "obs.bin"),
              sprkit::read_bytes(tmp.path() / "b" / t.path / "obs.bin"));
  }

  std::set<std::string> train_scenes, unseen_scenes, train_traj, seen_traj;
  for (const auto* t : m1.split(kSplitTrain)) {
    train_scenes.insert(t->scene_id);
    train_traj.insert(t->path);
  }
  for (const auto* t : m1.split(kSplitUnseen)) unseen_scenes.insert(t->scene_id);
  for (const auto* t : m1.split(kSplitSeenTest)) {
    seen_traj.insert(t->path);
    EXPECT_TRUE(train_scenes.count(t->scene_id));
  }
  EXPECT_EQ(unseen_scenes.size(), 1u);
  for (const auto& s : unseen_scenes) EXPECT_FALSE(train_scenes.count(s));
  for (const auto& p : seen_traj) EXPECT_FALSE(train_traj.count(p));
  EXPECT_EQ(seen_traj.size(), 3u);  // round(0.2 * 5) per seen scene

  const auto loaded = load_manifest(tmp.path() / "a");
  EXPECT_EQ(manifest_to_json(loaded), manifest_to_json(m1));
  const auto data = load_trajectory(tmp.path() / "a", m1.trajectories.front());
  EXPECT_EQ(data.poses.size(), static_cast<std::size_t>(m1.trajectories.front().num_points));
  EXPECT_EQ(data.panos.front().cols, 16);

  // the stored panorama is the float32 rounding of a fresh render
  const Scene scene = generate_scene(m1.scenes.front().seed, cfg.scene);
  Image again = render_observation(scene, data.poses.front(), 8, 16).pano;
  quantize(again);
  EXPECT_EQ(again.data, data.panos.front().data);
}

TEST(Dataset, TruncatedObservationsAreCorrupt) {
  sprkit::testing::TempDir tmp;
  std::vector<Image> panos(2, Image(2, 4, 3));
  panos[1].data[5] = 1.5;
  write_observations(tmp.path() / "obs.bin", panos);
  auto bytes = sprkit::read_bytes(tmp.path() / "obs.bin");
  EXPECT_EQ(bytes.size(), 8u + 16u + 2 * 24 * 4);
  EXPECT_EQ(decode_observations(bytes)[1].data[5], 1.5);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(decode_observations(bytes), sprkit::CorruptDataError);
  bytes[2] = 'X';
  try {
    decode_observations(bytes);
    FAIL();
  } catch (const sprkit::CorruptDataError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(Dataset, PosesCsvRoundtrip) {
  sprkit::testing::TempDir tmp;
  std::vector<Pose> poses{pose_at({1, 2, 0.5}, 0.3), pose_at({-1, 0.25, 1.7}, -2.0)};
  write_poses_csv(tmp.path() / "poses.csv", poses, "master_seed=1");
  const auto back = read_poses_csv(tmp.path() / "poses.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].t, poses[1].t);
  EXPECT_EQ(back[1].q.u(), poses[1].q.u());
}

TEST(Dataset, InvalidConfig) {
  DatasetConfig cfg;
  cfg.scenes = 0;
  EXPECT_THROW(cfg.validate(), sprkit::ContractError);
  cfg = DatasetConfig{};
  cfg.unseen_scenes = cfg.scenes;
  EXPECT_THROW(cfg.validate(), sprkit::ContractError);
}
