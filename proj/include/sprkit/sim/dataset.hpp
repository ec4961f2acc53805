#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sprkit/sim/render.hpp"
#include "sprkit/sim/trajectory.hpp"

namespace sprkit::sim {

inline constexpr char kObsMagic[8] = {'S', 'P', 'R', 'O', 'B', 'S', '0', '1'};

inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitSeenTest = "seen-test";
inline constexpr const char* kSplitUnseen = "unseen";

struct DatasetConfig {
  std::uint64_t master_seed = 7;
  int scenes = 15;
  int unseen_scenes = 3;
  int traj_per_scene = 10;
  double seen_test_fraction = 0.2;
  SceneConfig scene;
  int pano_height = 16;
  double min_length_m = 3.0;
  double max_length_m = 20.0;
  int min_points = 5;
  int max_points = 20;
  std::array<double, 3> height_weights = {1, 1, 2};  // for 0.1 / 0.5 / 1.7 m

  /// ContractError on out-of-range values.
  void validate() const;
  /// Stable textual form, the input of the config hash.
  std::string canonical() const;
  std::uint64_t hash() const;
};

struct SceneEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::string split;  // train or unseen
};

struct TrajectoryEntry {
  std::string scene_id;
  std::string id;
  std::string split;  // train, seen-test or unseen
  std::uint64_t seed = 0;
  double length_m = 0;
  int num_points = 0;
  double height_m = 0;
  std::string path;  // relative to the dataset root
};

struct DatasetManifest {
  DatasetConfig config;
  std::uint64_t config_hash = 0;
  int pano_height = 0;
  int pano_width = 0;
  int channels = 0;
  std::vector<SceneEntry> scenes;
  std::vector<TrajectoryEntry> trajectories;

  std::vector<const TrajectoryEntry*> split(const std::string& name) const;
};

struct TrajectoryData {
  std::vector<geo::Pose> poses;
  std::vector<Image> panos;
};

/// Scene seed for scene index s under a master seed.
std::uint64_t scene_seed(std::uint64_t master, int s);
std::uint64_t trajectory_seed(std::uint64_t scene, int t);

/// Draws the TrajectorySpec for trajectory t of a scene: uniform length and point
/// count in the configured ranges, height by the 1:1:2 weights.
TrajectorySpec draw_spec(const DatasetConfig& config, std::uint64_t seed, int attempt);

/// Generates scenes, trajectories and rendered observations under `root`
/// and writes manifest.json last. IoError names the offending path.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& root);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& root);

TrajectoryData load_trajectory(const std::filesystem::path& root, const TrajectoryEntry& entry);

void write_poses_csv(const std::filesystem::path& file, const std::vector<geo::Pose>& poses, const std::string& footer);
std::vector<geo::Pose> read_poses_csv(const std::filesystem::path& file);

/// obs.bin: magic, u32 num_points, H, W, F, then little-endian float32 in
/// index-major order. Values are rounded to float32 on write.
void write_observations(const std::filesystem::path& file, const std::vector<Image>& panos);
std::vector<Image> read_observations(const std::filesystem::path& file);
std::vector<Image> decode_observations(const std::vector<std::uint8_t>& bytes);

/// Rounds every value to float32, the precision stored on disk.
void quantize(Image& img);

}  // namespace sprkit::sim
