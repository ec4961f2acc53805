#include "sprkit/sim/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "sprkit/core/error.hpp"
#include "sprkit/core/io.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::sim {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "observation codec assumes a little-endian host");

void DatasetConfig::validate() const {
  if (scenes < 1) throw ContractError("dataset needs at least one scene");
  if (unseen_scenes < 0 || unseen_scenes >= scenes) throw ContractError("unseen scenes must be in [0, scenes)");
  if (traj_per_scene < 1) throw ContractError("dataset needs at least one trajectory per scene");
  if (!(seen_test_fraction >= 0.0 && seen_test_fraction < 1.0)) throw ContractError("seen-test fraction must be in [0, 1)");
  if (pano_height < 2) throw ContractError("panorama height must be at least 2");
  if (!(min_length_m >= 3.0 && max_length_m <= 20.0 && min_length_m <= max_length_m)) {
    throw ContractError("trajectory lengths must lie in [3, 20] m");
  }
  if (min_points < 5 || max_points > 20 || min_points > max_points) throw ContractError("points must lie in 5..20");
  if (std::any_of(height_weights.begin(), height_weights.end(), [](double w) { return w < 0; }) ||
      height_weights[0] + height_weights[1] + height_weights[2] <= 0) {
    throw ContractError("height weights must be non-negative with a positive sum");
  }
}

std::string DatasetConfig::canonical() const {
  return fmt::format(
      "master_seed={};scenes={};unseen_scenes={};traj_per_scene={};seen_test_fraction={};rows={};cols={};cell_m={};"
      "landmarks={};descriptor_dim={};max_rooms={};min_free={};pano_height={};length={}..{};points={}..{};heights={}:{}:{}",
      master_seed, scenes, unseen_scenes, traj_per_scene, seen_test_fraction, scene.rows, scene.cols, scene.cell_m,
      scene.landmark_count, scene.descriptor_dim, scene.max_rooms, scene.min_free_fraction, pano_height, min_length_m, max_length_m, min_points,
      max_points, height_weights[0], height_weights[1], height_weights[2]);
}

std::uint64_t DatasetConfig::hash() const { return fnv1a(canonical()); }

std::vector<const TrajectoryEntry*> DatasetManifest::split(const std::string& name) const {
  std::vector<const TrajectoryEntry*> out;
  for (const auto& t : trajectories)
    if (t.split == name) out.push_back(&t);
  return out;
}

std::uint64_t scene_seed(std::uint64_t master, int s) { return derive_seed(master, 0x5CE0E000ull + static_cast<std::uint64_t>(s)); }
std::uint64_t trajectory_seed(std::uint64_t scene, int t) { return derive_seed(scene, 0x7A40ull + static_cast<std::uint64_t>(t)); }

TrajectorySpec draw_spec(const DatasetConfig& config, std::uint64_t seed, int attempt) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
  TrajectorySpec spec;
  spec.length_m = uniform(rng, config.min_length_m, config.max_length_m);
  spec.num_points = static_cast<int>(uniform_int(rng, config.min_points, config.max_points));
  std::discrete_distribution<int> pick(config.height_weights.begin(), config.height_weights.end());
  spec.height_m = kSensorHeights[static_cast<std::size_t>(pick(rng))];
  spec.seed = derive_seed(seed, 0x100 + static_cast<std::uint64_t>(attempt));
  return spec;
}

void quantize(Image& img) {
  for (double& v : img.data) v = static_cast<double>(static_cast<float>(v));
}

void write_observations(const fs::path& file, const std::vector<Image>& panos) {
  std::vector<std::uint8_t> out(kObsMagic, kObsMagic + 8);
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  const Image& first = panos.empty() ? Image() : panos.front();
  put_u32(static_cast<std::uint32_t>(panos.size()));
  put_u32(static_cast<std::uint32_t>(first.rows));
  put_u32(static_cast<std::uint32_t>(first.cols));
  put_u32(static_cast<std::uint32_t>(first.channels));
  for (const Image& img : panos) {
    if (img.rows != first.rows || img.cols != first.cols || img.channels != first.channels) {
      throw ContractError("observations in one file must share dimensions");
    }
    for (double v : img.data) put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  write_bytes(file, out);
}

std::vector<Image> decode_observations(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kObsMagic, 8) != 0) {
    std::size_t at = 0;
    while (at < std::min<std::size_t>(8, bytes.size()) && bytes[at] == static_cast<std::uint8_t>(kObsMagic[at])) ++at;
    throw CorruptDataError("bad observation magic (expected SPROBS01)", at);
  }
  std::size_t pos = 8;
  auto u32 = [&](const char* what) {
    if (bytes.size() - pos < 4) throw CorruptDataError(std::string("truncated observation header: ") + what, pos);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  const std::uint32_t n = u32("num_points");
  const std::uint32_t h = u32("height");
  const std::uint32_t w = u32("width");
  const std::uint32_t f = u32("channels");
  const std::uint64_t per = static_cast<std::uint64_t>(h) * w * f;
  const std::uint64_t need = static_cast<std::uint64_t>(n) * per * 4;
  if (bytes.size() - pos < need) {
    throw CorruptDataError(fmt::format("truncated observation data: need {} bytes, have {}", need, bytes.size() - pos),
                           bytes.size());
  }
  if (bytes.size() - pos > need) throw CorruptDataError("trailing bytes after observation data", pos + need);
  std::vector<Image> out;
  out.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(f));
    for (double& v : img.data) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
      pos += 4;
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<Image> read_observations(const fs::path& file) {
  try {
    return decode_observations(read_bytes(file));
  } catch (const CorruptDataError& e) {
    throw CorruptDataError(file.string() + ": " + e.detail(), e.offset());
  }
}

void write_poses_csv(const fs::path& file, const std::vector<geo::Pose>& poses, const std::string& footer) {
  std::string text = "idx,tx,ty,tz,qu,qx,qy,qz\n";
  for (std::size_t i = 0; i < poses.size(); ++i) text += fmt::format("{},{}\n", i, geo::pose_to_csv(poses[i]));
  if (!footer.empty()) text += "# " + footer + "\n";
  write_text(file, text);
}

std::vector<geo::Pose> read_poses_csv(const fs::path& file) {
  std::istringstream in(read_text(file));
  std::string line;
  if (!std::getline(in, line) || line != "idx,tx,ty,tz,qu,qx,qy,qz") {
    throw CorruptDataError(file.string() + ": missing poses.csv header", 0);
  }
  std::vector<geo::Pose> poses;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      offset += line.size() + 1;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != std::to_string(poses.size())) {
      throw CorruptDataError(file.string() + ": bad pose index", offset);
    }
    try {
      poses.push_back(geo::pose_from_csv(line.substr(comma + 1)));
    } catch (const ContractError& e) {
      throw CorruptDataError(file.string() + ": " + e.what(), offset);
    }
    offset += line.size() + 1;
  }
  return poses;
}

std::string manifest_to_json(const DatasetManifest& m) {
  const DatasetConfig& c = m.config;
  json j;
  j["format"] = "sprkit-dataset";
  j["version"] = 1;
  j["master_seed"] = c.master_seed;
  j["config_hash"] = fmt::format("{:016x}", m.config_hash);
  j["config"] = {{"scenes", c.scenes},
                 {"unseen_scenes", c.unseen_scenes},
                 {"traj_per_scene", c.traj_per_scene},
                 {"seen_test_fraction", c.seen_test_fraction},
                 {"grid_rows", c.scene.rows},
                 {"grid_cols", c.scene.cols},
                 {"cell_m", c.scene.cell_m},
                 {"landmarks", c.scene.landmark_count},
                 {"descriptor_dim", c.scene.descriptor_dim},
                 {"max_rooms", c.scene.max_rooms},
                 {"min_free_fraction", c.scene.min_free_fraction},
                 {"min_length_m", c.min_length_m},
                 {"max_length_m", c.max_length_m},
                 {"min_points", c.min_points},
                 {"max_points", c.max_points},
                 {"height_weights", c.height_weights}};
  j["dims"] = {{"pano_height", m.pano_height}, {"pano_width", m.pano_width}, {"channels", m.channels}};
  json scenes = json::array();
  for (const auto& s : m.scenes) scenes.push_back({{"id", s.id}, {"seed", s.seed}, {"split", s.split}});
  j["scenes"] = scenes;
  json trajs = json::array();
  for (const auto& t : m.trajectories) {
    trajs.push_back({{"scene", t.scene_id},
                     {"id", t.id},
                     {"split", t.split},
                     {"seed", t.seed},
                     {"length_m", t.length_m},
                     {"num_points", t.num_points},
                     {"height_m", t.height_m},
                     {"path", t.path}});
  }
  j["trajectories"] = trajs;
  return j.dump(2) + "\n";
}

DatasetManifest load_manifest(const fs::path& root) {
  const fs::path file = root / "manifest.json";
  const std::string text = read_text(file);
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "sprkit-dataset") throw CorruptDataError(file.string() + ": not a sprkit dataset manifest", 0);
    DatasetConfig& c = m.config;
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    const json& jc = j.at("config");
    c.scenes = jc.at("scenes");
    c.unseen_scenes = jc.at("unseen_scenes");
    c.traj_per_scene = jc.at("traj_per_scene");
    c.seen_test_fraction = jc.at("seen_test_fraction");
    c.scene.rows = jc.at("grid_rows");
    c.scene.cols = jc.at("grid_cols");
    c.scene.cell_m = jc.at("cell_m");
    c.scene.landmark_count = jc.at("landmarks");
    c.scene.descriptor_dim = jc.at("descriptor_dim");
    c.scene.max_rooms = jc.at("max_rooms");
    c.scene.min_free_fraction = jc.at("min_free_fraction");
    c.min_length_m = jc.at("min_length_m");
    c.max_length_m = jc.at("max_length_m");
    c.min_points = jc.at("min_points");
    c.max_points = jc.at("max_points");
    c.height_weights = jc.at("height_weights").get<std::array<double, 3>>();
    m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    m.pano_height = j.at("dims").at("pano_height");
    m.pano_width = j.at("dims").at("pano_width");
    m.channels = j.at("dims").at("channels");
    c.pano_height = m.pano_height;
    for (const auto& s : j.at("scenes")) m.scenes.push_back({s.at("id"), s.at("seed"), s.at("split")});
    for (const auto& t : j.at("trajectories")) {
      m.trajectories.push_back({t.at("scene"), t.at("id"), t.at("split"), t.at("seed"), t.at("length_m"),
                                t.at("num_points"), t.at("height_m"), t.at("path")});
    }
  } catch (const json::exception& e) {
    throw CorruptDataError(file.string() + ": " + e.what(), 0);
  }
  return m;
}

TrajectoryData load_trajectory(const fs::path& root, const TrajectoryEntry& entry) {
  TrajectoryData data;
  data.poses = read_poses_csv(root / entry.path / "poses.csv");
  data.panos = read_observations(root / entry.path / "obs.bin");
  if (data.poses.size() != data.panos.size()) {
    throw CorruptDataError((root / entry.path).string() + ": pose and observation counts differ", 0);
  }
  return data;
}

DatasetManifest build_dataset(const DatasetConfig& config, const fs::path& root) {
  config.validate();
  ensure_directory(root);
  DatasetManifest m;
  m.config = config;
  m.config_hash = config.hash();
  m.pano_height = config.pano_height;
  m.pano_width = 2 * config.pano_height;
  m.channels = config.scene.descriptor_dim;

  std::vector<int> order(static_cast<std::size_t>(config.scenes));
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.master_seed, 0x5B117));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<bool> unseen(order.size(), false);
  for (int k = 0; k < config.unseen_scenes; ++k) unseen[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

  const std::string footer =
      fmt::format("master_seed={},config_hash={:016x}", config.master_seed, m.config_hash);
  for (int s = 0; s < config.scenes; ++s) {
    SceneEntry se{fmt::format("scene_{:03d}", s), scene_seed(config.master_seed, s),
                  unseen[static_cast<std::size_t>(s)] ? kSplitUnseen : kSplitTrain};
    const Scene scene = generate_scene(se.seed, config.scene);

    // which trajectories of a seen scene are held out
    std::vector<int> idx(static_cast<std::size_t>(config.traj_per_scene));
    std::iota(idx.begin(), idx.end(), 0);
    Rng hold_rng(derive_seed(se.seed, 0x7E57));
    std::shuffle(idx.begin(), idx.end(), hold_rng);
    const int n_test = static_cast<int>(std::lround(config.seen_test_fraction * config.traj_per_scene));
    std::vector<bool> held(idx.size(), false);
    for (int k = 0; k < n_test; ++k) held[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = true;

    for (int t = 0; t < config.traj_per_scene; ++t) {
      TrajectoryEntry te;
      te.scene_id = se.id;
      te.id = fmt::format("traj_{:03d}", t);
      te.split = se.split == kSplitUnseen ? kSplitUnseen : (held[static_cast<std::size_t>(t)] ? kSplitSeenTest : kSplitTrain);
      te.seed = trajectory_seed(se.seed, t);
      te.path = se.id + "/" + te.id;

      Trajectory traj;
      bool ok = false;
      for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
        const TrajectorySpec spec = draw_spec(config, te.seed, attempt);
        try {
          traj = sample_trajectory(scene, spec);
          ok = true;
        } catch (const GenerationError&) {
        }
      }
      if (!ok) throw GenerationError("could not place trajectory " + te.path);
      traj.scene_id = se.id;
      te.length_m = traj.spec.length_m;
      te.num_points = traj.spec.num_points;
      te.height_m = traj.spec.height_m;

      std::vector<Image> panos;
      panos.reserve(traj.poses.size());
      for (const auto& pose : traj.poses)
        panos.push_back(render_observation(scene, pose, config.pano_height, m.channels).pano);
      const fs::path dir = root / te.path;
      ensure_directory(dir);
      write_poses_csv(dir / "poses.csv", traj.poses, footer);
      write_observations(dir / "obs.bin", panos);
      m.trajectories.push_back(std::move(te));
    }
    m.scenes.push_back(std::move(se));
  }
  write_text(root / "manifest.json", manifest_to_json(m));
  return m;
}

}  // namespace sprkit::sim
