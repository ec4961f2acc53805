#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "sprkit/autodiff/checkpoint.hpp"
#include "sprkit/bench/paradigms.hpp"
#include "sprkit/core/error.hpp"
#include "sprkit/core/io.hpp"
#include "sprkit/sim/dataset.hpp"

namespace sprkit::cli {

namespace fs = std::filesystem;

namespace {

void inspect_manifest(const fs::path& root) {
  const sim::DatasetManifest m = sim::load_manifest(root);
  const auto& c = m.config;
  fmt::print("dataset manifest {}\n", (root / "manifest.json").string());
  fmt::print("  master_seed={} config_hash={:016x}\n", c.master_seed, m.config_hash);
  fmt::print("  panorama {}x{}x{}\n", m.pano_height, m.pano_width, m.channels);
  fmt::print("  grid {}x{} cells of {} m, {} landmarks\n", c.scene.rows, c.scene.cols, c.scene.cell_m,
             c.scene.landmark_count);
  std::map<std::string, int> scenes, trajs;
  std::map<double, int> heights;
  long frames = 0;
  for (const auto& s : m.scenes) ++scenes[s.split];
  for (const auto& t : m.trajectories) {
    ++trajs[t.split];
    ++heights[t.height_m];
    frames += t.num_points;
  }
  fmt::print("  scenes: {} ({} train, {} unseen)\n", m.scenes.size(), scenes["train"], scenes["unseen"]);
  fmt::print("  trajectories: {} ({} train, {} seen-test, {} unseen), {} frames\n", m.trajectories.size(),
             trajs["train"], trajs["seen-test"], trajs["unseen"], frames);
  for (const auto& [h, n] : heights) fmt::print("  height {:.1f} m: {}\n", h, n);
}

void inspect_poses(const fs::path& file) {
  const auto poses = sim::read_poses_csv(file);
  // norms from the text itself, before any renormalization on parse
  std::istringstream in(read_text(file));
  std::string line, footer;
  std::getline(in, line);
  double worst = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      footer = line;
      continue;
    }
    std::vector<double> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(std::stod(field));
    worst = std::max(worst, std::abs(std::sqrt(f[4] * f[4] + f[5] * f[5] + f[6] * f[6] + f[7] * f[7]) - 1.0));
  }
  double path = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) path += (poses[i].t - poses[i - 1].t).norm();
  fmt::print("poses {}\n", file.string());
  fmt::print("  {} poses, path length {:.3f} m, height {:.3f} m\n", poses.size(), path,
             poses.empty() ? 0.0 : poses.front().t.z());
  fmt::print("  max |‖q‖ - 1| = {:.3e} ({})\n", worst, worst <= 1e-6 ? "all unit within 1e-6" : "NOT UNIT");
  if (!footer.empty()) fmt::print("  {}\n", footer);
}

void inspect_observations(const fs::path& file) {
  const auto panos = sim::read_observations(file);
  fmt::print("observations {}\n", file.string());
  if (panos.empty()) {
    fmt::print("  0 frames\n");
    return;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  std::size_t count = 0, bad = 0;
  for (const auto& p : panos)
    for (double v : p.data) {
      if (!std::isfinite(v)) {
        ++bad;
        continue;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      ++count;
    }
  fmt::print("  {} frames of {}x{}x{}\n", panos.size(), panos[0].rows, panos[0].cols, panos[0].channels);
  fmt::print("  values in [{:.4f}, {:.4f}], mean {:.4f}, non-finite {}\n", lo, hi, count ? sum / count : 0.0, bad);
}

void inspect_checkpoint(const fs::path& file) {
  const auto records = ad::load_checkpoint(file);
  fmt::print("checkpoint {}\n", file.string());
  std::size_t params = 0, values = 0;
  for (const auto& r : records) {
    if (r.name.rfind("meta:", 0) == 0) fmt::print("  {}\n", r.name.substr(5));
  }
  for (const auto& r : records) {
    if (r.name.rfind("meta:", 0) == 0) continue;
    double sq = 0.0;
    bool finite = true;
    for (double v : r.tensor.data()) {
      sq += v * v;
      finite = finite && std::isfinite(v);
    }
    fmt::print("  {:<28} {:<10} norm {:.6f}{}\n", r.name, ad::shape_str(r.tensor.shape()), std::sqrt(sq),
               finite ? "" : " NON-FINITE");
    ++params;
    values += r.tensor.numel();
  }
  fmt::print("  {} tensors, {} values\n", params, values);
  bench::TrainedModel::load(file);
  fmt::print("  metadata and tensors match the model layout\n");
}

void inspect_csv(const fs::path& file) {
  std::istringstream in(read_text(file));
  std::string header, line;
  std::getline(in, header);
  std::size_t rows = 0;
  std::vector<std::string> comments;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') comments.push_back(line);
    else ++rows;
  }
  fmt::print("csv {}\n  columns: {}\n  {} rows\n", file.string(), header, rows);
  for (const auto& c : comments) fmt::print("  {}\n", c);
}

bool starts_with_magic(const fs::path& file, const char (&magic)[8]) {
  std::ifstream in(file, std::ios::binary);
  char head[8] = {};
  in.read(head, 8);
  return in.gcount() == 8 && std::memcmp(head, magic, 8) == 0;
}

}  // namespace

void inspect(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file or directory: " + path.string());
  if (fs::is_directory(path)) {
    if (!fs::exists(path / "manifest.json")) throw IoError(path.string() + " holds no manifest.json");
    inspect_manifest(path);
    return;
  }
  if (path.filename() == "manifest.json") return inspect_manifest(path.parent_path().empty() ? "." : path.parent_path());
  if (starts_with_magic(path, ad::kCheckpointMagic)) return inspect_checkpoint(path);
  if (starts_with_magic(path, sim::kObsMagic)) return inspect_observations(path);
  if (path.extension() == ".csv") {
    const std::string text = read_text(path);
    if (text.rfind("idx,tx,ty,tz,qu,qx,qy,qz", 0) == 0) return inspect_poses(path);
    return inspect_csv(path);
  }
  // binary artifacts are recognized by magic only
  throw CorruptDataError(path.string() + ": unrecognized magic bytes (expected SPRKIT01 or SPROBS01)", 0);
}

}  // namespace sprkit::cli
