#pragma once

#include <filesystem>

namespace sprkit::cli {

/// Prints a human-readable dump of a dataset root, manifest.json,
/// poses.csv, obs.bin, a checkpoint or a report CSV.
void inspect(const std::filesystem::path& path);

}  // namespace sprkit::cli
