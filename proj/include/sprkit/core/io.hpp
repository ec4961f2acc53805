#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sprkit {

/// Whole-file helpers; failures raise IoError naming the path.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
/// Creates the directory (and parents); IoError on failure.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace sprkit
