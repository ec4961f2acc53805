#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sprkit/autodiff/params.hpp"

namespace sprkit::ad {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'R', 'K', 'I', 'T', '0', '1'};

/// Parameter file layout, all integers little-endian:
///
///   "SPRKIT01"
///   repeated until EOF:
///     u32 name_length, name bytes,
///     u32 rank, rank x u32 extents,
///     product(extents) x f64 values
///
/// Records whose name starts with "meta:" carry run metadata in the name and
/// a single zero value.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Builds a "meta:key=value" record.
NamedTensor meta_record(const std::string& key, const std::string& value);

}  // namespace sprkit::ad
