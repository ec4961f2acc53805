#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sprkit {

/// splitmix64 finalizer. Every derived seed in the toolkit is
/// `derive_seed(parent, stream)`, so a master seed fixes the whole tree:
///
///   scene s        : derive_seed(master, 0x5CE0E000 + s)
///   trajectory t   : derive_seed(scene_seed, 0x7A40 + t)
///   model init     : derive_seed(master, 0x1000 + paradigm)
///   batch sampling : derive_seed(master, 0x2000 + paradigm)
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return splitmix64(parent ^ splitmix64(stream));
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

/// Uniform integer in [lo, hi] inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// 64-bit FNV-1a, used for config hashes embedded in output files.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace sprkit
