#pragma once

#include <cstdint>
#include <random>

namespace bgpo {

using Rng = std::mt19937_64;

/// Named counter offsets for deriving independent streams from a master seed.
/// Per-worker rollout streams use kWorkerBase + worker index.
enum class Stream : std::uint64_t {
  kTraining = 0,
  kEvaluation = 1,
  kInitialization = 2,
  kWorkerBase = 16,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `offset` for master seed `master`: splitmix64(master + offset).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t offset) {
  return splitmix64(master + offset);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t extra = 0) {
  return Rng(derive_seed(master, static_cast<std::uint64_t>(stream) + extra));
}

}  // namespace bgpo
