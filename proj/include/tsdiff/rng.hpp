#pragma once

#include <cstdint>
#include <random>

namespace tsdiff {

using Engine = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream key for (master seed, cell, replication). Streams for
// distinct keys are statistically independent and need no coordination.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) {
  std::uint64_t x = mix64(master);
  x = mix64(x ^ (cell * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
  x = mix64(x ^ (rep * 0xaef17502108ef2d9ULL + 0x2545f4914f6cdd1dULL));
  return x;
}

// Child stream of a replication seed (per-arm reward streams, Brownian paths).
constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + 0x5851f42d4c957f2dULL));
}

}  // namespace tsdiff
