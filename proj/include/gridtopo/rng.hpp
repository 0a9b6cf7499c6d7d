#pragma once

#include <cstdint>
#include <random>

namespace gridtopo {

// splitmix64 finalizer; used to spread user seeds into independent streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic child seed for (stream, index) under a master seed. Streams
// keep sampling, feeder generation, node placement etc. independent so adding
// draws to one never shifts another.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(master ^ 0x8f1bbcdcbfa53e0bULL * stream) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed));
}

}  // namespace gridtopo
