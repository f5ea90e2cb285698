#pragma once

#include <cstdint>
#include <random>

namespace tsastat {

/// splitmix64 step; used to derive independent per-unit seeds so that
/// parallel and serial executions of the same job draw identical noise.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed for work unit `index` of a job seeded with `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ (0x632be59bd9b4e019ull * (index + 1)));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace tsastat
