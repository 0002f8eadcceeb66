#pragma once

/**
 * @file random.hpp
 * @brief Seed splitting.
 *
 * Every phase of an experiment draws from its own std::mt19937_64 seeded with
 * derive_seed(master, stream). derive_seed is one round of splitmix64 over
 * master ^ golden-ratio-scaled stream, so sub-seeds for distinct streams are
 * decorrelated and reproducible without sharing a generator.
 */

#include <cstdint>
#include <random>

namespace ztube {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream * 0x9e3779b97f4a7c15ull + 1));
}

/// Stream identifiers of the pipeline phases.
enum class Stream : std::uint64_t { data = 1, gain = 2, synthesis = 3, closed_loop = 4, replicate = 5 };

inline std::mt19937_64 make_rng(std::uint64_t master, Stream s, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(derive_seed(master, static_cast<std::uint64_t>(s)), index));
}

}  // namespace ztube
