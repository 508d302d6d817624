#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace earlystop {

/// Engine used for every simulated stream. Distributions come from the
/// standard library, so streams are reproducible for a given toolchain.
using Rng = std::mt19937_64;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent child seed for (master, key_1, key_2, ...). Order of keys
/// matters; the result does not depend on which thread asks for it.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

/// Stream tags so that data, bootstrap and fold draws never share a stream.
namespace stream {
inline constexpr std::uint64_t kData = 0x11;
inline constexpr std::uint64_t kBootstrap = 0x22;
inline constexpr std::uint64_t kFolds = 0x33;
}  // namespace stream

}  // namespace earlystop
