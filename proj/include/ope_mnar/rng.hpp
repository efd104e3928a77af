#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ope_mnar {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from an ordered list of components, so
/// adding seeds or streams never perturbs existing ones.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// Stream tags.
inline constexpr std::uint64_t kStreamContexts = 1;
inline constexpr std::uint64_t kStreamActions = 2;
inline constexpr std::uint64_t kStreamObservations = 3;
inline constexpr std::uint64_t kStreamRewards = 4;
inline constexpr std::uint64_t kStreamTruth = 5;
inline constexpr std::uint64_t kStreamTrain = 6;
inline constexpr std::uint64_t kStreamEnv = 7;

}  // namespace ope_mnar
