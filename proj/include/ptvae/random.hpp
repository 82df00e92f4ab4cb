#pragma once

#include <cstdint>
#include <random>

namespace ptvae {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to fan a master seed out to independent streams.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(mix_seed(master) ^ (stream * 0xd1b54a32d192ed03ULL));
}

}  // namespace ptvae
