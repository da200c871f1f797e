#pragma once

#include <cstdint>

namespace vrc::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (base seed, purpose tag, counter).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index);
}

enum Stream : std::uint64_t {
  kEmbedderInit = 1,
  kRelationInit = 2,
  kPretrainBatch = 3,
  kEpisodeOrder = 4,
  kEpisodeSampling = 5,
};

}  // namespace vrc::detail
