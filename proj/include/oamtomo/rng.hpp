#pragma once

#include <cstdint>
#include <random>

namespace oamtomo::detail {

// splitmix64 step, used to derive independent sub-seeds from a master
// seed so that per-item random draws do not depend on evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-seed for item `index` of stream `stream` under `master`. Stable
// across platforms and thread schedules.
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream,
                              std::uint64_t index) {
  return splitmix64(splitmix64(master ^ (0x517cc1b727220a95ULL * (stream + 1))) + index);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace oamtomo::detail
