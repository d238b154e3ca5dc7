#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dpn {

// Deterministic draws built directly on the mt19937 word stream, so results
// do not depend on the standard library's distribution implementations.
inline double uniform01(std::mt19937& rng) {
  return rng() * (1.0 / 4294967296.0);
}

inline double uniform(std::mt19937& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::uint32_t uniform_below(std::mt19937& rng, std::uint32_t n) {
  return n ? rng() % n : 0;
}

template <class T>
void shuffle_inplace(std::vector<T>& v, std::mt19937& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = uniform_below(rng, static_cast<std::uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Decorrelated stream seeds derived from one master seed.
inline std::uint32_t derive_seed(std::uint64_t master, std::uint32_t stream) {
  std::uint64_t x = master + 0x9E3779B97F4A7C15ull * (stream + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return static_cast<std::uint32_t>(x);
}

}  // namespace dpn
