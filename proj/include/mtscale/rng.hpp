#ifndef MTSCALE_RNG_HPP
#define MTSCALE_RNG_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace mtscale {

// std::shuffle and the std distributions are implementation-defined, so
// seeded output would differ between standard libraries. mt19937_64's raw
// stream is fully specified; everything here is built on top of it.

/// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % bound);
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

/// Uniform real in [0, 1) with 53 bits of randomness.
inline double uniform_unit(std::mt19937_64& gen) {
  return double(gen() >> 11) * 0x1.0p-53;
}

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& gen) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// splitmix64 finalizer, used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mtscale

#endif  // MTSCALE_RNG_HPP
