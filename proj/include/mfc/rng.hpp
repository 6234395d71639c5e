#pragma once

#include <cmath>
#include <cstdint>

namespace mfc {

// Counter-based Gaussian substreams. Every draw is a pure function of
// (seed, stream tags), so parallel scheduling cannot change results.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) {
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

// Uniform in (0, 1); never returns 0 so log() below is safe.
inline double uniform01(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal draw indexed by (seed, stream, index).
/// stream encodes what the draw is for (particle, dimension tag),
/// index the position within the stream (time step).
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = uniform01(mix(seed, stream, index, 0x1ULL));
  const double u2 = uniform01(mix(seed, stream, index, 0x2ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace rng
}  // namespace mfc
