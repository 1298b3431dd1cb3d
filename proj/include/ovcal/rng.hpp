#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ovcal {

// Deterministic counter-free PRNG (splitmix64). Hand-rolled so the byte
// streams do not depend on the standard library implementation; every
// experiment artifact must be reproducible from its seed alone.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Marsaglia polar method; one spare kept across calls.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  std::vector<double> normal_vec(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal();
    return v;
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Hash-combines a seed with stream tags / indices. Used to derive named
// substreams so that e.g. dataset layout and label diversification draw
// from independent, individually reproducible streams.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Named root substreams.
namespace streams {
constexpr uint64_t kText = 0x10;
constexpr uint64_t kSynonym = 0x11;
constexpr uint64_t kRegion = 0x12;
constexpr uint64_t kToken = 0x13;
constexpr uint64_t kDataset = 0x20;
constexpr uint64_t kDiversify = 0x21;
constexpr uint64_t kInit = 0x22;
}  // namespace streams

}  // namespace ovcal
