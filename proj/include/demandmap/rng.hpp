#ifndef DEMANDMAP_RNG_HPP_
#define DEMANDMAP_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "demandmap/common.hpp"

namespace demandmap {

// Deterministic splitmix64 stream. Every seeded operation in the project
// draws from this generator so results are reproducible across platforms
// (std::shuffle and the std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) via rejection.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  double normal() {
    // Box-Muller; one fresh pair per draw keeps the stream stateless.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Derive an independent stream for a named sub-task of a run seed.
inline uint64_t mix_seed(uint64_t seed, std::string_view tag) {
  return fnv1a64(tag, seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
}

inline uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b = 0) {
  uint64_t h = mix_seed(seed, tag);
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&a), sizeof(a)), h);
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&b), sizeof(b)), h);
  return h;
}

}  // namespace demandmap

#endif  // DEMANDMAP_RNG_HPP_
