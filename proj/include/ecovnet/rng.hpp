#pragma once

#include <cmath>
#include <cstdint>

#include "ecovnet/errors.hpp"

namespace ecov {

// Deterministic splitmix64 stream. All randomness in the library goes through
// this so runs are bit-reproducible across platforms; std:: distributions are
// implementation-defined and deliberately avoided.
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (lo > hi) throw ArgumentError("Rng::uniform: lo > hi");
    return lo + (hi - lo) * uniform01();
  }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::below: n must be positive");
    return next_u64() % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // standard normal via Box-Muller; one value per call keeps the stream
  // position independent of how results are consumed
  double normal() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  uint64_t state() const { return state_; }

private:
  uint64_t state_;
};

// Hash-combine for deriving independent substreams from a base seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

} // namespace ecov
