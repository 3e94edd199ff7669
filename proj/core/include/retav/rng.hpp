#pragma once

#include <cmath>
#include <cstdint>

namespace retav {

/// Deterministic splitmix64-based generator. Every random draw in the library
/// goes through one of these; there is no global random state. Child streams
/// are derived from the original seed, so ensemble members trained in any
/// order (or in parallel) see identical randomness.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1), 53 bits of mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0,n). Rejection sampling, so unbiased for any n.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= bound);
    return v % n;
  }

  /// Box-Muller, one variate per call (the sibling is discarded so that the
  /// draw count per call is fixed).
  double gaussian(double mean = 0.0, double sigma = 1.0) {
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Independent substream keyed on the original seed and `stream`.
  Rng child(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ (0xD1B54A32D192ED03ULL + stream * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace retav
