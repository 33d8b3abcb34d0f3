#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace semex {

// Deterministic random source. std::mt19937_64 has a fixed standard-mandated
// output sequence, but the distribution adaptors in <random> do not, so the
// uniform/normal transforms are implemented here to keep runs reproducible
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1). 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling over the largest multiple of n below 2^64.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Standard normal via Box-Muller. One value per call; the pair partner is
  // discarded so the stream position does not depend on call parity.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derived stream for a named sub-component. Mixing keeps sibling streams
  // decorrelated without sharing state.
  Rng split(std::uint64_t stream_id) {
    std::uint64_t s = bits();
    s ^= 0x9e3779b97f4a7c15ull * (stream_id + 1);
    return Rng(s);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace semex
