#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "mrst/errors.hpp"

namespace mrst {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t mix_pair(uint64_t a, uint64_t b) {
  uint64_t x = splitmix64(a ^ 0x6A09E667F3BCC909ull);
  x = splitmix64(x + b);
  return splitmix64(x ^ a);
}

}  // namespace detail

// Counter-based pseudorandom stream ("splitmix64-counter"): draw i is a pure
// function of (seed, i), so identical seeds and call sequences give bitwise
// identical outputs. split() derives an independent stream; derived streams
// never collide with the parent for distinct keys.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return detail::mix_pair(seed_, counter_++); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  int64_t uniform_int(int64_t n) {
    if (n <= 0) throw ArgumentError("uniform_int: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<int64_t>(v % un);
  }

  // Standard normal via Box-Muller (cosine branch only, two draws per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Poisson draw; Knuth's product method for small rates, rounded normal
  // approximation beyond (adequate for shot-noise simulation).
  int64_t poisson(double rate) {
    if (rate < 0.0) throw ArgumentError("poisson: rate must be non-negative");
    if (rate == 0.0) return 0;
    if (rate < 30.0) {
      const double threshold = std::exp(-rate);
      int64_t k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform();
      } while (p > threshold);
      return k - 1;
    }
    const double v = std::round(normal(rate, std::sqrt(rate)));
    return v < 0.0 ? 0 : static_cast<int64_t>(v);
  }

  template <typename It>
  void shuffle(It first, It last) {
    const int64_t n = static_cast<int64_t>(last - first);
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j = uniform_int(i + 1);
      std::swap(first[i], first[j]);
    }
  }

  // Independent child stream; distinct keys give distinct streams.
  RngStream split(uint64_t key) const {
    return RngStream(detail::mix_pair(seed_ ^ 0xD1B54A32D192ED03ull, key));
  }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace mrst
