#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace uck {

// Deterministic 64-bit generator (splitmix64). Distribution sampling is done
// with explicit bit arithmetic so streams are identical across platforms and
// standard-library versions; std::* distributions do not guarantee that.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be positive; modulo bias is negligible
  // for the n used here (n << 2^64) and keeps the stream portable.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller; consumes two uniforms per pair, caches the second draw.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_cached_) {
      has_cached_ = false;
      return mean + stddev * cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  // Derive an independent stream; used for per-sample / per-instance seeds.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    Rng g(seed ^ (0xd1342543de82ef95ULL * (index + 1)));
    return g.next_u64();
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace uck
