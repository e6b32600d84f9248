#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace miarn {

/**
 * Seedable 64-bit generator (mt19937_64) with named sub-streams.
 *
 * Rng::stream(seed, "init") and Rng::stream(seed, "shuffle") are independent
 * for the same seed, so consumers do not perturb each other. Uniform
 * variates are derived from raw bits here rather than through
 * std::uniform_*_distribution, whose output is implementation-defined.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace miarn
