#pragma once

#include <cstdint>
#include <random>

namespace insider {

/// Seeded generator with platform-independent variate conversions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard library distributions are not, so uniform and
/// normal variates are derived here from the raw 64-bit stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for sub-entity `index` (SplitMix64 of seed and index).
  static Rng derive(std::uint64_t seed, std::uint64_t index);

  std::uint64_t bits() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Exponential with the given mean.
  double exponential(double mean);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace insider
