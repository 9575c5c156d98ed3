#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace ean {

/// Seeded generator with platform-independent distribution mappings.
///
/// The standard library leaves the output of its distributions
/// implementation-defined, so uniform/normal/index draws are derived here
/// directly from the raw 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent stream for (seed, stream) via splitmix64 mixing.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two draws, caches nothing.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// True with probability p. p <= 0 is always false, p >= 1 always true.
  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n), unbiased. n must be positive.
  std::size_t index(std::size_t n);

  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ean
