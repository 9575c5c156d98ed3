#pragma once

// Attention connection schemes: which residual blocks are wired to their
// stage's shared attention module.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ean/rng.hpp"

namespace ean {

/// Probabilities entering log-probability terms are clamped to
/// [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-6;

double clamp_probability(double p);

/// Binary connection vector with recorded stage boundaries.
/// Index 0 is the shallowest block; bit i == 1 means block i is connected.
class ConnectionScheme {
 public:
  ConnectionScheme() = default;
  /// Single stage spanning all bits.
  explicit ConnectionScheme(std::vector<std::uint8_t> bits);
  ConnectionScheme(std::vector<std::uint8_t> bits, std::vector<std::size_t> stage_sizes);

  static ConnectionScheme zeros(std::size_t m);
  static ConnectionScheme ones(std::size_t m);
  static ConnectionScheme zeros(std::vector<std::size_t> stage_sizes);
  /// Bits of `code` with bit 0 of the scheme taken from the most significant of m bits.
  static ConnectionScheme from_code(std::uint64_t code, std::size_t m);

  std::size_t size() const { return bits_.size(); }
  std::span<const std::uint8_t> bits() const { return bits_; }
  const std::vector<std::size_t>& stage_sizes() const { return stage_sizes_; }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  bool connected(std::size_t i) const { return bits_[i] != 0; }

  void set(std::size_t i, bool on);
  /// Same bits, different stage partition (sizes must sum to size()).
  ConnectionScheme with_stages(std::vector<std::size_t> stage_sizes) const;

  std::size_t popcount() const;
  /// Inverse of from_code; requires size() <= 64.
  std::uint64_t code() const;
  std::vector<double> as_input() const;

  bool operator==(const ConnectionScheme&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
  std::vector<std::size_t> stage_sizes_;
};

/// Per-block connection probabilities p_i.
struct SchemeProbability {
  std::vector<double> probs;
  std::size_t size() const { return probs.size(); }
};

/// Stage strings of '0'/'1' joined by '/', e.g. "110/01".
std::string encode(const ConnectionScheme& scheme);
/// Throws ParseError with the offending index on bad characters or empty stages.
ConnectionScheme decode(std::string_view text);

ConnectionScheme sample_bernoulli(std::size_t m, double p, Rng& rng);
ConnectionScheme sample_from_probs(const SchemeProbability& probs, Rng& rng);

/// p_hat_i = (1 - a_i)(1 - p_i) + a_i p_i
std::vector<double> realized_probs(const SchemeProbability& probs, const ConnectionScheme& scheme);
/// sum_i log p_hat_i with p clamped away from {0, 1}.
double log_prob(const SchemeProbability& probs, const ConnectionScheme& scheme);
/// 1 - ||a||_0 / m
double sparsity_reward(const ConnectionScheme& scheme);

}  // namespace ean
