#include "ean/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ean/errors.hpp"

namespace ean {

namespace {

void check_lengths(const SchemeProbability& probs, const ConnectionScheme& scheme, const char* who) {
  if (probs.size() != scheme.size())
    throw ShapeError(std::string(who) + ": " + std::to_string(probs.size()) + " probabilities for a " +
                     std::to_string(scheme.size()) + "-bit scheme");
}

}  // namespace

double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

ConnectionScheme::ConnectionScheme(std::vector<std::uint8_t> bits)
    : ConnectionScheme(bits, std::vector<std::size_t>{bits.size()}) {}

ConnectionScheme::ConnectionScheme(std::vector<std::uint8_t> bits, std::vector<std::size_t> stage_sizes)
    : bits_(std::move(bits)), stage_sizes_(std::move(stage_sizes)) {
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] > 1) throw Error("ConnectionScheme: bit " + std::to_string(i) + " is not 0 or 1");
  if (bits_.empty()) {
    stage_sizes_.clear();
    return;
  }
  if (std::any_of(stage_sizes_.begin(), stage_sizes_.end(), [](std::size_t s) { return s == 0; }))
    throw ShapeError("ConnectionScheme: empty stage");
  const std::size_t total = std::accumulate(stage_sizes_.begin(), stage_sizes_.end(), std::size_t{0});
  if (total != bits_.size())
    throw ShapeError("ConnectionScheme: stage sizes sum to " + std::to_string(total) + ", scheme has " +
                     std::to_string(bits_.size()) + " bits");
}

ConnectionScheme ConnectionScheme::zeros(std::size_t m) { return ConnectionScheme(std::vector<std::uint8_t>(m, 0)); }
ConnectionScheme ConnectionScheme::ones(std::size_t m) { return ConnectionScheme(std::vector<std::uint8_t>(m, 1)); }

ConnectionScheme ConnectionScheme::zeros(std::vector<std::size_t> stage_sizes) {
  const std::size_t m = std::accumulate(stage_sizes.begin(), stage_sizes.end(), std::size_t{0});
  return ConnectionScheme(std::vector<std::uint8_t>(m, 0), std::move(stage_sizes));
}

ConnectionScheme ConnectionScheme::from_code(std::uint64_t code, std::size_t m) {
  if (m > 64) throw ShapeError("ConnectionScheme::from_code: more than 64 bits");
  std::vector<std::uint8_t> bits(m);
  for (std::size_t i = 0; i < m; ++i) bits[i] = static_cast<std::uint8_t>((code >> (m - 1 - i)) & 1U);
  return ConnectionScheme(std::move(bits));
}

void ConnectionScheme::set(std::size_t i, bool on) { bits_.at(i) = on ? 1 : 0; }

ConnectionScheme ConnectionScheme::with_stages(std::vector<std::size_t> stage_sizes) const {
  return ConnectionScheme(bits_, std::move(stage_sizes));
}

std::size_t ConnectionScheme::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::uint64_t ConnectionScheme::code() const {
  if (bits_.size() > 64) throw ShapeError("ConnectionScheme::code: more than 64 bits");
  std::uint64_t c = 0;
  for (auto b : bits_) c = (c << 1) | b;
  return c;
}

std::vector<double> ConnectionScheme::as_input() const { return {bits_.begin(), bits_.end()}; }

std::string encode(const ConnectionScheme& scheme) {
  std::string out;
  out.reserve(scheme.size() + scheme.stage_sizes().size());
  std::size_t i = 0;
  for (std::size_t s = 0; s < scheme.stage_sizes().size(); ++s) {
    if (s > 0) out.push_back('/');
    for (std::size_t k = 0; k < scheme.stage_sizes()[s]; ++k, ++i) out.push_back(scheme[i] ? '1' : '0');
  }
  return out;
}

ConnectionScheme decode(std::string_view text) {
  std::vector<std::uint8_t> bits;
  std::vector<std::size_t> stages;
  std::size_t current = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '0' || c == '1') {
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
      ++current;
    } else if (c == '/') {
      if (current == 0) throw ParseError("scheme: empty stage", i);
      stages.push_back(current);
      current = 0;
    } else {
      throw ParseError(std::string("scheme: illegal character '") + c + "'", i);
    }
  }
  if (current == 0) throw ParseError("scheme: empty stage", text.size());
  stages.push_back(current);
  return ConnectionScheme(std::move(bits), std::move(stages));
}

ConnectionScheme sample_bernoulli(std::size_t m, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("sample_bernoulli: p outside [0, 1]");
  std::vector<std::uint8_t> bits(m);
  for (auto& b : bits) b = rng.bernoulli(p) ? 1 : 0;
  return ConnectionScheme(std::move(bits));
}

ConnectionScheme sample_from_probs(const SchemeProbability& probs, Rng& rng) {
  std::vector<std::uint8_t> bits(probs.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = rng.bernoulli(probs.probs[i]) ? 1 : 0;
  return ConnectionScheme(std::move(bits));
}

std::vector<double> realized_probs(const SchemeProbability& probs, const ConnectionScheme& scheme) {
  check_lengths(probs, scheme, "realized_probs");
  std::vector<double> out(scheme.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p = probs.probs[i];
    out[i] = scheme[i] ? p : 1.0 - p;
  }
  return out;
}

double log_prob(const SchemeProbability& probs, const ConnectionScheme& scheme) {
  check_lengths(probs, scheme, "log_prob");
  double total = 0.0;
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    const double p = clamp_probability(probs.probs[i]);
    total += std::log(scheme[i] ? p : 1.0 - p);
  }
  return total;
}

double sparsity_reward(const ConnectionScheme& scheme) {
  if (scheme.size() == 0) throw ShapeError("sparsity_reward: empty scheme");
  return 1.0 - static_cast<double>(scheme.popcount()) / static_cast<double>(scheme.size());
}

}  // namespace ean
