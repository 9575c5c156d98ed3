#pragma once

// Reward environments. An Evaluator supplies g_val for a scheme; the planted
// environment is a seeded synthetic landscape with a known optimum.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ean/rng.hpp"
#include "ean/scheme.hpp"

namespace ean {

struct RewardWeights {
  double lambda1 = 0.5;  // sparsity
  double lambda2 = 1.0;  // validation
  double lambda3 = 0.1;  // curiosity

  /// Throws ConfigError unless all weights are finite, non-negative and at
  /// least one is positive.
  void validate() const;
};

struct RewardBreakdown {
  double g_spa = 0.0;
  double g_val = 0.0;
  double g_rnd = 0.0;
  double total = 0.0;
};

/// G = lambda1 g_spa + lambda2 g_val + lambda3 g_rnd.
RewardBreakdown combine_reward(const RewardWeights& w, double g_spa, double g_val, double g_rnd);

/// Reward with the history-dependent curiosity term left out; used for every
/// ranking and comparison.
double true_reward(const RewardWeights& w, const ConnectionScheme& scheme, double g_val);

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  /// g_val in [0, 1] as seen by the search loop (may be noisy).
  virtual double evaluate(const ConnectionScheme& scheme) = 0;
  /// Deterministic g_val for scoring. Defaults to evaluate().
  virtual double true_value(const ConnectionScheme& scheme) { return evaluate(scheme); }
  /// True when evaluate() and true_value() can differ.
  virtual bool noisy() const { return false; }
  virtual std::string describe() const = 0;
};

struct PairInteraction {
  std::size_t i = 0;
  std::size_t j = 0;  // i < j
  double value = 0.0;
};

struct PlantedOptions {
  std::size_t m = 18;
  std::size_t interactions = 4;
  double noise = 0.01;
  double base = 0.35;
  /// Per-bit utilities are drawn from (utility_scale / m) * U(utility_low, utility_high).
  double utility_scale = 1.5;
  double utility_low = -1.0;
  double utility_high = 1.0;
  /// Pairwise terms are drawn from (interaction_scale / m) * U(-1, 1).
  double interaction_scale = 1.0;
};

/// g_val(a) = clamp(base + sum_i u_i a_i + sum_{i<j} J_ij a_i a_j + noise, 0, 1).
struct PlantedEnv {
  std::size_t m = 0;
  std::vector<double> utilities;
  std::vector<PairInteraction> interactions;  // sorted by (i, j)
  double noise = 0.0;
  double base = 0.0;
  std::uint64_t seed = 0;
};

/// Landscape drawn from `seed` using only raw-bit uniform draws, so the same
/// seed yields the same landscape on every platform.
PlantedEnv make_planted(std::uint64_t seed, const PlantedOptions& options = {});

/// Noiseless value (pure).
double planted_eval(const PlantedEnv& env, const ConnectionScheme& scheme);
/// With Gaussian noise of the environment's standard deviation when `noisy`.
double planted_eval(const PlantedEnv& env, const ConnectionScheme& scheme, bool noisy, Rng& rng);

class PlantedEvaluator final : public Evaluator {
 public:
  PlantedEvaluator(PlantedEnv env, std::uint64_t noise_seed, bool noisy = true);

  double evaluate(const ConnectionScheme& scheme) override;
  double true_value(const ConnectionScheme& scheme) override { return planted_eval(env_, scheme); }
  bool noisy() const override { return noisy_ && env_.noise > 0.0; }
  std::string describe() const override;

  const PlantedEnv& env() const { return env_; }
  Rng& noise_rng() { return rng_; }

 private:
  PlantedEnv env_;
  Rng rng_;
  bool noisy_;
};

}  // namespace ean
