#pragma once

// The connection-scheme search loop and the baselines it is compared against.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ean/controller.hpp"
#include "ean/curiosity.hpp"
#include "ean/environment.hpp"
#include "ean/rng.hpp"
#include "ean/scheme.hpp"

namespace ean {

struct SearchConfig {
  std::size_t search_steps = 2000;  // T
  std::size_t ppo_start = 200;      // h: PPO replay runs for t >= h
  double learning_rate = 0.005;     // controller step size
  RewardWeights weights;
  std::size_t replay_capacity = 64;
  std::size_t replay_sample = 8;
  std::uint64_t seed = 0;
  ControllerOptions controller;
  RndOptions rnd;

  /// ppo_start >= 1, ppo_start <= search_steps unless search_steps == 0,
  /// learning_rate > 0, replay sizes positive, weights valid.
  void validate() const;
};

nlohmann::json to_json(const SearchConfig& config);

struct IterationRecord {
  std::size_t iter = 0;  // 1-based
  ConnectionScheme scheme;
  std::vector<double> probs;  // p_theta the scheme was drawn from
  RewardBreakdown reward;
  double pbar = 0.0;          // mean realized probability of the drawn scheme
  double true_reward = 0.0;   // lambda1 g_spa + lambda2 noiseless g_val
  bool ppo_applied = false;
};

nlohmann::json to_json(const IterationRecord& rec);

struct SearchRun {
  std::vector<IterationRecord> log;
  std::optional<ConnectionScheme> best_scheme;
  double best_reward = 0.0;
  std::vector<double> best_trace;  // best-seen true reward after each iteration
  std::vector<double> pbar_trace;
  ConnectionScheme extracted;
  std::size_t completed = 0;
};

/// One iteration at a time, in the fixed order: sample, score, policy step,
/// predictor step, buffer put, then the replay step once t >= h.
class SearchLoop {
 public:
  SearchLoop(const SearchConfig& config, std::size_t m);

  /// Runs iteration `iteration() + 1`; throws whatever the evaluator throws
  /// before any state is modified.
  const IterationRecord& step(Evaluator& env);
  bool finished() const { return run_.completed >= config_.search_steps; }
  std::size_t iteration() const { return run_.completed; }

  /// Summary with `extracted` refreshed from the current controller.
  SearchRun result() const;
  const SearchRun& partial() const { return run_; }

  const Controller& controller() const { return controller_; }
  const RndPair& rnd() const { return rnd_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const SearchConfig& config() const { return config_; }

  /// Complete resumable state (JSON; doubles round-trip exactly).
  nlohmann::json save_state() const;
  static SearchLoop restore_state(const nlohmann::json& state);

 private:
  SearchConfig config_;
  std::size_t m_;
  Rng init_rng_;
  Controller controller_;
  RndPair rnd_;
  ReplayBuffer buffer_;
  Rng sample_rng_;
  Rng replay_rng_;
  SearchRun run_;
};

using IterationSink = std::function<void(const IterationRecord&)>;

/// Raised when the evaluator fails mid-run. Carries the partial run and a
/// state from which SearchLoop::restore_state resumes at the failed iteration.
class SearchAborted : public std::runtime_error {
 public:
  SearchAborted(const std::string& what, SearchRun partial, nlohmann::json state)
      : std::runtime_error(what), partial_(std::move(partial)), state_(std::move(state)) {}
  const SearchRun& partial() const { return partial_; }
  const nlohmann::json& state() const { return state_; }

 private:
  SearchRun partial_;
  nlohmann::json state_;
};

SearchRun run_search(const SearchConfig& config, std::size_t m, Evaluator& env, const IterationSink& sink = {});
/// Continues a loop (fresh or restored) until T iterations are done.
SearchRun run_search(SearchLoop& loop, Evaluator& env, const IterationSink& sink = {});

// ---------------------------------------------------------------------------
// Baselines and oracles

using ValueOracle = std::function<double(const ConnectionScheme&)>;

struct RankedScheme {
  std::uint64_t code = 0;  // bit 0 of the scheme is the most significant of m bits
  double g_spa = 0.0;
  double g_val = 0.0;
  double total = 0.0;

  ConnectionScheme scheme(std::size_t m) const { return ConnectionScheme::from_code(code, m); }
};

inline constexpr std::size_t kBruteForceMaxBits = 24;

/// All 2^m schemes scored by lambda1 g_spa + lambda2 g_val (no curiosity term),
/// best first; ties go to the lexicographically smaller scheme string.
/// `workers` > 1 scores disjoint index ranges concurrently.
std::vector<RankedScheme> brute_force(std::size_t m, const RewardWeights& weights, const ValueOracle& oracle,
                                      std::size_t workers = 1);

/// 1-based rank a total would take in a brute-force ranking (1 + number of strictly better entries).
std::size_t rank_of(std::span<const RankedScheme> ranking, double total);

struct RandomBaseline {
  std::vector<ConnectionScheme> schemes;
  std::vector<double> g_val;
  std::vector<double> totals;
  std::size_t best_index = 0;
  ConnectionScheme best() const { return schemes.at(best_index); }
};

/// n i.i.d. Bernoulli(0.5) schemes scored by true reward.
RandomBaseline baseline_random(std::size_t m, const RewardWeights& weights, const ValueOracle& oracle, std::size_t n,
                               Rng& rng);

/// Connect every `period`-th block: a_i = 1 iff i mod period == offset (0-based i).
ConnectionScheme baseline_hsp(std::size_t m, std::size_t period, std::size_t offset);

// ---------------------------------------------------------------------------
// Statistics

/// Pearson correlation; throws NumericError when either series has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 0.0;  // one-sided, H1: mean(a) > mean(b)
};

/// Welch's two-sample t-test, one-sided.
TTestResult welch_t_test_greater(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);

/// First 1-based iteration whose pbar exceeds `threshold`, or nullopt.
std::optional<std::size_t> first_iteration_above(std::span<const double> pbar_trace, double threshold);

}  // namespace ean
