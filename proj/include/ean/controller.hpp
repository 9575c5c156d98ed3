#pragma once

// Scheme-generating policy: a feed-forward network fed a constant zero vector
// whose sigmoid outputs are the per-block connection probabilities.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "ean/nn.hpp"
#include "ean/rng.hpp"
#include "ean/scheme.hpp"

namespace ean {

struct ControllerOptions {
  std::size_t input_dim = 8;
  std::size_t hidden = 64;
  double learning_rate = 0.005;
  /// Clipped-ratio PPO variant; the default applies the unclipped importance ratio.
  bool ppo_clip = false;
  double clip_epsilon = 0.2;
};

/// One replay-buffer entry: the probabilities the scheme was sampled from,
/// the scheme, and the reward it earned.
struct TrajectoryRecord {
  SchemeProbability probs_old;
  ConnectionScheme scheme;
  double reward = 0.0;
  std::size_t iteration = 0;
};

enum class UpdateStatus { applied, skipped_empty_batch };

class Controller {
 public:
  /// Hidden layer drawn from `rng`; the output layer starts at zero, so every
  /// initial probability is exactly 0.5.
  Controller(std::size_t m, ControllerOptions options, Rng& rng);
  Controller(nn::MlpParams net, ControllerOptions options);

  std::size_t size() const { return net_.output_dim(); }

  /// Clamped probabilities p_theta = chi_theta(x0).
  SchemeProbability probs() const;
  /// Sigmoid outputs before clamping.
  std::vector<double> raw_probs() const;

  /// Gradient of G * sum_i log p_hat_i.
  nn::GradientBundle reinforce_gradient(const ConnectionScheme& scheme, double reward) const;
  /// Batch mean of G * sum_i (p_hat_i / p_hat_old_i) * grad log p_hat_i.
  nn::GradientBundle ppo_gradient(std::span<const TrajectoryRecord> batch) const;

  /// theta += lr * reinforce_gradient. Rejects non-finite rewards.
  void reinforce_update(const ConnectionScheme& scheme, double reward);
  /// theta += lr * ppo_gradient. An empty batch leaves theta untouched.
  UpdateStatus ppo_update(std::span<const TrajectoryRecord> batch);

  /// Mean realized probability of `scheme` under the current policy.
  double convergence_pbar(const ConnectionScheme& scheme) const;
  /// a_i = 1 iff p_i > 0.5.
  ConnectionScheme extract_scheme() const;

  const nn::MlpParams& net() const { return net_; }
  nn::MlpParams& net() { return net_; }
  const nn::OptimizerState& optimizer() const { return optimizer_; }
  nn::OptimizerState& optimizer() { return optimizer_; }
  const ControllerOptions& options() const { return options_; }

 private:
  void check_scheme(const ConnectionScheme& scheme) const;

  ControllerOptions options_;
  nn::MlpParams net_;
  nn::OptimizerState optimizer_;
  std::vector<double> x0_;
};

/// Mean of realized_probs(probs, scheme).
double convergence_pbar(const SchemeProbability& probs, const ConnectionScheme& scheme);

/// Fixed-capacity FIFO of trajectory records.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void put(TrajectoryRecord record);
  /// k uniform draws with replacement. Throws on an empty buffer or k == 0.
  std::vector<TrajectoryRecord> sample(std::size_t k, Rng& rng) const;

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }
  /// Oldest first.
  const std::deque<TrajectoryRecord>& records() const { return records_; }

 private:
  std::size_t capacity_;
  std::deque<TrajectoryRecord> records_;
};

}  // namespace ean
