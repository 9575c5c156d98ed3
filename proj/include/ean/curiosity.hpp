#pragma once

// Random network distillation: a frozen random target network and a trained
// predictor, both reading a scheme as a 0/1 vector. The squared distance
// between their outputs is the novelty bonus.

#include <cstddef>

#include "ean/nn.hpp"
#include "ean/rng.hpp"
#include "ean/scheme.hpp"

namespace ean {

struct RndOptions {
  std::size_t hidden = 32;
  std::size_t embed_dim = 16;
  double learning_rate = 1e-3;  // Adam
  /// Divide the bonus by the running standard deviation of observed bonuses.
  bool normalize = false;
};

/// Welford running mean/variance.
class RunningStd {
 public:
  void observe(double x);
  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  /// Population standard deviation; 0 until two samples are seen.
  double stddev() const;
  double m2() const { return m2_; }
  static RunningStd restore(std::size_t count, double mean, double m2);

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

class RndPair {
 public:
  /// Target and predictor are drawn independently from `rng`.
  RndPair(std::size_t m, RndOptions options, Rng& rng);
  RndPair(nn::MlpParams target, nn::MlpParams predictor, RndOptions options);

  /// ||target(a) - predictor(a)||^2
  double bonus(const ConnectionScheme& scheme) const;
  /// Gradient of bonus(scheme) w.r.t. the predictor parameters.
  nn::GradientBundle predictor_gradient(const ConnectionScheme& scheme) const;
  /// One Adam descent step on bonus(scheme); the target is never modified.
  void train(const ConnectionScheme& scheme);

  /// Bonus divided by the running std when normalization is enabled (and at
  /// least two bonuses have been observed); the raw bonus otherwise.
  /// Records the raw bonus in the running statistics.
  double reward_bonus(const ConnectionScheme& scheme);

  const nn::MlpParams& target() const { return target_; }
  const nn::MlpParams& predictor() const { return predictor_; }
  nn::MlpParams& predictor() { return predictor_; }
  const nn::OptimizerState& predictor_optimizer() const { return optimizer_; }
  nn::OptimizerState& predictor_optimizer() { return optimizer_; }
  const RndOptions& options() const { return options_; }
  std::size_t embed_dim() const { return target_.output_dim(); }
  const RunningStd& running() const { return running_; }
  RunningStd& running() { return running_; }

 private:
  void check_scheme(const ConnectionScheme& scheme) const;

  RndOptions options_;
  nn::MlpParams target_;
  nn::MlpParams predictor_;
  nn::OptimizerState optimizer_;
  RunningStd running_;
};

}  // namespace ean
