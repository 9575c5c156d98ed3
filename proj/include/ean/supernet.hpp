#pragma once

// Toy residual supernet on vector features. Every block computes a two-layer
// residual mapping F = f(x); a connected block multiplies F by an attention
// mask M(F) in (0,1) before the skip addition, an unconnected block adds F
// unchanged:
//
//   x' = x + M(F) * F   (a = 1)
//   x' = x + F          (a = 0)
//
// Attention modules are owned per stage (share_full) or per block (org_full).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ean/environment.hpp"
#include "ean/nn.hpp"
#include "ean/rng.hpp"
#include "ean/scheme.hpp"

namespace ean {

enum class SharingMode { org_full, share_full };

std::string to_string(SharingMode mode);
SharingMode sharing_mode_from_string(const std::string& text);

struct SupernetConfig {
  std::vector<std::size_t> stage_sizes{6, 6, 6};
  std::vector<std::size_t> stage_widths{16, 32, 64};
  std::size_t block_hidden = 32;
  std::size_t attention_bottleneck = 8;
  /// Multiplier on the default uniform init bound of the residual branches.
  double block_init_gain = 1.75;
  SharingMode sharing = SharingMode::share_full;

  // Dataset
  std::uint64_t dataset_seed = 0;
  std::size_t classes = 8;
  std::size_t input_dim = 16;
  std::size_t clusters_per_class = 4;
  double center_spread = 1.0;  // std of cluster centres; samples have unit std around them
  std::size_t train_size = 4096;
  std::size_t val_size = 1024;
  std::size_t test_size = 1024;

  // Training
  std::uint64_t init_seed = 0;
  std::size_t pretrain_steps = 2000;  // K
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;  // Adam
  std::size_t scratch_steps = 600;

  std::size_t m() const;
  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

nlohmann::json to_json(const SupernetConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
SupernetConfig supernet_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Data

struct Split {
  nn::Matrix x;
  std::vector<std::size_t> y;
  std::size_t size() const { return y.size(); }
};

/// Balanced Gaussian-mixture classification data; each class is a mixture of
/// `clusters_per_class` unit-variance blobs around random centres.
struct ToyDataset {
  Split train;
  Split val;
  Split test;
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  std::uint64_t seed = 0;
};

ToyDataset make_toy_dataset(const SupernetConfig& config);

// ---------------------------------------------------------------------------
// Network

/// Parameter sets in a fixed order: stem, blocks, attention modules, stage
/// projections, head. `attention_of[l]` is the attention module block l uses;
/// in share_full mode all blocks of a stage name the same module.
struct Supernet {
  SupernetConfig config;
  nn::MlpParams stem;
  std::vector<nn::MlpParams> blocks;
  std::vector<nn::MlpParams> attention;
  std::vector<std::size_t> attention_of;
  std::vector<std::size_t> stage_of;
  std::vector<nn::MlpParams> projections;
  nn::MlpParams head;

  std::size_t m() const { return blocks.size(); }
  std::size_t attention_parameter_count() const;
  std::size_t parameter_count() const;

  /// All parameter sets in the fixed order, with their checkpoint names.
  std::vector<const nn::MlpParams*> modules() const;
  std::vector<nn::MlpParams*> modules();
  std::vector<std::string> module_names() const;
  std::size_t attention_module_offset() const { return 1 + blocks.size(); }
};

/// Fresh parameters drawn from `rng`.
Supernet make_supernet(const SupernetConfig& config, Rng& rng);

/// Gradients aligned with Supernet::modules().
using SupernetGrads = std::vector<nn::GradientBundle>;
SupernetGrads zero_grads(const Supernet& net);

struct BlockTrace {
  nn::ForwardTrace f;          // layers[0] is the block input
  nn::ForwardTrace attention;  // empty for unconnected blocks
  nn::Matrix output;
};

struct SupernetTrace {
  nn::ForwardTrace stem;
  std::vector<BlockTrace> blocks;
  std::vector<nn::ForwardTrace> projections;
  nn::ForwardTrace head;
};

/// Class scores, one row per input row.
nn::Matrix forward(const Supernet& net, const ConnectionScheme& scheme, const nn::Matrix& input,
                   SupernetTrace* trace = nullptr);

/// Mean softmax cross-entropy of `logits` against `labels`; writes
/// d loss / d logits into `upstream` when given.
double cross_entropy(const nn::Matrix& logits, std::span<const std::size_t> labels, nn::Matrix* upstream = nullptr);

/// Backpropagates d loss / d logits through a traced forward pass,
/// accumulating into `grads`.
void backward(const Supernet& net, const ConnectionScheme& scheme, const SupernetTrace& trace,
              const nn::Matrix& upstream, SupernetGrads& grads);

/// Mean cross-entropy on a batch; accumulates its gradient into `grads`.
double loss_and_gradient(const Supernet& net, const ConnectionScheme& scheme, const nn::Matrix& x,
                         std::span<const std::size_t> labels, SupernetGrads& grads);

/// Fraction of rows whose arg-max score matches the label.
double accuracy(const Supernet& net, const ConnectionScheme& scheme, const Split& split);

// ---------------------------------------------------------------------------
// Training

struct SupernetOptimizer {
  std::vector<nn::OptimizerState> states;  // aligned with Supernet::modules()
  static SupernetOptimizer adam(const Supernet& net, double learning_rate);
};

void apply_gradients(Supernet& net, const SupernetGrads& grads, SupernetOptimizer& optimizer);

struct PretrainOptions {
  /// Per-block connection probability; empty means 0.5 everywhere.
  std::vector<double> block_probs;
  /// Called after every step with (step, loss).
  std::function<void(std::size_t, double)> on_step;
};

struct PretrainResult {
  std::vector<double> losses;
};

/// K steps: draw a scheme, one minibatch, one Adam step through that sub-network.
PretrainResult pretrain(Supernet& net, const ToyDataset& data, std::size_t steps, Rng& rng,
                        const PretrainOptions& options = {});

/// Validation accuracy of the sub-network (pure).
double proxy_eval(const Supernet& net, const ConnectionScheme& scheme, const ToyDataset& data);

/// Trains fresh parameters for `scheme` alone with config.scratch_steps steps
/// and returns test accuracy. Deterministic in `seed`.
double scratch_train(const SupernetConfig& config, const ConnectionScheme& scheme, const ToyDataset& data,
                     std::uint64_t seed);

/// Evaluator answering g_val with proxy_eval on a frozen supernet.
class SupernetEvaluator final : public Evaluator {
 public:
  SupernetEvaluator(const Supernet& net, const ToyDataset& data) : net_(net), data_(data) {}
  double evaluate(const ConnectionScheme& scheme) override { return proxy_eval(net_, scheme, data_); }
  std::string describe() const override;

 private:
  const Supernet& net_;
  const ToyDataset& data_;
};

// ---------------------------------------------------------------------------
// Timing

/// Relative inference time increment in percent: (with - without) / without * 100.
double relative_increment(double with_seconds, double without_seconds);

/// Which forward pass a measurement belongs to.
enum class TimingSide { without_attention, with_attention };

class Stopwatch {
 public:
  virtual ~Stopwatch() = default;
  /// Seconds taken by `body`.
  virtual double time(TimingSide side, const std::function<void()>& body) = 0;
};

class SteadyStopwatch final : public Stopwatch {
 public:
  double time(TimingSide side, const std::function<void()>& body) override;
};

struct TimingOptions {
  std::size_t batch = 50;
  std::size_t reps = 1000;  // forward passes per side
  std::size_t runs = 1000;  // reps are split into this many interleaved runs
  bool pin_cpu = true;
  std::uint64_t input_seed = 0;
};

struct TimingResult {
  double with_seconds = 0.0;     // median per-forward time
  double without_seconds = 0.0;  // median per-forward time
  double increment_pct = 0.0;
  std::vector<double> with_runs;
  std::vector<double> without_runs;
};

/// Median-of-runs per-forward time with `scheme` and with the all-zero
/// scheme on the same inputs; the two sides alternate run by run.
TimingResult time_increment(const Supernet& net, const ConnectionScheme& scheme, const TimingOptions& options,
                            Stopwatch& clock);
TimingResult time_increment(const Supernet& net, const ConnectionScheme& scheme, const TimingOptions& options = {});

// ---------------------------------------------------------------------------
// Persistence

std::string save_supernet(const std::filesystem::path& path, const Supernet& net,
                          const nlohmann::json& metadata = nlohmann::json::object());
Supernet load_supernet(const std::filesystem::path& path);

}  // namespace ean
