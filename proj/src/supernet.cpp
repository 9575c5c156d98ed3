#include "ean/supernet.hpp"

#include <sched.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "ean/checkpoint.hpp"
#include "ean/errors.hpp"

namespace ean {

using nn::Matrix;

namespace {

constexpr std::uint64_t kDataStream = 0x64617461;   // "data"
constexpr std::uint64_t kBatchStream = 0x6261746368; // "batch"
constexpr std::uint64_t kInputStream = 0x696e707574; // "input"

nn::MlpParams make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const std::array<std::size_t, 2> dims{in, out};
  const std::array<nn::Activation, 1> acts{nn::Activation::identity};
  return nn::make_mlp(dims, acts, rng);
}

nn::MlpParams make_block(std::size_t width, std::size_t hidden, double gain, Rng& rng) {
  const std::array<std::size_t, 3> dims{width, hidden, width};
  const std::array<nn::Activation, 2> acts{nn::Activation::relu, nn::Activation::identity};
  auto p = nn::make_mlp(dims, acts, rng);
  if (gain != 1.0)
    for (auto& w : p.weights)
      for (double& v : w.data) v *= gain;
  return p;
}

nn::MlpParams make_attention(std::size_t width, std::size_t bottleneck, Rng& rng) {
  const std::array<std::size_t, 3> dims{width, bottleneck, width};
  const std::array<nn::Activation, 2> acts{nn::Activation::relu, nn::Activation::sigmoid};
  return nn::make_mlp(dims, acts, rng);
}

void check_scheme(const Supernet& net, const ConnectionScheme& scheme) {
  if (scheme.size() != net.m())
    throw ShapeError("supernet: scheme has " + std::to_string(scheme.size()) + " bits, network has " +
                     std::to_string(net.m()) + " blocks");
}

Split make_split(std::size_t n, const std::vector<Matrix>& centres, std::size_t input_dim, Rng& rng) {
  Split s;
  s.x = Matrix(n, input_dim);
  s.y.resize(n);
  const std::size_t classes = centres.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    const std::size_t k = rng.index(centres[c].rows);
    auto row = s.x.row(i);
    const auto centre = centres[c].row(k);
    for (std::size_t d = 0; d < input_dim; ++d) row[d] = centre[d] + rng.normal();
    s.y[i] = c;
  }
  return s;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(x.row(idx[r]).begin(), x.cols, out.row(r).begin());
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(SharingMode mode) { return mode == SharingMode::org_full ? "org_full" : "share_full"; }

SharingMode sharing_mode_from_string(const std::string& text) {
  if (text == "org_full") return SharingMode::org_full;
  if (text == "share_full") return SharingMode::share_full;
  throw ConfigError("sharing_mode", "expected org_full or share_full, got '" + text + "'");
}

std::size_t SupernetConfig::m() const {
  std::size_t total = 0;
  for (auto s : stage_sizes) total += s;
  return total;
}

void SupernetConfig::validate() const {
  if (stage_sizes.empty()) throw ConfigError("stage_sizes", "at least one stage required");
  if (stage_widths.size() != stage_sizes.size())
    throw ConfigError("stage_widths", "needs one width per stage");
  for (auto s : stage_sizes)
    if (s == 0) throw ConfigError("stage_sizes", "every stage needs at least one block");
  for (auto w : stage_widths)
    if (w == 0) throw ConfigError("stage_widths", "widths must be positive");
  if (block_hidden == 0) throw ConfigError("block_hidden", "must be positive");
  if (attention_bottleneck == 0) throw ConfigError("attention_bottleneck", "must be positive");
  if (!(block_init_gain > 0.0) || !std::isfinite(block_init_gain))
    throw ConfigError("block_init_gain", "must be positive and finite");
  if (classes < 2) throw ConfigError("classes", "need at least two classes");
  if (input_dim == 0) throw ConfigError("input_dim", "must be positive");
  if (clusters_per_class == 0) throw ConfigError("clusters_per_class", "must be positive");
  if (!(center_spread > 0.0) || !std::isfinite(center_spread)) throw ConfigError("center_spread", "must be positive");
  if (train_size < classes || val_size < classes || test_size < classes)
    throw ConfigError("train_size", "every split needs at least one sample per class");
  if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be positive");
  if (pretrain_steps == 0) throw ConfigError("pretrain_steps", "must be at least 1");
  if (scratch_steps == 0) throw ConfigError("scratch_steps", "must be at least 1");
}

nlohmann::json to_json(const SupernetConfig& c) {
  return {{"stage_sizes", c.stage_sizes},
          {"stage_widths", c.stage_widths},
          {"block_hidden", c.block_hidden},
          {"attention_bottleneck", c.attention_bottleneck},
          {"block_init_gain", c.block_init_gain},
          {"sharing_mode", to_string(c.sharing)},
          {"dataset_seed", c.dataset_seed},
          {"classes", c.classes},
          {"input_dim", c.input_dim},
          {"clusters_per_class", c.clusters_per_class},
          {"center_spread", c.center_spread},
          {"train_size", c.train_size},
          {"val_size", c.val_size},
          {"test_size", c.test_size},
          {"init_seed", c.init_seed},
          {"pretrain_steps", c.pretrain_steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"scratch_steps", c.scratch_steps}};
}

SupernetConfig supernet_config_from_json(const nlohmann::json& j) {
  SupernetConfig c;
  if (!j.is_object()) throw ConfigError("", "supernet config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "stage_sizes") c.stage_sizes = v.get<std::vector<std::size_t>>();
      else if (key == "stage_widths") c.stage_widths = v.get<std::vector<std::size_t>>();
      else if (key == "block_hidden") c.block_hidden = v.get<std::size_t>();
      else if (key == "attention_bottleneck") c.attention_bottleneck = v.get<std::size_t>();
      else if (key == "block_init_gain") c.block_init_gain = v.get<double>();
      else if (key == "sharing_mode") c.sharing = sharing_mode_from_string(v.get<std::string>());
      else if (key == "dataset_seed") c.dataset_seed = v.get<std::uint64_t>();
      else if (key == "classes") c.classes = v.get<std::size_t>();
      else if (key == "input_dim") c.input_dim = v.get<std::size_t>();
      else if (key == "clusters_per_class") c.clusters_per_class = v.get<std::size_t>();
      else if (key == "center_spread") c.center_spread = v.get<double>();
      else if (key == "train_size") c.train_size = v.get<std::size_t>();
      else if (key == "val_size") c.val_size = v.get<std::size_t>();
      else if (key == "test_size") c.test_size = v.get<std::size_t>();
      else if (key == "init_seed") c.init_seed = v.get<std::uint64_t>();
      else if (key == "pretrain_steps") c.pretrain_steps = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "scratch_steps") c.scratch_steps = v.get<std::size_t>();
      else throw ConfigError(key, "unknown supernet setting");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key, e.what());
    }
  }
  c.validate();
  return c;
}

ToyDataset make_toy_dataset(const SupernetConfig& config) {
  config.validate();
  Rng rng(Rng::derive(config.dataset_seed, kDataStream));
  std::vector<Matrix> centres;
  for (std::size_t c = 0; c < config.classes; ++c) {
    Matrix m(config.clusters_per_class, config.input_dim);
    for (double& v : m.data) v = rng.normal(0.0, config.center_spread);
    centres.push_back(std::move(m));
  }
  ToyDataset d;
  d.input_dim = config.input_dim;
  d.classes = config.classes;
  d.seed = config.dataset_seed;
  d.train = make_split(config.train_size, centres, config.input_dim, rng);
  d.val = make_split(config.val_size, centres, config.input_dim, rng);
  d.test = make_split(config.test_size, centres, config.input_dim, rng);
  return d;
}

// ---------------------------------------------------------------------------

std::size_t Supernet::attention_parameter_count() const {
  std::size_t n = 0;
  for (const auto& a : attention) n += a.parameter_count();
  return n;
}

std::size_t Supernet::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : modules()) n += p->parameter_count();
  return n;
}

std::vector<const nn::MlpParams*> Supernet::modules() const {
  std::vector<const nn::MlpParams*> out{&stem};
  for (const auto& b : blocks) out.push_back(&b);
  for (const auto& a : attention) out.push_back(&a);
  for (const auto& p : projections) out.push_back(&p);
  out.push_back(&head);
  return out;
}

std::vector<nn::MlpParams*> Supernet::modules() {
  std::vector<nn::MlpParams*> out{&stem};
  for (auto& b : blocks) out.push_back(&b);
  for (auto& a : attention) out.push_back(&a);
  for (auto& p : projections) out.push_back(&p);
  out.push_back(&head);
  return out;
}

std::vector<std::string> Supernet::module_names() const {
  std::vector<std::string> out{"stem"};
  for (std::size_t i = 0; i < blocks.size(); ++i) out.push_back("block." + std::to_string(i));
  for (std::size_t i = 0; i < attention.size(); ++i) out.push_back("attention." + std::to_string(i));
  for (std::size_t i = 0; i < projections.size(); ++i) out.push_back("projection." + std::to_string(i));
  out.push_back("head");
  return out;
}

namespace {

void wire_layout(Supernet& net) {
  const auto& c = net.config;
  net.attention_of.clear();
  net.stage_of.clear();
  std::size_t block = 0;
  for (std::size_t k = 0; k < c.stage_sizes.size(); ++k) {
    for (std::size_t j = 0; j < c.stage_sizes[k]; ++j, ++block) {
      net.stage_of.push_back(k);
      net.attention_of.push_back(c.sharing == SharingMode::share_full ? k : block);
    }
  }
}

}  // namespace

Supernet make_supernet(const SupernetConfig& config, Rng& rng) {
  config.validate();
  Supernet net;
  net.config = config;
  const auto& w = config.stage_widths;
  net.stem = make_linear(config.input_dim, w.front(), rng);
  for (std::size_t k = 0; k < config.stage_sizes.size(); ++k)
    for (std::size_t j = 0; j < config.stage_sizes[k]; ++j) net.blocks.push_back(make_block(w[k], config.block_hidden, config.block_init_gain, rng));
  if (config.sharing == SharingMode::share_full) {
    for (std::size_t k = 0; k < config.stage_sizes.size(); ++k)
      net.attention.push_back(make_attention(w[k], config.attention_bottleneck, rng));
  } else {
    for (std::size_t k = 0; k < config.stage_sizes.size(); ++k)
      for (std::size_t j = 0; j < config.stage_sizes[k]; ++j)
        net.attention.push_back(make_attention(w[k], config.attention_bottleneck, rng));
  }
  for (std::size_t k = 0; k + 1 < w.size(); ++k) net.projections.push_back(make_linear(w[k], w[k + 1], rng));
  net.head = make_linear(w.back(), config.classes, rng);
  wire_layout(net);
  return net;
}

SupernetGrads zero_grads(const Supernet& net) {
  SupernetGrads g;
  for (const auto* p : net.modules()) g.push_back(nn::GradientBundle::zeros_like(*p));
  return g;
}

Matrix forward(const Supernet& net, const ConnectionScheme& scheme, const Matrix& input, SupernetTrace* trace) {
  check_scheme(net, scheme);
  if (trace) {
    trace->blocks.assign(net.m(), {});
    trace->projections.assign(net.projections.size(), {});
  }
  Matrix h = nn::mlp_forward(net.stem, input, trace ? &trace->stem : nullptr);
  for (std::size_t l = 0; l < net.m(); ++l) {
    BlockTrace* bt = trace ? &trace->blocks[l] : nullptr;
    const Matrix f = nn::mlp_forward(net.blocks[l], h, bt ? &bt->f : nullptr);
    if (scheme[l]) {
      const Matrix mask = nn::mlp_forward(net.attention[net.attention_of[l]], f, bt ? &bt->attention : nullptr);
      for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += mask.data[i] * f.data[i];
    } else {
      for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += f.data[i];
    }
    if (bt) bt->output = h;
    const bool stage_end = l + 1 == net.m() || net.stage_of[l + 1] != net.stage_of[l];
    if (stage_end && l + 1 < net.m()) {
      const std::size_t k = net.stage_of[l];
      h = nn::mlp_forward(net.projections[k], h, trace ? &trace->projections[k] : nullptr);
    }
  }
  return nn::mlp_forward(net.head, h, trace ? &trace->head : nullptr);
}

double cross_entropy(const Matrix& logits, std::span<const std::size_t> labels, Matrix* upstream) {
  if (labels.size() != logits.rows) throw ShapeError("cross_entropy: label count differs from batch size");
  if (upstream) *upstream = Matrix(logits.rows, logits.cols);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  double total = 0.0;
  std::vector<double> p(logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto z = logits.row(r);
    if (labels[r] >= logits.cols) throw ShapeError("cross_entropy: label out of range");
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      p[c] = std::exp(z[c] - zmax);
      sum += p[c];
    }
    total += std::log(sum) - (z[labels[r]] - zmax);
    if (upstream) {
      auto g = upstream->row(r);
      for (std::size_t c = 0; c < z.size(); ++c) g[c] = (p[c] / sum - (c == labels[r] ? 1.0 : 0.0)) * inv_n;
    }
  }
  return total * inv_n;
}

void backward(const Supernet& net, const ConnectionScheme& scheme, const SupernetTrace& trace, const Matrix& upstream,
              SupernetGrads& grads) {
  check_scheme(net, scheme);
  const std::size_t off_blocks = 1;
  const std::size_t off_att = net.attention_module_offset();
  const std::size_t off_proj = off_att + net.attention.size();
  const std::size_t head_idx = off_proj + net.projections.size();
  if (grads.size() != head_idx + 1) throw ShapeError("backward: gradient list does not match the network");
  if (trace.blocks.size() != net.m()) throw ShapeError("backward: trace does not match the network");

  Matrix dh = nn::mlp_backward(net.head, trace.head, upstream, grads[head_idx]);
  for (std::size_t l = net.m(); l-- > 0;) {
    const bool stage_end = l + 1 == net.m() || net.stage_of[l + 1] != net.stage_of[l];
    if (stage_end && l + 1 < net.m()) {
      const std::size_t k = net.stage_of[l];
      dh = nn::mlp_backward(net.projections[k], trace.projections[k], dh, grads[off_proj + k]);
    }
    const BlockTrace& bt = trace.blocks[l];
    Matrix df;
    if (scheme[l]) {
      const Matrix& f = bt.f.layers.back();
      const Matrix& mask = bt.attention.layers.back();
      df = Matrix(dh.rows, dh.cols);
      Matrix dmask(dh.rows, dh.cols);
      for (std::size_t i = 0; i < dh.data.size(); ++i) {
        df.data[i] = dh.data[i] * mask.data[i];
        dmask.data[i] = dh.data[i] * f.data[i];
      }
      const std::size_t a = net.attention_of[l];
      const Matrix via_mask = nn::mlp_backward(net.attention[a], bt.attention, dmask, grads[off_att + a]);
      for (std::size_t i = 0; i < df.data.size(); ++i) df.data[i] += via_mask.data[i];
    } else {
      df = dh;
    }
    const Matrix dx = nn::mlp_backward(net.blocks[l], bt.f, df, grads[off_blocks + l]);
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dx.data[i];
  }
  nn::mlp_backward(net.stem, trace.stem, dh, grads[0]);
}

double loss_and_gradient(const Supernet& net, const ConnectionScheme& scheme, const Matrix& x,
                         std::span<const std::size_t> labels, SupernetGrads& grads) {
  SupernetTrace trace;
  const Matrix logits = forward(net, scheme, x, &trace);
  Matrix upstream;
  const double loss = cross_entropy(logits, labels, &upstream);
  backward(net, scheme, trace, upstream, grads);
  return loss;
}

double accuracy(const Supernet& net, const ConnectionScheme& scheme, const Split& split) {
  if (split.size() == 0) return 0.0;
  const Matrix logits = forward(net, scheme, split.x);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto z = logits.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    hits += best == split.y[r];
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

// ---------------------------------------------------------------------------

SupernetOptimizer SupernetOptimizer::adam(const Supernet& net, double learning_rate) {
  SupernetOptimizer o;
  o.states.assign(net.modules().size(), nn::OptimizerState::adam(learning_rate));
  return o;
}

void apply_gradients(Supernet& net, const SupernetGrads& grads, SupernetOptimizer& optimizer) {
  auto mods = net.modules();
  if (grads.size() != mods.size() || optimizer.states.size() != mods.size())
    throw ShapeError("apply_gradients: gradient or optimizer list does not match the network");
  for (const auto& g : grads)
    if (!g.all_finite()) throw NumericError("apply_gradients: non-finite gradient");
  for (std::size_t i = 0; i < mods.size(); ++i) {
    // Modules that took no part in the step are left alone, moments included.
    if (grads[i].all_zero()) continue;
    nn::optimizer_step(*mods[i], grads[i], optimizer.states[i], nn::Direction::descend);
  }
}

namespace {

double train_steps(Supernet& net, const Split& train, std::size_t steps, std::size_t batch, double lr, Rng& rng,
                   const std::function<ConnectionScheme(Rng&)>& draw_scheme,
                   const std::function<void(std::size_t, double)>& on_step) {
  SupernetOptimizer opt = SupernetOptimizer::adam(net, lr);
  SupernetGrads grads = zero_grads(net);
  std::vector<std::size_t> idx(batch);
  double last = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const ConnectionScheme a = draw_scheme(rng);
    for (auto& i : idx) i = rng.index(train.size());
    const Matrix x = gather_rows(train.x, idx);
    std::vector<std::size_t> y(batch);
    for (std::size_t r = 0; r < batch; ++r) y[r] = train.y[idx[r]];
    for (auto& g : grads) g.set_zero();
    last = loss_and_gradient(net, a, x, y, grads);
    apply_gradients(net, grads, opt);
    if (on_step) on_step(t, last);
  }
  return last;
}

}  // namespace

PretrainResult pretrain(Supernet& net, const ToyDataset& data, std::size_t steps, Rng& rng,
                        const PretrainOptions& options) {
  if (steps == 0) throw ConfigError("pretrain_steps", "must be at least 1");
  std::vector<double> probs = options.block_probs;
  if (probs.empty()) probs.assign(net.m(), 0.5);
  if (probs.size() != net.m()) throw ShapeError("pretrain: block_probs length differs from block count");
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("block_probs", "probabilities must lie in [0, 1]");
  const SchemeProbability sp{probs};
  PretrainResult result;
  result.losses.reserve(steps);
  train_steps(
      net, data.train, steps, net.config.batch_size, net.config.learning_rate, rng,
      [&](Rng& r) { return sample_from_probs(sp, r).with_stages(net.config.stage_sizes); },
      [&](std::size_t t, double loss) {
        result.losses.push_back(loss);
        if (options.on_step) options.on_step(t, loss);
      });
  return result;
}

double proxy_eval(const Supernet& net, const ConnectionScheme& scheme, const ToyDataset& data) {
  return accuracy(net, scheme, data.val);
}

double scratch_train(const SupernetConfig& config, const ConnectionScheme& scheme, const ToyDataset& data,
                     std::uint64_t seed) {
  Rng init(Rng::derive(seed, 1));
  Supernet net = make_supernet(config, init);
  check_scheme(net, scheme);
  Rng batches(Rng::derive(seed, kBatchStream));
  train_steps(
      net, data.train, config.scratch_steps, config.batch_size, config.learning_rate, batches,
      [&](Rng&) { return scheme; }, {});
  return accuracy(net, scheme, data.test);
}

std::string SupernetEvaluator::describe() const {
  return "supernet m=" + std::to_string(net_.m()) + " " + to_string(net_.config.sharing) +
         " dataset_seed=" + std::to_string(data_.seed);
}

// ---------------------------------------------------------------------------

double relative_increment(double with_seconds, double without_seconds) {
  if (!(without_seconds > 0.0) || !std::isfinite(without_seconds) || !std::isfinite(with_seconds))
    throw NumericError("relative_increment: baseline time must be positive and finite");
  return (with_seconds - without_seconds) / without_seconds * 100.0;
}

double SteadyStopwatch::time(TimingSide, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  body();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

namespace {

// Pins the calling thread to the CPU it is running on; restores on exit.
class CpuPin {
 public:
  explicit CpuPin(bool enable) {
    if (!enable) return;
    if (sched_getaffinity(0, sizeof(saved_), &saved_) != 0) return;
    const int cpu = sched_getcpu();
    if (cpu < 0) return;
    cpu_set_t one;
    CPU_ZERO(&one);
    CPU_SET(cpu, &one);
    active_ = sched_setaffinity(0, sizeof(one), &one) == 0;
  }
  ~CpuPin() {
    if (active_) sched_setaffinity(0, sizeof(saved_), &saved_);
  }

 private:
  cpu_set_t saved_{};
  bool active_ = false;
};

}  // namespace

TimingResult time_increment(const Supernet& net, const ConnectionScheme& scheme, const TimingOptions& options,
                            Stopwatch& clock) {
  check_scheme(net, scheme);
  if (options.reps == 0) throw ConfigError("reps", "must be at least 1");
  if (options.batch == 0) throw ConfigError("batch", "must be at least 1");
  const std::size_t runs = std::clamp<std::size_t>(options.runs, 1, options.reps);
  const ConnectionScheme zeros = ConnectionScheme::zeros(net.config.stage_sizes);

  Rng rng(Rng::derive(options.input_seed, kInputStream));
  Matrix input(options.batch, net.config.input_dim);
  for (double& v : input.data) v = rng.normal();

  CpuPin pin(options.pin_cpu);
  volatile double sink = 0.0;
  auto body = [&](const ConnectionScheme& a, std::size_t n) {
    return [&, n] {
      for (std::size_t i = 0; i < n; ++i) sink = sink + forward(net, a, input).data[0];
    };
  };
  // Warm-up outside the measurement.
  forward(net, scheme, input);
  forward(net, zeros, input);

  TimingResult r;
  for (std::size_t k = 0; k < runs; ++k) {
    const std::size_t n = options.reps / runs + (k < options.reps % runs ? 1 : 0);
    const double per = 1.0 / static_cast<double>(n);
    if (k % 2 == 0) {
      r.without_runs.push_back(clock.time(TimingSide::without_attention, body(zeros, n)) * per);
      r.with_runs.push_back(clock.time(TimingSide::with_attention, body(scheme, n)) * per);
    } else {
      r.with_runs.push_back(clock.time(TimingSide::with_attention, body(scheme, n)) * per);
      r.without_runs.push_back(clock.time(TimingSide::without_attention, body(zeros, n)) * per);
    }
  }
  r.with_seconds = median(r.with_runs);
  r.without_seconds = median(r.without_runs);
  r.increment_pct = relative_increment(r.with_seconds, r.without_seconds);
  return r;
}

TimingResult time_increment(const Supernet& net, const ConnectionScheme& scheme, const TimingOptions& options) {
  SteadyStopwatch clock;
  return time_increment(net, scheme, options, clock);
}

// ---------------------------------------------------------------------------

std::string save_supernet(const std::filesystem::path& path, const Supernet& net, const nlohmann::json& metadata) {
  std::vector<NamedNet> nets;
  const auto names = net.module_names();
  const auto mods = net.modules();
  for (std::size_t i = 0; i < mods.size(); ++i) nets.push_back({names[i], *mods[i]});
  nlohmann::json meta = metadata;
  meta["supernet_config"] = to_json(net.config);
  return save_checkpoint(path, nets, meta);
}

Supernet load_supernet(const std::filesystem::path& path) {
  auto loaded = load_checkpoint(path);
  const auto& meta = loaded.sidecar.at("metadata");
  if (!meta.contains("supernet_config")) throw Error("load_supernet: " + path.string() + " is not a supernet checkpoint");
  Supernet net;
  Rng unused(0);
  net = make_supernet(supernet_config_from_json(meta.at("supernet_config")), unused);
  auto mods = net.modules();
  const auto names = net.module_names();
  if (loaded.nets.size() != mods.size()) throw Error("load_supernet: module count differs from the configuration");
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (loaded.nets[i].name != names[i]) throw Error("load_supernet: unexpected module '" + loaded.nets[i].name + "'");
    if (loaded.nets[i].params.layer_dims != mods[i]->layer_dims ||
        loaded.nets[i].params.activations != mods[i]->activations)
      throw Error("load_supernet: module '" + names[i] + "' has the wrong shape");
    *mods[i] = std::move(loaded.nets[i].params);
  }
  return net;
}

}  // namespace ean
