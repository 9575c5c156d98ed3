#include "ean/controller.hpp"

#include <array>
#include <cmath>
#include <numeric>

#include "ean/errors.hpp"

namespace ean {

namespace {

nn::MlpParams make_controller_net(std::size_t m, const ControllerOptions& options, Rng& rng) {
  if (m == 0) throw ShapeError("Controller: scheme length must be positive");
  const std::array<std::size_t, 3> dims{options.input_dim, options.hidden, m};
  const std::array<nn::Activation, 2> acts{nn::Activation::relu, nn::Activation::sigmoid};
  nn::MlpParams net = nn::make_mlp(dims, acts, rng);
  auto& out = net.weights.back().data;
  std::fill(out.begin(), out.end(), 0.0);
  std::fill(net.biases.back().begin(), net.biases.back().end(), 0.0);
  return net;
}

double realized(double p, std::uint8_t bit) { return bit ? p : 1.0 - p; }

}  // namespace

Controller::Controller(std::size_t m, ControllerOptions options, Rng& rng)
    : Controller(make_controller_net(m, options, rng), options) {}

Controller::Controller(nn::MlpParams net, ControllerOptions options)
    : options_(options),
      net_(std::move(net)),
      optimizer_(nn::OptimizerState::sgd(options.learning_rate)),
      x0_(net_.input_dim(), 0.0) {
  nn::validate(net_);
  if (net_.activations.back() != nn::Activation::sigmoid)
    throw ShapeError("Controller: output layer must be sigmoid");
}

std::vector<double> Controller::raw_probs() const { return nn::mlp_forward(net_, x0_); }

SchemeProbability Controller::probs() const {
  SchemeProbability p{raw_probs()};
  for (double& v : p.probs) v = clamp_probability(v);
  return p;
}

void Controller::check_scheme(const ConnectionScheme& scheme) const {
  if (scheme.size() != size())
    throw ShapeError("Controller: scheme has " + std::to_string(scheme.size()) + " bits, controller emits " +
                     std::to_string(size()));
}

nn::GradientBundle Controller::reinforce_gradient(const ConnectionScheme& scheme, double reward) const {
  check_scheme(scheme);
  if (!std::isfinite(reward)) throw NumericError("reinforce_gradient: non-finite reward");
  const SchemeProbability p = probs();
  // d/dp_i of G log p_hat_i = G (2 a_i - 1) / p_hat_i; the sigmoid derivative
  // is applied by the backward pass.
  std::vector<double> upstream(size());
  for (std::size_t i = 0; i < size(); ++i)
    upstream[i] = reward * (scheme[i] ? 1.0 : -1.0) / realized(p.probs[i], scheme[i]);
  return nn::mlp_backward(net_, x0_, upstream);
}

nn::GradientBundle Controller::ppo_gradient(std::span<const TrajectoryRecord> batch) const {
  if (batch.empty()) return nn::GradientBundle::zeros_like(net_);
  const SchemeProbability p = probs();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<double> upstream(size(), 0.0);
  for (const auto& rec : batch) {
    check_scheme(rec.scheme);
    if (rec.probs_old.size() != size()) throw ShapeError("ppo_gradient: stored probabilities have the wrong length");
    if (!std::isfinite(rec.reward)) throw NumericError("ppo_gradient: non-finite reward");
    for (std::size_t i = 0; i < size(); ++i) {
      const std::uint8_t a = rec.scheme[i];
      const double old_hat = realized(clamp_probability(rec.probs_old.probs[i]), a);
      if (options_.ppo_clip) {
        const double ratio = realized(p.probs[i], a) / old_hat;
        const bool clipped = rec.reward >= 0.0 ? ratio > 1.0 + options_.clip_epsilon
                                               : ratio < 1.0 - options_.clip_epsilon;
        if (clipped) continue;
      }
      // ratio * grad log p_hat = grad p_hat / p_hat_old
      upstream[i] += inv_batch * rec.reward * (a ? 1.0 : -1.0) / old_hat;
    }
  }
  return nn::mlp_backward(net_, x0_, upstream);
}

void Controller::reinforce_update(const ConnectionScheme& scheme, double reward) {
  const auto g = reinforce_gradient(scheme, reward);
  nn::optimizer_step(net_, g, optimizer_, nn::Direction::ascend);
}

UpdateStatus Controller::ppo_update(std::span<const TrajectoryRecord> batch) {
  if (batch.empty()) return UpdateStatus::skipped_empty_batch;
  const auto g = ppo_gradient(batch);
  nn::optimizer_step(net_, g, optimizer_, nn::Direction::ascend);
  return UpdateStatus::applied;
}

double Controller::convergence_pbar(const ConnectionScheme& scheme) const {
  check_scheme(scheme);
  return ean::convergence_pbar(probs(), scheme);
}

ConnectionScheme Controller::extract_scheme() const {
  const auto p = raw_probs();
  std::vector<std::uint8_t> bits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bits[i] = p[i] > 0.5 ? 1 : 0;
  return ConnectionScheme(std::move(bits));
}

double convergence_pbar(const SchemeProbability& probs, const ConnectionScheme& scheme) {
  const auto hat = realized_probs(probs, scheme);
  if (hat.empty()) throw ShapeError("convergence_pbar: empty scheme");
  return std::accumulate(hat.begin(), hat.end(), 0.0) / static_cast<double>(hat.size());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::put(TrajectoryRecord record) {
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(record));
}

std::vector<TrajectoryRecord> ReplayBuffer::sample(std::size_t k, Rng& rng) const {
  if (records_.empty()) throw Error("ReplayBuffer::sample: buffer is empty");
  if (k == 0) throw Error("ReplayBuffer::sample: k must be at least 1");
  std::vector<TrajectoryRecord> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back(records_[rng.index(records_.size())]);
  return out;
}

}  // namespace ean
