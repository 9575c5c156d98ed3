#include "ean/curiosity.hpp"

#include <array>
#include <cmath>

#include "ean/errors.hpp"

namespace ean {

namespace {

nn::MlpParams make_rnd_net(std::size_t m, const RndOptions& options, Rng& rng) {
  if (m == 0) throw ShapeError("RndPair: scheme length must be positive");
  const std::array<std::size_t, 3> dims{m, options.hidden, options.embed_dim};
  const std::array<nn::Activation, 2> acts{nn::Activation::relu, nn::Activation::identity};
  return nn::make_mlp(dims, acts, rng);
}

}  // namespace

void RunningStd::observe(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

RunningStd RunningStd::restore(std::size_t count, double mean, double m2) {
  RunningStd r;
  r.count_ = count;
  r.mean_ = mean;
  r.m2_ = m2;
  return r;
}

double RunningStd::stddev() const {
  if (count_ < 2) return 0.0;
  return std::sqrt(m2_ / static_cast<double>(count_));
}

RndPair::RndPair(std::size_t m, RndOptions options, Rng& rng)
    : options_(options), target_(make_rnd_net(m, options, rng)), predictor_(make_rnd_net(m, options, rng)),
      optimizer_(nn::OptimizerState::adam(options.learning_rate)) {}

RndPair::RndPair(nn::MlpParams target, nn::MlpParams predictor, RndOptions options)
    : options_(options), target_(std::move(target)), predictor_(std::move(predictor)),
      optimizer_(nn::OptimizerState::adam(options.learning_rate)) {
  nn::validate(target_);
  nn::validate(predictor_);
  if (target_.input_dim() != predictor_.input_dim() || target_.output_dim() != predictor_.output_dim())
    throw ShapeError("RndPair: target and predictor disagree on input or output width");
}

void RndPair::check_scheme(const ConnectionScheme& scheme) const {
  if (scheme.size() != target_.input_dim())
    throw ShapeError("RndPair: scheme has " + std::to_string(scheme.size()) + " bits, networks read " +
                     std::to_string(target_.input_dim()));
}

double RndPair::bonus(const ConnectionScheme& scheme) const {
  check_scheme(scheme);
  const auto x = scheme.as_input();
  const auto t = nn::mlp_forward(target_, x);
  const auto p = nn::mlp_forward(predictor_, x);
  double total = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double d = t[k] - p[k];
    total += d * d;
  }
  return total;
}

nn::GradientBundle RndPair::predictor_gradient(const ConnectionScheme& scheme) const {
  check_scheme(scheme);
  const auto x = scheme.as_input();
  const auto t = nn::mlp_forward(target_, x);
  const auto p = nn::mlp_forward(predictor_, x);
  std::vector<double> upstream(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) upstream[k] = 2.0 * (p[k] - t[k]);
  return nn::mlp_backward(predictor_, x, upstream);
}

void RndPair::train(const ConnectionScheme& scheme) {
  const auto g = predictor_gradient(scheme);
  nn::optimizer_step(predictor_, g, optimizer_, nn::Direction::descend);
}

double RndPair::reward_bonus(const ConnectionScheme& scheme) {
  const double raw = bonus(scheme);
  running_.observe(raw);
  if (!options_.normalize) return raw;
  const double sd = running_.stddev();
  return sd > 0.0 ? raw / sd : raw;
}

}  // namespace ean
