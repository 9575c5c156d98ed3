#include "ean/environment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "ean/errors.hpp"

namespace ean {

void RewardWeights::validate() const {
  const double w[3] = {lambda1, lambda2, lambda3};
  const char* names[3] = {"lambda1", "lambda2", "lambda3"};
  bool any_positive = false;
  for (int k = 0; k < 3; ++k) {
    if (!std::isfinite(w[k]) || w[k] < 0.0) throw ConfigError(names[k], "must be finite and non-negative");
    any_positive = any_positive || w[k] > 0.0;
  }
  if (!any_positive) throw ConfigError("lambda1", "at least one reward weight must be positive");
}

RewardBreakdown combine_reward(const RewardWeights& w, double g_spa, double g_val, double g_rnd) {
  if (!std::isfinite(g_spa) || !std::isfinite(g_val) || !std::isfinite(g_rnd))
    throw NumericError("combine_reward: non-finite reward component");
  RewardBreakdown r{g_spa, g_val, g_rnd, 0.0};
  r.total = w.lambda1 * g_spa + w.lambda2 * g_val + w.lambda3 * g_rnd;
  return r;
}

double true_reward(const RewardWeights& w, const ConnectionScheme& scheme, double g_val) {
  return combine_reward(w, sparsity_reward(scheme), g_val, 0.0).total;
}

PlantedEnv make_planted(std::uint64_t seed, const PlantedOptions& options) {
  if (options.m == 0) throw ConfigError("planted_m", "must be positive");
  const std::size_t pairs = options.m * (options.m - 1) / 2;
  if (options.interactions > pairs) throw ConfigError("planted_interactions", "more interactions than block pairs");
  if (!(options.noise >= 0.0)) throw ConfigError("planted_noise", "must be non-negative");

  Rng rng = Rng::derive(seed, 0x706c616e74ULL);
  PlantedEnv env;
  env.m = options.m;
  env.noise = options.noise;
  env.base = options.base;
  env.seed = seed;
  const double scale = options.utility_scale / static_cast<double>(options.m);
  env.utilities.resize(options.m);
  for (auto& u : env.utilities) u = scale * rng.uniform(options.utility_low, options.utility_high);

  std::set<std::pair<std::size_t, std::size_t>> chosen;
  while (chosen.size() < options.interactions) {
    std::size_t i = rng.index(options.m);
    std::size_t j = rng.index(options.m);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    chosen.emplace(i, j);
  }
  const double jscale = options.interaction_scale / static_cast<double>(options.m);
  for (const auto& [i, j] : chosen) env.interactions.push_back({i, j, jscale * rng.uniform(-1.0, 1.0)});
  return env;
}

namespace {

// Fixed summation order: base, utilities by index, interactions by (i, j).
double unclamped_value(const PlantedEnv& env, const ConnectionScheme& scheme) {
  if (scheme.size() != env.m)
    throw ShapeError("planted_eval: scheme has " + std::to_string(scheme.size()) + " bits, environment " +
                     std::to_string(env.m));
  double v = env.base;
  for (std::size_t i = 0; i < env.m; ++i)
    if (scheme[i]) v += env.utilities[i];
  for (const auto& p : env.interactions)
    if (scheme[p.i] && scheme[p.j]) v += p.value;
  return v;
}

}  // namespace

double planted_eval(const PlantedEnv& env, const ConnectionScheme& scheme) {
  return std::clamp(unclamped_value(env, scheme), 0.0, 1.0);
}

double planted_eval(const PlantedEnv& env, const ConnectionScheme& scheme, bool noisy, Rng& rng) {
  if (!noisy || env.noise == 0.0) return planted_eval(env, scheme);
  return std::clamp(unclamped_value(env, scheme) + env.noise * rng.normal(), 0.0, 1.0);
}

PlantedEvaluator::PlantedEvaluator(PlantedEnv env, std::uint64_t noise_seed, bool noisy)
    : env_(std::move(env)), rng_(Rng::derive(noise_seed, 0x6e6f697365ULL)), noisy_(noisy) {}

double PlantedEvaluator::evaluate(const ConnectionScheme& scheme) { return planted_eval(env_, scheme, noisy_, rng_); }

std::string PlantedEvaluator::describe() const {
  return "planted(m=" + std::to_string(env_.m) + ", seed=" + std::to_string(env_.seed) + ")";
}

}  // namespace ean
