#include "ean/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "ean/checkpoint.hpp"
#include "ean/errors.hpp"

namespace ean {

namespace {

enum Stream : std::uint64_t { kInit = 1, kSample = 2, kReplay = 3 };

}  // namespace

nlohmann::json to_json(const SearchConfig& c) {
  return {{"search_steps", c.search_steps},
          {"ppo_start", c.ppo_start},
          {"learning_rate", c.learning_rate},
          {"lambda1", c.weights.lambda1},
          {"lambda2", c.weights.lambda2},
          {"lambda3", c.weights.lambda3},
          {"replay_capacity", c.replay_capacity},
          {"replay_sample", c.replay_sample},
          {"seed", c.seed},
          {"controller_input", c.controller.input_dim},
          {"controller_hidden", c.controller.hidden},
          {"ppo_clip", c.controller.ppo_clip},
          {"ppo_clip_epsilon", c.controller.clip_epsilon},
          {"rnd_hidden", c.rnd.hidden},
          {"rnd_embed", c.rnd.embed_dim},
          {"rnd_learning_rate", c.rnd.learning_rate},
          {"rnd_normalize", c.rnd.normalize}};
}

namespace {

SearchConfig config_from_json(const nlohmann::json& j) {
  SearchConfig c;
  c.search_steps = j.at("search_steps");
  c.ppo_start = j.at("ppo_start");
  c.learning_rate = j.at("learning_rate");
  c.weights = {j.at("lambda1"), j.at("lambda2"), j.at("lambda3")};
  c.replay_capacity = j.at("replay_capacity");
  c.replay_sample = j.at("replay_sample");
  c.seed = j.at("seed");
  c.controller.input_dim = j.at("controller_input");
  c.controller.hidden = j.at("controller_hidden");
  c.controller.learning_rate = c.learning_rate;
  c.controller.ppo_clip = j.at("ppo_clip");
  c.controller.clip_epsilon = j.at("ppo_clip_epsilon");
  c.rnd.hidden = j.at("rnd_hidden");
  c.rnd.embed_dim = j.at("rnd_embed");
  c.rnd.learning_rate = j.at("rnd_learning_rate");
  c.rnd.normalize = j.at("rnd_normalize");
  return c;
}

ControllerOptions controller_options(const SearchConfig& c) {
  ControllerOptions o = c.controller;
  o.learning_rate = c.learning_rate;
  return o;
}

nlohmann::json record_to_state(const TrajectoryRecord& r) {
  return {{"probs_old", r.probs_old.probs}, {"scheme", encode(r.scheme)}, {"reward", r.reward}, {"iteration", r.iteration}};
}

TrajectoryRecord record_from_state(const nlohmann::json& j) {
  return {SchemeProbability{j.at("probs_old").get<std::vector<double>>()}, decode(j.at("scheme").get<std::string>()),
          j.at("reward").get<double>(), j.at("iteration").get<std::size_t>()};
}

nlohmann::json iteration_to_state(const IterationRecord& r) {
  nlohmann::json j = to_json(r);
  j["true_reward"] = r.true_reward;
  j["ppo_applied"] = r.ppo_applied;
  return j;
}

IterationRecord iteration_from_state(const nlohmann::json& j) {
  IterationRecord r;
  r.iter = j.at("iter");
  r.scheme = decode(j.at("scheme").get<std::string>());
  r.probs = j.at("probs").get<std::vector<double>>();
  r.reward = {j.at("g_spa"), j.at("g_val"), j.at("g_rnd"), j.at("G")};
  r.pbar = j.at("pbar");
  r.true_reward = j.at("true_reward");
  r.ppo_applied = j.at("ppo_applied");
  return r;
}

}  // namespace

void SearchConfig::validate() const {
  weights.validate();
  if (ppo_start < 1) throw ConfigError("ppo_start", "must be at least 1");
  if (search_steps > 0 && ppo_start > search_steps)
    throw ConfigError("ppo_start", "must not exceed search_steps");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate", "must be positive and finite");
  if (replay_capacity == 0) throw ConfigError("replay_capacity", "must be positive");
  if (replay_sample == 0) throw ConfigError("replay_sample", "must be positive");
  if (controller.input_dim == 0 || controller.hidden == 0)
    throw ConfigError("controller_hidden", "controller widths must be positive");
  if (rnd.hidden == 0 || rnd.embed_dim == 0) throw ConfigError("rnd_hidden", "curiosity widths must be positive");
  if (!(rnd.learning_rate > 0.0)) throw ConfigError("rnd_learning_rate", "must be positive");
}

nlohmann::json to_json(const IterationRecord& rec) {
  return {{"iter", rec.iter},       {"scheme", encode(rec.scheme)}, {"probs", rec.probs},
          {"g_spa", rec.reward.g_spa}, {"g_val", rec.reward.g_val},  {"g_rnd", rec.reward.g_rnd},
          {"G", rec.reward.total},  {"pbar", rec.pbar}};
}

SearchLoop::SearchLoop(const SearchConfig& config, std::size_t m)
    : config_((config.validate(), config)),
      m_(m),
      init_rng_(Rng::derive(config.seed, kInit)),
      controller_(m, controller_options(config), init_rng_),
      rnd_(m, config.rnd, init_rng_),
      buffer_(config.replay_capacity),
      sample_rng_(Rng::derive(config.seed, kSample)),
      replay_rng_(Rng::derive(config.seed, kReplay)) {
  run_.extracted = controller_.extract_scheme();
}

const IterationRecord& SearchLoop::step(Evaluator& env) {
  if (finished()) throw Error("SearchLoop::step: all iterations already ran");
  const std::size_t t = run_.completed + 1;

  const SchemeProbability probs = controller_.probs();
  Rng sampler = sample_rng_;
  const ConnectionScheme scheme = sample_from_probs(probs, sampler);
  if (scheme.size() != m_) throw ShapeError("SearchLoop: controller width changed");
  const double g_spa = sparsity_reward(scheme);
  const double g_val = env.evaluate(scheme);
  const double g_true = env.noisy() ? env.true_value(scheme) : g_val;
  if (!std::isfinite(g_val) || g_val < 0.0 || g_val > 1.0)
    throw NumericError("evaluator returned g_val outside [0, 1]: " + std::to_string(g_val));
  // Everything below mutates state; nothing after this point calls the evaluator.
  sample_rng_ = sampler;

  const double g_rnd = rnd_.reward_bonus(scheme);
  const RewardBreakdown reward = combine_reward(config_.weights, g_spa, g_val, g_rnd);

  controller_.reinforce_update(scheme, reward.total);
  rnd_.train(scheme);
  buffer_.put(TrajectoryRecord{probs, scheme, reward.total, t});

  bool ppo = false;
  if (t >= config_.ppo_start) {
    const auto batch = buffer_.sample(config_.replay_sample, replay_rng_);
    ppo = controller_.ppo_update(batch) == UpdateStatus::applied;
  }

  IterationRecord rec;
  rec.iter = t;
  rec.scheme = scheme;
  rec.probs = probs.probs;
  rec.reward = reward;
  rec.pbar = convergence_pbar(probs, scheme);
  rec.true_reward = true_reward(config_.weights, scheme, g_true);
  rec.ppo_applied = ppo;

  if (!run_.best_scheme || rec.true_reward > run_.best_reward) {
    run_.best_scheme = scheme;
    run_.best_reward = rec.true_reward;
  }
  run_.best_trace.push_back(run_.best_reward);
  run_.pbar_trace.push_back(rec.pbar);
  run_.completed = t;
  run_.extracted = controller_.extract_scheme();
  run_.log.push_back(std::move(rec));
  return run_.log.back();
}

SearchRun SearchLoop::result() const {
  SearchRun r = run_;
  r.extracted = controller_.extract_scheme();
  return r;
}

nlohmann::json SearchLoop::save_state() const {
  nlohmann::json buffer = nlohmann::json::array();
  for (const auto& r : buffer_.records()) buffer.push_back(record_to_state(r));
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : run_.log) log.push_back(iteration_to_state(r));
  nlohmann::json j{{"format", "ean-search-state"},
                   {"version", 1},
                   {"m", m_},
                   {"config", to_json(config_)},
                   {"controller", to_json(controller_.net())},
                   {"controller_optimizer", to_json(controller_.optimizer())},
                   {"rnd_target", to_json(rnd_.target())},
                   {"rnd_predictor", to_json(rnd_.predictor())},
                   {"rnd_optimizer", to_json(rnd_.predictor_optimizer())},
                   {"rnd_running",
                    {{"count", rnd_.running().count()}, {"mean", rnd_.running().mean()}, {"m2", rnd_.running().m2()}}},
                   {"buffer", buffer},
                   {"sample_rng", sample_rng_.state()},
                   {"replay_rng", replay_rng_.state()},
                   {"log", log},
                   {"completed", run_.completed}};
  return j;
}

SearchLoop SearchLoop::restore_state(const nlohmann::json& j) {
  if (j.value("format", "") != "ean-search-state") throw Error("restore_state: not a search state document");
  const SearchConfig config = config_from_json(j.at("config"));
  SearchLoop loop(config, j.at("m").get<std::size_t>());
  loop.controller_ = Controller(mlp_from_json(j.at("controller")), controller_options(config));
  loop.controller_.optimizer() = optimizer_from_json(j.at("controller_optimizer"));
  loop.rnd_ = RndPair(mlp_from_json(j.at("rnd_target")), mlp_from_json(j.at("rnd_predictor")), config.rnd);
  loop.rnd_.predictor_optimizer() = optimizer_from_json(j.at("rnd_optimizer"));
  const auto& running = j.at("rnd_running");
  loop.rnd_.running() = RunningStd::restore(running.at("count"), running.at("mean"), running.at("m2"));
  for (const auto& r : j.at("buffer")) loop.buffer_.put(record_from_state(r));
  loop.sample_rng_.restore(j.at("sample_rng").get<std::string>());
  loop.replay_rng_.restore(j.at("replay_rng").get<std::string>());
  for (const auto& r : j.at("log")) {
    IterationRecord rec = iteration_from_state(r);
    if (!loop.run_.best_scheme || rec.true_reward > loop.run_.best_reward) {
      loop.run_.best_scheme = rec.scheme;
      loop.run_.best_reward = rec.true_reward;
    }
    loop.run_.best_trace.push_back(loop.run_.best_reward);
    loop.run_.pbar_trace.push_back(rec.pbar);
    loop.run_.log.push_back(std::move(rec));
  }
  loop.run_.completed = j.at("completed");
  loop.run_.extracted = loop.controller_.extract_scheme();
  return loop;
}

SearchRun run_search(const SearchConfig& config, std::size_t m, Evaluator& env, const IterationSink& sink) {
  SearchLoop loop(config, m);
  return run_search(loop, env, sink);
}

SearchRun run_search(SearchLoop& loop, Evaluator& env, const IterationSink& sink) {
  while (!loop.finished()) {
    try {
      const auto& rec = loop.step(env);
      if (sink) sink(rec);
    } catch (const TransportError& e) {
      throw SearchAborted(std::string("search aborted: ") + e.what(), loop.result(), loop.save_state());
    } catch (const ProtocolError& e) {
      throw SearchAborted(std::string("search aborted: ") + e.what(), loop.result(), loop.save_state());
    }
  }
  return loop.result();
}

// ---------------------------------------------------------------------------

std::vector<RankedScheme> brute_force(std::size_t m, const RewardWeights& weights, const ValueOracle& oracle,
                                      std::size_t workers) {
  if (m == 0) throw ConfigError("m", "must be positive");
  if (m > kBruteForceMaxBits)
    throw ConfigError("m", "brute force is limited to " + std::to_string(kBruteForceMaxBits) + " bits");
  const std::uint64_t count = std::uint64_t{1} << m;
  std::vector<RankedScheme> out(count);
  auto score_range = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t code = begin; code < end; ++code) {
      const ConnectionScheme s = ConnectionScheme::from_code(code, m);
      RankedScheme& r = out[code];
      r.code = code;
      r.g_spa = sparsity_reward(s);
      r.g_val = oracle(s);
      r.total = combine_reward(weights, r.g_spa, r.g_val, 0.0).total;
    }
  };
  workers = std::max<std::size_t>(1, std::min<std::uint64_t>(workers, count));
  if (workers == 1) {
    score_range(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::uint64_t begin = w * chunk;
      const std::uint64_t end = std::min(count, begin + chunk);
      if (begin < end) pool.emplace_back(score_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  std::sort(out.begin(), out.end(), [](const RankedScheme& a, const RankedScheme& b) {
    if (a.total != b.total) return a.total > b.total;
    return a.code < b.code;
  });
  return out;
}

std::size_t rank_of(std::span<const RankedScheme> ranking, double total) {
  std::size_t better = 0;
  for (const auto& r : ranking) {
    if (r.total > total)
      ++better;
    else
      break;
  }
  return better + 1;
}

RandomBaseline baseline_random(std::size_t m, const RewardWeights& weights, const ValueOracle& oracle, std::size_t n,
                               Rng& rng) {
  if (n == 0) throw ConfigError("draws", "must be at least 1");
  RandomBaseline out;
  for (std::size_t k = 0; k < n; ++k) {
    ConnectionScheme s = sample_bernoulli(m, 0.5, rng);
    const double g = oracle(s);
    const double total = true_reward(weights, s, g);
    if (k == 0 || total > out.totals[out.best_index]) out.best_index = k;
    out.schemes.push_back(std::move(s));
    out.g_val.push_back(g);
    out.totals.push_back(total);
  }
  return out;
}

ConnectionScheme baseline_hsp(std::size_t m, std::size_t period, std::size_t offset) {
  if (m == 0) throw ConfigError("m", "must be positive");
  if (period < 1 || period > m) throw ConfigError("period", "must lie in [1, m]");
  if (offset >= period) throw ConfigError("offset", "must be smaller than the period");
  std::vector<std::uint8_t> bits(m);
  for (std::size_t i = 0; i < m; ++i) bits[i] = (i % period == offset) ? 1 : 0;
  return ConnectionScheme(std::move(bits));
}

// ---------------------------------------------------------------------------

double mean(std::span<const double> x) {
  if (x.empty()) throw NumericError("mean of an empty series");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: series lengths differ");
  if (x.size() < 2) throw NumericError("pearson: need at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: correlation undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

TTestResult welch_t_test_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw NumericError("t-test: need at least two samples per group");
  auto variance = [](std::span<const double> x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
  };
  const double ma = mean(a), mb = mean(b);
  const double va = variance(a, ma) / static_cast<double>(a.size());
  const double vb = variance(b, mb) / static_cast<double>(b.size());
  TTestResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    r.t = ma > mb ? INFINITY : (ma < mb ? -INFINITY : 0.0);
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_value = ma > mb ? 0.0 : (ma < mb ? 1.0 : 0.5);
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  const double na1 = static_cast<double>(a.size() - 1);
  const double nb1 = static_cast<double>(b.size() - 1);
  r.dof = se2 * se2 / (va * va / na1 + vb * vb / nb1);
  boost::math::students_t dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

std::optional<std::size_t> first_iteration_above(std::span<const double> pbar_trace, double threshold) {
  for (std::size_t i = 0; i < pbar_trace.size(); ++i)
    if (pbar_trace[i] > threshold) return i + 1;
  return std::nullopt;
}

}  // namespace ean
