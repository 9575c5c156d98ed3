#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ean/environment.hpp"
#include "ean/errors.hpp"
#include "ean/search.hpp"

using namespace ean;

namespace {

SearchConfig short_config(std::uint64_t seed, std::size_t steps = 200) {
  SearchConfig c;
  c.search_steps = steps;
  c.ppo_start = std::min<std::size_t>(50, std::max<std::size_t>(steps, 1));
  c.seed = seed;
  return c;
}

// Evaluator whose every call is counted and which can fail on demand.
class CountingEvaluator final : public Evaluator {
 public:
  explicit CountingEvaluator(PlantedEnv env) : env_(std::move(env)) {}
  double evaluate(const ConnectionScheme& a) override {
    if (fail_at_ && calls_ + 1 == fail_at_) {
      fail_at_ = 0;
      throw TransportError("injected failure");
    }
    ++calls_;
    return planted_eval(env_, a);
  }
  std::string describe() const override { return "counting"; }
  std::size_t calls_ = 0;
  std::size_t fail_at_ = 0;

 private:
  PlantedEnv env_;
};

}  // namespace

TEST_CASE("sparsity-only reward drives every seed to the all-zero scheme") {
  const auto env = make_planted(0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // At the default step size the no-baseline gradient keeps single bits
    // wandering past 0.5 now and then; a smaller step settles them.
    auto c = short_config(seed, 5000);
    c.ppo_start = 200;
    c.learning_rate = 0.002;
    c.weights = {1.0, 0.0, 0.0};
    PlantedEvaluator ev(env, seed, false);
    const auto run = run_search(c, 18, ev);
    CHECK(encode(run.extracted) == std::string(18, '0'));
  }
}

TEST_CASE("zero search steps") {
  auto c = short_config(0, 0);
  c.ppo_start = 1;
  PlantedEvaluator ev(make_planted(0), 0, false);
  const auto run = run_search(c, 18, ev);
  CHECK(run.log.empty());
  CHECK(run.completed == 0);
  CHECK_FALSE(run.best_scheme.has_value());
  CHECK(run.extracted == ConnectionScheme::zeros(18));
}

TEST_CASE("configuration validation") {
  CHECK_NOTHROW(SearchConfig{}.validate());
  auto c = SearchConfig{};
  c.ppo_start = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SearchConfig{};
  c.ppo_start = 3000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SearchConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SearchConfig{};
  c.replay_sample = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SearchConfig{};
  c.weights = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("the log agrees with the oracle and the controller step order") {
  const auto env = make_planted(2);
  CountingEvaluator ev(env);
  auto c = short_config(4, 120);
  c.ppo_start = 60;
  const auto run = run_search(c, 18, ev);
  REQUIRE(run.log.size() == 120);
  CHECK(ev.calls_ == 120);
  double best = -1e300;
  for (std::size_t t = 0; t < run.log.size(); ++t) {
    const auto& r = run.log[t];
    CHECK(r.iter == t + 1);
    CHECK(r.reward.g_val == planted_eval(env, r.scheme));
    CHECK(r.reward.g_spa == sparsity_reward(r.scheme));
    CHECK(r.reward.g_rnd >= 0.0);
    CHECK(std::abs(r.reward.total - (0.5 * r.reward.g_spa + r.reward.g_val + 0.1 * r.reward.g_rnd)) <= 1e-12);
    CHECK(r.true_reward == true_reward(c.weights, r.scheme, planted_eval(env, r.scheme)));
    CHECK(r.ppo_applied == (r.iter >= 60));
    double pbar = 0.0;
    for (std::size_t i = 0; i < 18; ++i) pbar += (r.scheme[i] ? r.probs[i] : 1.0 - r.probs[i]) / 18.0;
    CHECK(std::abs(r.pbar - pbar) <= 1e-12);
    best = std::max(best, r.true_reward);
    CHECK(run.best_trace[t] == best);
    if (t > 0) CHECK(run.best_trace[t] >= run.best_trace[t - 1]);
  }
  CHECK(run.log.front().probs == std::vector<double>(18, 0.5));
  CHECK(run.best_reward == best);
}

TEST_CASE("runs are reproducible and seeds are isolated") {
  const auto env = make_planted(1);
  auto run_with = [&](std::uint64_t seed) {
    PlantedEvaluator ev(env, seed, true);
    return run_search(short_config(seed), 18, ev);
  };
  const auto a = run_with(7), b = run_with(7), c = run_with(8);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t t = 0; t < a.log.size(); ++t) {
    CHECK(a.log[t].scheme == b.log[t].scheme);
    CHECK(a.log[t].reward.total == b.log[t].reward.total);
  }
  bool differs = false;
  for (std::size_t t = 0; t < a.log.size(); ++t) differs = differs || !(a.log[t].scheme == c.log[t].scheme);
  CHECK(differs);
}

TEST_CASE("a failed evaluation aborts cleanly and the saved state resumes the same run") {
  const auto env = make_planted(3);
  auto c = short_config(5, 150);
  c.ppo_start = 40;
  CountingEvaluator straight(env);
  const auto reference = run_search(c, 18, straight);

  CountingEvaluator flaky(env);
  flaky.fail_at_ = 90;
  nlohmann::json state;
  try {
    run_search(c, 18, flaky);
    FAIL("no abort");
  } catch (const SearchAborted& e) {
    CHECK(e.partial().completed == 89);
    state = e.state();
  }
  // Through text, as the CLI stores it.
  auto loop = SearchLoop::restore_state(nlohmann::json::parse(state.dump()));
  CHECK(loop.iteration() == 89);
  const auto resumed = run_search(loop, flaky);
  REQUIRE(resumed.log.size() == reference.log.size());
  for (std::size_t t = 0; t < reference.log.size(); ++t) {
    CHECK(resumed.log[t].scheme == reference.log[t].scheme);
    CHECK(resumed.log[t].reward.total == reference.log[t].reward.total);
    CHECK(resumed.log[t].probs == reference.log[t].probs);
  }
  CHECK(resumed.extracted == reference.extracted);
}

TEST_CASE("brute force orders and covers every scheme") {
  const RewardWeights w{0.5, 1.0, 0.0};
  const auto ranking = brute_force(2, w, [](const ConnectionScheme& a) { return a[0] ? 0.3 : 0.1; });
  REQUIRE(ranking.size() == 4);
  // 10: 0.25 + 0.3, 00: 0.5 + 0.1, 11: 0 + 0.3, 01: 0.25 + 0.1
  CHECK(encode(ranking[0].scheme(2)) == "00");
  CHECK(encode(ranking[1].scheme(2)) == "10");
  CHECK(encode(ranking[2].scheme(2)) == "01");
  CHECK(encode(ranking[3].scheme(2)) == "11");
  CHECK(ranking[0].total == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(rank_of(ranking, 0.6) == 1);
  CHECK(rank_of(ranking, 0.55) == 2);
  CHECK(rank_of(ranking, 0.0) == 5);
  CHECK_THROWS_AS(brute_force(kBruteForceMaxBits + 1, w, [](const ConnectionScheme&) { return 0.0; }), ConfigError);
}

TEST_CASE("brute force ties go to the smaller scheme string") {
  const auto ranking = brute_force(3, {0.0, 1.0, 0.0}, [](const ConnectionScheme&) { return 0.5; });
  for (std::size_t i = 0; i < ranking.size(); ++i) CHECK(ranking[i].code == i);
}

TEST_CASE("m=4 brute force agrees with a direct enumeration, serial and parallel") {
  PlantedOptions o;
  o.m = 4;
  o.interactions = 2;
  const RewardWeights w{0.5, 1.0, 0.1};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto env = make_planted(seed, o);
    const ValueOracle oracle = [&](const ConnectionScheme& a) { return planted_eval(env, a); };
    std::vector<std::pair<double, std::string>> expect;
    for (std::uint64_t c = 0; c < 16; ++c) {
      std::string s;
      int ones = 0;
      for (int i = 3; i >= 0; --i) {
        s.push_back(((c >> i) & 1U) ? '1' : '0');
        ones += (c >> i) & 1U;
      }
      const auto a = decode(s);
      expect.emplace_back(-(0.5 * (1.0 - ones / 4.0) + planted_eval(env, a)), s);
    }
    std::sort(expect.begin(), expect.end());
    const auto serial = brute_force(4, w, oracle);
    const auto parallel = brute_force(4, w, oracle, 3);
    REQUIRE(serial.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(encode(serial[i].scheme(4)) == expect[i].second);
      CHECK(serial[i].code == parallel[i].code);
      CHECK(serial[i].total == parallel[i].total);
    }
  }
}

TEST_CASE("heuristic spacing patterns") {
  CHECK(encode(baseline_hsp(6, 2, 0)) == "101010");
  CHECK(encode(baseline_hsp(6, 2, 1)) == "010101");
  CHECK(encode(baseline_hsp(6, 3, 0)) == "100100");
  CHECK(encode(baseline_hsp(18, 3, 0)) == "100100100100100100");
  CHECK(encode(baseline_hsp(4, 1, 0)) == "1111");
  CHECK_THROWS(baseline_hsp(6, 0, 0));
  CHECK_THROWS(baseline_hsp(6, 2, 2));
}

TEST_CASE("random baseline") {
  const auto env = make_planted(0);
  const ValueOracle oracle = [&](const ConnectionScheme& a) { return planted_eval(env, a); };
  const RewardWeights w{};
  Rng one(1);
  const auto single = baseline_random(18, w, oracle, 1, one);
  REQUIRE(single.schemes.size() == 1);
  CHECK(single.best_index == 0);
  CHECK(single.totals[0] == true_reward(w, single.schemes[0], planted_eval(env, single.schemes[0])));

  Rng a(2), b(2);
  const auto x = baseline_random(18, w, oracle, 100, a), y = baseline_random(18, w, oracle, 100, b);
  CHECK(x.schemes == y.schemes);
  CHECK(x.totals == y.totals);
  CHECK(x.totals[x.best_index] == *std::max_element(x.totals.begin(), x.totals.end()));
  for (std::size_t i = 0; i < x.schemes.size(); ++i) CHECK(x.g_val[i] == planted_eval(env, x.schemes[i]));
  CHECK_THROWS(baseline_random(18, w, oracle, 0, a));
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 6, 8, 10};
  const std::vector<double> down{5, 4, 3, 2, 1};
  CHECK(pearson(x, up) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, down) == doctest::Approx(-1.0).epsilon(1e-15));
  // Hand value: cov = 2, var_x = 2, var_y = 2.8
  const std::vector<double> y{1, 3, 2, 5, 4};
  CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-14));
  const std::vector<double> flat{3, 3, 3, 3, 3};
  CHECK_THROWS_AS(pearson(x, flat), NumericError);
  CHECK_THROWS(pearson(x, std::vector<double>{1, 2}));
}

TEST_CASE("welch one-sided test against tabulated values") {
  const std::vector<double> a{5.1, 4.9, 6.2, 5.8, 6.0, 5.5, 5.3};
  const std::vector<double> b{4.1, 4.5, 4.8, 5.0, 4.2};
  const auto r = welch_t_test_greater(a, b);
  CHECK(r.t == doctest::Approx(4.101642380040399).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.00111949521369876).epsilon(1e-8));
  const std::vector<double> c{1, 2, 3, 4};
  const std::vector<double> d{1.5, 2.5, 3.5, 4.5, 2.0};
  const auto s = welch_t_test_greater(c, d);
  CHECK(s.t == doctest::Approx(-0.35687321357316465).epsilon(1e-12));
  CHECK(s.p_value == doctest::Approx(0.6336077719698381).epsilon(1e-8));

  // Degrees of freedom from the Welch-Satterthwaite formula.
  auto var_over_n = [](const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x / v.size();
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1) / v.size();
  };
  const double va = var_over_n(a), vb = var_over_n(b);
  CHECK(r.dof == doctest::Approx((va + vb) * (va + vb) / (va * va / 6.0 + vb * vb / 4.0)).epsilon(1e-12));
}

TEST_CASE("first_iteration_above") {
  const std::vector<double> trace{0.5, 0.7, 0.96, 0.94, 0.99};
  CHECK(first_iteration_above(trace, 0.95) == 3u);
  CHECK_FALSE(first_iteration_above(trace, 0.995).has_value());
  CHECK(mean(trace) == doctest::Approx(0.818).epsilon(1e-14));
}

TEST_CASE("a converged planted run extracts the brute-force argmax") {
  PlantedOptions o;
  o.m = 8;
  std::size_t converged = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto env = make_planted(seed, o);
    auto c = short_config(seed, 20000);
    c.ppo_start = 200;
    // Same small step as above: at 0.005 one seed locks in a neighbour of the
    // optimum 0.005 below it in G, inside the evaluator noise.
    c.learning_rate = 0.002;
    PlantedEvaluator ev(env, seed);
    const auto run = run_search(c, o.m, ev);
    if (!(run.pbar_trace.back() > 0.9)) continue;
    ++converged;
    const auto ranking = brute_force(o.m, c.weights, [&](const ConnectionScheme& a) { return planted_eval(env, a); });
    CHECK(run.extracted == ranking.front().scheme(o.m));
  }
  CHECK(converged >= 8);
}
