#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ean/environment.hpp"
#include "ean/errors.hpp"

using namespace ean;

namespace {

PlantedEnv hand_env(std::vector<double> u, double base) {
  PlantedEnv env;
  env.m = u.size();
  env.utilities = std::move(u);
  env.base = base;
  return env;
}

}  // namespace

TEST_CASE("combine_reward") {
  const auto r = combine_reward({1.0, 1.0, 1.0}, 0.5, 0.76, 0.1);
  CHECK(std::abs(r.total - 1.36) <= 1e-12);
  CHECK(r.g_spa == 0.5);
  CHECK(r.g_val == 0.76);
  CHECK(r.g_rnd == 0.1);
  CHECK(combine_reward({0.0, 1.0, 0.0}, 0.3, 0.42, 7.0).total == 0.42);
  CHECK(combine_reward({1.0, 0.0, 0.0}, sparsity_reward(ConnectionScheme::zeros(9)), 0.2, 3.0).total == 1.0);
  CHECK_THROWS_AS(combine_reward({1.0, 1.0, 1.0}, 0.5, std::nan(""), 0.0), NumericError);
  CHECK_THROWS_AS(combine_reward({1.0, 1.0, 1.0}, INFINITY, 0.5, 0.0), NumericError);
}

TEST_CASE("combine_reward is linear in its inputs") {
  const RewardWeights w{0.5, 1.0, 0.1};
  for (double k : {0.5, 2.0, 4.0}) {
    const auto a = combine_reward(w, 0.25, 0.5, 0.125);
    const auto b = combine_reward(w, 0.25 * k, 0.5 * k, 0.125 * k);
    CHECK(b.total == doctest::Approx(k * a.total).epsilon(1e-15));
  }
}

TEST_CASE("true_reward leaves out curiosity") {
  const RewardWeights w{0.5, 1.0, 0.1};
  const auto a = decode("110000");
  CHECK(true_reward(w, a, 0.6) == 0.5 * (1.0 - 2.0 / 6.0) + 0.6);
}

TEST_CASE("reward weights validation") {
  CHECK_NOTHROW(RewardWeights{}.validate());
  CHECK_THROWS_AS((RewardWeights{-0.1, 1.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((RewardWeights{0.0, 0.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((RewardWeights{0.0, NAN, 0.0}.validate()), ConfigError);
}

TEST_CASE("planted_eval hand cases") {
  const auto flat = hand_env(std::vector<double>(5, 0.0), 0.6);
  for (std::uint64_t c = 0; c < 32; ++c) CHECK(planted_eval(flat, ConnectionScheme::from_code(c, 5)) == 0.6);
  const auto two = hand_env({0.2, -0.1}, 0.5);
  CHECK(std::abs(planted_eval(two, decode("10")) - 0.7) <= 1e-12);
  CHECK(std::abs(planted_eval(two, decode("01")) - 0.4) <= 1e-12);
  CHECK_THROWS_AS(planted_eval(two, decode("101")), ShapeError);
}

TEST_CASE("planted_eval clamps to [0, 1] and applies interactions") {
  auto env = hand_env({0.4, 0.4, -0.1}, 0.5);
  CHECK(planted_eval(env, decode("110")) == 1.0);
  env.interactions.push_back({0, 2, 0.3});
  env.base = 0.2;
  CHECK(std::abs(planted_eval(env, decode("101")) - (0.2 + 0.4 - 0.1 + 0.3)) <= 1e-12);
  CHECK(planted_eval(env, decode("111")) == 1.0);
  env.base = -2.0;
  CHECK(planted_eval(env, decode("000")) == 0.0);
}

TEST_CASE("make_planted follows its options") {
  const auto env = make_planted(3);
  CHECK(env.m == 18);
  CHECK(env.utilities.size() == 18);
  CHECK(env.interactions.size() == 4);
  CHECK(env.base == 0.35);
  CHECK(env.noise == 0.01);
  for (double u : env.utilities) CHECK(std::abs(u) <= 1.5 / 18.0);
  for (std::size_t k = 0; k < env.interactions.size(); ++k) {
    const auto& p = env.interactions[k];
    CHECK(p.i < p.j);
    CHECK(p.j < 18);
    CHECK(std::abs(p.value) <= 1.0 / 18.0);
    if (k > 0) {
      const auto& q = env.interactions[k - 1];
      CHECK((q.i < p.i || (q.i == p.i && q.j < p.j)));
    }
  }
  PlantedOptions too_many;
  too_many.m = 3;
  too_many.interactions = 4;
  CHECK_THROWS_AS(make_planted(0, too_many), ConfigError);
}

TEST_CASE("planted landscape is reproducible from its seed") {
  const auto a = make_planted(11), b = make_planted(11), c = make_planted(12);
  CHECK(a.utilities == b.utilities);
  CHECK(a.base == b.base);
  REQUIRE(a.interactions.size() == b.interactions.size());
  for (std::size_t k = 0; k < a.interactions.size(); ++k) {
    CHECK(a.interactions[k].i == b.interactions[k].i);
    CHECK(a.interactions[k].j == b.interactions[k].j);
    CHECK(a.interactions[k].value == b.interactions[k].value);
  }
  CHECK(a.utilities != c.utilities);
}

TEST_CASE("all-zero and all-one values follow the formula") {
  const auto env = make_planted(0);
  const double all_zero = planted_eval(env, ConnectionScheme::zeros(18));
  CHECK(all_zero == 0.35);
  double sum = 0.35;
  for (double u : env.utilities) sum += u;
  for (const auto& p : env.interactions) sum += p.value;
  CHECK(planted_eval(env, ConnectionScheme::ones(18)) == std::clamp(sum, 0.0, 1.0));
}

TEST_CASE("m=4 argmax matches a direct enumeration") {
  PlantedOptions o;
  o.m = 4;
  o.interactions = 2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto env = make_planted(seed, o);
    double best = -1.0;
    std::uint64_t arg = 0;
    for (std::uint64_t c = 0; c < 16; ++c) {
      // Independent evaluation of the landscape formula.
      double v = env.base;
      for (std::size_t i = 0; i < 4; ++i)
        if ((c >> (3 - i)) & 1U) v += env.utilities[i];
      for (const auto& p : env.interactions)
        if (((c >> (3 - p.i)) & 1U) && ((c >> (3 - p.j)) & 1U)) v += p.value;
      v = std::clamp(v, 0.0, 1.0);
      CHECK(std::abs(v - planted_eval(env, ConnectionScheme::from_code(c, 4))) <= 1e-15);
      if (v > best) {
        best = v;
        arg = c;
      }
    }
    double lib_best = -1.0;
    std::uint64_t lib_arg = 0;
    for (std::uint64_t c = 0; c < 16; ++c) {
      const double v = planted_eval(env, ConnectionScheme::from_code(c, 4));
      if (v > lib_best) {
        lib_best = v;
        lib_arg = c;
      }
    }
    CHECK(arg == lib_arg);
  }
}

TEST_CASE("noisy evaluation") {
  const auto env = make_planted(4);
  PlantedEvaluator quiet(env, 1, false);
  PlantedEvaluator noisy(env, 1, true);
  PlantedEvaluator noisy_again(env, 1, true);
  const auto a = decode("101010101010101010");
  CHECK(quiet.evaluate(a) == planted_eval(env, a));
  CHECK_FALSE(quiet.noisy());
  CHECK(noisy.noisy());
  double sum = 0.0, sq = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double v = noisy.evaluate(a);
    CHECK(v == noisy_again.evaluate(a));
    sum += v - planted_eval(env, a);
    sq += (v - planted_eval(env, a)) * (v - planted_eval(env, a));
  }
  CHECK(std::abs(sum / n) < 4.0 * 0.01 / std::sqrt(double(n)));
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.01).epsilon(0.05));
  CHECK(noisy.true_value(a) == planted_eval(env, a));
}
