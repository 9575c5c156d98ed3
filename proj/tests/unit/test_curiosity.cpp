#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ean/curiosity.hpp"
#include "ean/errors.hpp"
#include "support.hpp"

using namespace ean;

namespace {

double reference_bonus(const nn::MlpParams& target, const nn::MlpParams& predictor, const ConnectionScheme& a) {
  const auto x = a.as_input();
  const auto t = test::reference_forward(target, x);
  const auto p = test::reference_forward(predictor, x);
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += (t[k] - p[k]) * (t[k] - p[k]);
  return s;
}

}  // namespace

TEST_CASE("a predictor identical to the target has zero bonus and zero gradient") {
  Rng rng(0);
  RndPair base(12, {}, rng);
  RndPair same(base.target(), base.target(), {});
  Rng draw(1);
  for (int i = 0; i < 20; ++i) {
    const auto a = sample_bernoulli(12, 0.5, draw);
    CHECK(same.bonus(a) == 0.0);
    const auto before = same.predictor();
    same.train(a);
    CHECK(same.predictor() == before);
  }
}

TEST_CASE("bonus is non-negative and equals the reference squared distance") {
  Rng rng(2);
  RndPair r(18, {}, rng);
  for (int i = 0; i < 50; ++i) {
    const auto a = sample_bernoulli(18, rng.uniform(), rng);
    const double b = r.bonus(a);
    CHECK(b >= 0.0);
    CHECK(std::abs(b - reference_bonus(r.target(), r.predictor(), a)) <= 1e-12 * std::max(1.0, b));
  }
}

TEST_CASE("default network shapes") {
  Rng rng(3);
  RndPair r(18, {}, rng);
  CHECK(r.target().layer_dims == std::vector<std::size_t>{18, 32, 16});
  CHECK(r.predictor().layer_dims == std::vector<std::size_t>{18, 32, 16});
  CHECK(r.embed_dim() == 16);
  CHECK(r.predictor_optimizer().kind == nn::OptimizerKind::adam);
  CHECK(r.predictor_optimizer().learning_rate == 1e-3);
  CHECK_FALSE(r.target() == r.predictor());
  CHECK_THROWS_AS(r.bonus(ConnectionScheme::zeros(17)), ShapeError);
}

TEST_CASE("500 steps on one scheme shrink its bonus below 1% of the start") {
  Rng rng(4);
  RndPair r(18, {}, rng);
  const auto a = decode("001100100101110101");
  const double initial = r.bonus(a);
  REQUIRE(initial > 0.0);
  for (int i = 0; i < 500; ++i) r.train(a);
  CHECK(r.bonus(a) < 0.01 * initial);
}

TEST_CASE("a single step does not increase the trained scheme's bonus") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    RndPair r(1 + rng.index(20), {}, rng);
    const auto a = sample_bernoulli(r.target().input_dim(), 0.5, rng);
    const double before = r.bonus(a);
    r.train(a);
    CHECK(r.bonus(a) <= before);
  }
}

TEST_CASE("predictor gradient matches central differences") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.index(16);
    RndOptions opts;
    opts.hidden = 2 + rng.index(14);
    opts.embed_dim = 1 + rng.index(8);
    RndPair r(m, opts, rng);
    const auto a = sample_bernoulli(m, 0.5, rng);
    const auto analytic = test::flatten(r.predictor_gradient(a));
    auto pred = r.predictor();
    const auto numeric = test::finite_difference(pred, [&] { return reference_bonus(r.target(), pred, a); });
    CHECK(test::relative_error(analytic, numeric, 1e-8) < 1e-5);
  }
}

TEST_CASE("the target never changes during training") {
  Rng rng(7);
  RndPair r(10, {}, rng);
  const auto target = r.target();
  for (int i = 0; i < 300; ++i) r.train(sample_bernoulli(10, 0.5, rng));
  CHECK(r.target() == target);
}

TEST_CASE("novel schemes earn larger bonuses than trained ones") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    RndPair r(18, {}, rng);
    std::vector<ConnectionScheme> seen;
    std::set<std::uint64_t> codes;
    while (seen.size() < 20) {
      const auto a = sample_bernoulli(18, 0.5, rng);
      if (codes.insert(a.code()).second) seen.push_back(a);
    }
    for (int step = 0; step < 400; ++step) r.train(seen[rng.index(seen.size())]);
    std::vector<ConnectionScheme> fresh;
    while (fresh.size() < 50) {
      const auto a = sample_bernoulli(18, 0.5, rng);
      if (codes.insert(a.code()).second) fresh.push_back(a);
    }
    double in = 0.0, out = 0.0;
    for (const auto& a : seen) in += r.bonus(a) / static_cast<double>(seen.size());
    for (const auto& a : fresh) out += r.bonus(a) / static_cast<double>(fresh.size());
    if (out > in) ++wins;
  }
  CHECK(wins >= 9);
}

TEST_CASE("running normalization") {
  RunningStd s;
  CHECK(s.stddev() == 0.0);
  for (double x : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) s.observe(x);
  CHECK(s.mean() == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s.stddev() == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(8);
  RndOptions raw_opts, norm_opts;
  norm_opts.normalize = true;
  Rng a(9), b(9);
  RndPair raw(6, raw_opts, a), norm(6, norm_opts, b);
  const auto first = decode("101010"), second = decode("010101"), third = decode("111000");
  CHECK(raw.reward_bonus(first) == norm.reward_bonus(first));
  raw.reward_bonus(second);
  norm.reward_bonus(second);
  const double r3 = raw.reward_bonus(third);
  const double n3 = norm.reward_bonus(third);
  CHECK(n3 == doctest::Approx(r3 / norm.running().stddev()).epsilon(1e-14));
  CHECK(raw.running().count() == 3);
}
