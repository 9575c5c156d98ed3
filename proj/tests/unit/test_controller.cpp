#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ean/controller.hpp"
#include "ean/errors.hpp"
#include "support.hpp"

using namespace ean;

namespace {

// log p_hat computed from a reference forward pass of the controller net.
double reference_log_prob(const nn::MlpParams& net, const ConnectionScheme& a) {
  const auto p = test::reference_forward(net, std::vector<double>(net.input_dim(), 0.0));
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::log(a[i] ? p[i] : 1.0 - p[i]);
  return s;
}

Controller random_controller(std::size_t m, std::size_t hidden, Rng& rng, double scale = 0.5) {
  ControllerOptions opts;
  opts.hidden = hidden;
  Controller c(m, opts, rng);
  test::randomize(c.net(), rng, -scale, scale);
  return c;
}

}  // namespace

TEST_CASE("fresh controller emits 0.5 everywhere") {
  Rng rng(0);
  Controller c(18, {}, rng);
  for (double p : c.probs().probs) CHECK(p == 0.5);
  CHECK(c.probs().probs == c.probs().probs);
  CHECK(c.extract_scheme() == ConnectionScheme::zeros(18));
  CHECK(c.convergence_pbar(decode("101010101010101010")) == 0.5);
}

TEST_CASE("a logit driven to +10 saturates its probability") {
  Rng rng(1);
  Controller c(3, {}, rng);
  c.net().biases.back()[1] = 10.0;
  CHECK(c.raw_probs()[1] > 0.9999);
  CHECK(c.probs().probs[1] <= 1.0 - kProbClamp);
  c.net().biases.back()[1] = 40.0;
  CHECK(c.raw_probs()[1] == 1.0);
  CHECK(c.probs().probs[1] == 1.0 - kProbClamp);
}

TEST_CASE("reinforce with zero reward leaves theta bitwise unchanged") {
  Rng rng(2);
  auto c = random_controller(6, 16, rng);
  const auto before = c.net();
  c.reinforce_update(decode("101100"), 0.0);
  CHECK(c.net() == before);
}

TEST_CASE("reinforce rejects non-finite rewards and wrong lengths") {
  Rng rng(2);
  Controller c(4, {}, rng);
  CHECK_THROWS_AS(c.reinforce_update(decode("1010"), std::nan("")), NumericError);
  CHECK_THROWS_AS(c.reinforce_update(decode("1010"), INFINITY), NumericError);
  CHECK_THROWS_AS(c.reinforce_update(decode("101"), 1.0), ShapeError);
}

TEST_CASE("positive reward raises every realized probability of the scheme") {
  Rng rng(3);
  ControllerOptions opts;
  opts.learning_rate = 0.005;
  Controller c(10, opts, rng);
  const auto a = decode("1100101001");
  auto hat = realized_probs(c.probs(), a);
  for (int step = 0; step < 400; ++step) {
    c.reinforce_update(a, 1.0);
    const auto next = realized_probs(c.probs(), a);
    for (std::size_t i = 0; i < hat.size(); ++i) {
      if (hat[i] >= 1.0 - kProbClamp) continue;
      CHECK(next[i] > hat[i]);
    }
    hat = next;
  }
  CHECK(c.extract_scheme() == a);
}

TEST_CASE("one reinforce step never lowers the scheme's log probability") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = random_controller(1 + rng.index(20), 8 + rng.index(32), rng);
    const auto a = sample_bernoulli(c.size(), 0.5, rng);
    const double before = log_prob(c.probs(), a);
    c.reinforce_update(a, rng.uniform(0.01, 2.0));
    CHECK(log_prob(c.probs(), a) >= before);
  }
}

TEST_CASE("reinforce gradient matches central differences") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_controller(1 + rng.index(12), 4 + rng.index(12), rng);
    const auto a = sample_bernoulli(c.size(), 0.5, rng);
    const double g = rng.uniform(-2.0, 2.0);
    const auto analytic = test::flatten(c.reinforce_gradient(a, g));
    auto net = c.net();
    const auto numeric = test::finite_difference(net, [&] { return g * reference_log_prob(net, a); });
    CHECK(test::relative_error(analytic, numeric, 1e-8) < 1e-5);
  }
}

TEST_CASE("ppo at theta_old equals the batch-mean reinforce direction") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_controller(1 + rng.index(16), 8, rng);
    std::vector<TrajectoryRecord> batch;
    auto mean = nn::GradientBundle::zeros_like(c.net());
    const std::size_t k = 1 + rng.index(8);
    for (std::size_t b = 0; b < k; ++b) {
      TrajectoryRecord r{c.probs(), sample_from_probs(c.probs(), rng), rng.uniform(-1.0, 2.0), b};
      mean.add_scaled(c.reinforce_gradient(r.scheme, r.reward), 1.0 / static_cast<double>(k));
      batch.push_back(r);
    }
    const auto ppo = test::flatten(c.ppo_gradient(batch));
    const auto ref = test::flatten(mean);
    for (std::size_t i = 0; i < ppo.size(); ++i) CHECK(std::abs(ppo[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("ppo gradient away from theta_old matches the fixed-ratio surrogate") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto old = random_controller(1 + rng.index(10), 6, rng);
    auto c = old;
    test::randomize(c.net(), rng, -0.5, 0.5);
    std::vector<TrajectoryRecord> batch;
    for (std::size_t b = 0; b < 4; ++b)
      batch.push_back({old.probs(), sample_from_probs(old.probs(), rng), rng.uniform(-1.0, 2.0), b});

    // Ratios frozen at the evaluation point; only log p_hat varies.
    const auto p_now = c.probs();
    std::vector<std::vector<double>> weight;
    for (const auto& r : batch) {
      const auto now = realized_probs(p_now, r.scheme);
      const auto then = realized_probs(r.probs_old, r.scheme);
      std::vector<double> w(now.size());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = now[i] / then[i];
      weight.push_back(w);
    }
    auto net = c.net();
    const auto numeric = test::finite_difference(net, [&] {
      const auto p = test::reference_forward(net, std::vector<double>(net.input_dim(), 0.0));
      double s = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < p.size(); ++i)
          s += batch[b].reward * weight[b][i] * std::log(batch[b].scheme[i] ? p[i] : 1.0 - p[i]);
      return s / static_cast<double>(batch.size());
    });
    CHECK(test::relative_error(test::flatten(c.ppo_gradient(batch)), numeric, 1e-8) < 1e-5);
  }
}

TEST_CASE("ppo edge cases") {
  Rng rng(8);
  auto c = random_controller(5, 8, rng);
  const auto before = c.net();
  CHECK(c.ppo_update({}) == UpdateStatus::skipped_empty_batch);
  CHECK(c.net() == before);
  std::vector<TrajectoryRecord> zero{{c.probs(), decode("10101"), 0.0, 0}};
  CHECK(c.ppo_update(zero) == UpdateStatus::applied);
  CHECK(c.net() == before);
}

TEST_CASE("clipped ppo drops terms whose ratio left the trust region") {
  Rng rng(9);
  ControllerOptions opts;
  opts.ppo_clip = true;
  opts.clip_epsilon = 0.2;
  Controller c(2, opts, rng);
  c.net().biases.back() = {3.0, 0.0};  // p ~ (0.95, 0.5)
  const auto a = decode("11");
  std::vector<TrajectoryRecord> batch{{SchemeProbability{{0.5, 0.5}}, a, 1.0, 0}};
  const auto g = c.ppo_gradient(batch);
  // Bit 0 has ratio 1.9 and is clipped; bit 1 still contributes.
  CHECK(g.biases.back()[0] == 0.0);
  CHECK(g.biases.back()[1] != 0.0);
  Controller unclipped(c.net(), ControllerOptions{});
  CHECK(unclipped.ppo_gradient(batch).biases.back()[0] != 0.0);
}

TEST_CASE("replay buffer is FIFO at capacity") {
  ReplayBuffer b(2);
  for (std::size_t i = 0; i < 3; ++i) b.put({SchemeProbability{{0.5}}, decode("1"), double(i), i});
  REQUIRE(b.size() == 2);
  CHECK(b.records()[0].iteration == 1);
  CHECK(b.records()[1].iteration == 2);
}

TEST_CASE("replay buffer sampling") {
  Rng rng(10);
  ReplayBuffer empty(4);
  CHECK_THROWS_AS(empty.sample(1, rng), Error);
  CHECK_THROWS_AS(ReplayBuffer(0), Error);

  ReplayBuffer one(4);
  one.put({SchemeProbability{{0.3}}, decode("1"), 0.7, 5});
  CHECK_THROWS_AS(one.sample(0, rng), Error);
  const auto s = one.sample(1, rng);
  REQUIRE(s.size() == 1);
  CHECK(s[0].iteration == 5);
  CHECK(s[0].reward == 0.7);

  ReplayBuffer four(4);
  for (std::size_t i = 0; i < 4; ++i) four.put({SchemeProbability{{0.5}}, decode("0"), 0.0, i});
  std::vector<double> counts(4, 0.0);
  const int draws = 10000;
  for (const auto& r : four.sample(draws, rng)) counts[r.iteration] += 1.0;
  const double sigma = std::sqrt(0.25 * 0.75 / draws);
  for (double c : counts) CHECK(std::abs(c / draws - 0.25) < 3.0 * sigma);
}

TEST_CASE("convergence pbar") {
  CHECK(convergence_pbar({{0.9, 0.1}}, decode("10")) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(convergence_pbar({{1.0 - kProbClamp, 1.0 - kProbClamp}}, decode("11")) > 0.99999);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.index(16);
    SchemeProbability p;
    for (std::size_t i = 0; i < m; ++i) p.probs.push_back(rng.uniform(0.01, 0.99));
    const auto a = sample_bernoulli(m, 0.5, rng);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    SchemeProbability q;
    std::vector<std::uint8_t> b;
    for (std::size_t i : perm) {
      q.probs.push_back(p.probs[i]);
      b.push_back(a[i]);
    }
    CHECK(convergence_pbar(q, ConnectionScheme(b)) == doctest::Approx(convergence_pbar(p, a)).epsilon(1e-14));
  }
}

TEST_CASE("extract_scheme thresholds strictly above one half") {
  Rng rng(12);
  Controller c(3, {}, rng);
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  c.net().biases.back() = {logit(0.9), logit(0.2), logit(0.6)};
  CHECK(encode(c.extract_scheme()) == "101");
  c.net().biases.back() = {0.0, 0.0, 1e-12};
  CHECK(encode(c.extract_scheme()) == "001");
}

TEST_CASE("controller rejects a non-sigmoid output") {
  Rng rng(13);
  const std::vector<std::size_t> dims{8, 4, 3};
  const std::vector<nn::Activation> acts{nn::Activation::relu, nn::Activation::identity};
  CHECK_THROWS_AS(Controller(nn::make_mlp(dims, acts, rng), {}), ShapeError);
}
