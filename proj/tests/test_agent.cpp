#include <gtest/gtest.h>

#include <cmath>

#include "meshrl/agent.hpp"
#include "toy_env.hpp"

using namespace meshrl;
using meshrl::testing::TableBandit;

TEST(Act, SingleAdmissibleAction) {
  Rng rng(1);
  const std::vector<double> logits{3.0, -1.0, 7.0, 0.5};
  const std::vector<std::uint8_t> mask{0, 1, 0, 0};
  EXPECT_EQ(choose_action(logits, mask, ActMode::greedy, rng), 1u);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(choose_action(logits, mask, ActMode::sample, rng), 1u);
}

TEST(Act, UniformOverAdmissible) {
  Rng rng(2);
  const std::vector<double> logits(6, 0.25);
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1};
  std::vector<int> count(6, 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) ++count[choose_action(logits, mask, ActMode::sample, rng)];
  EXPECT_EQ(count[1], 0);
  EXPECT_EQ(count[4], 0);
  for (int k : {0, 2, 3, 5}) EXPECT_NEAR(count[k] / double(n), 0.25, 0.02);
}

TEST(Act, MaskedActionsNeverSampled) {
  Rng rng(3);
  const std::vector<double> logits{10.0, 0.0, -3.0, 9.0, 2.0};
  const std::vector<std::uint8_t> mask{0, 1, 1, 0, 1};
  for (int k = 0; k < 100000; ++k) {
    const auto a = choose_action(logits, mask, ActMode::sample, rng);
    ASSERT_TRUE(mask[a]);
  }
  EXPECT_EQ(choose_action(logits, mask, ActMode::greedy, rng), 4u);
}

TEST(Act, GreedyTiesGoToLowestIndex) {
  Rng rng(4);
  const std::vector<double> logits{1.0, 2.0, 2.0, 2.0};
  EXPECT_EQ(choose_action(logits, std::vector<std::uint8_t>{1, 1, 1, 1}, ActMode::greedy, rng), 1u);
  EXPECT_EQ(choose_action(logits, std::vector<std::uint8_t>{1, 0, 1, 1}, ActMode::greedy, rng), 2u);
  EXPECT_THROW(choose_action(logits, std::vector<std::uint8_t>{0, 0, 0, 0}, ActMode::greedy, rng),
               ValidationError);
}

TEST(MaskedLogSoftmax, MaskedEntriesHaveZeroProbability) {
  const std::vector<double> z{1, 2, 3};
  const auto lp = masked_log_softmax(z, std::vector<std::uint8_t>{1, 0, 1});
  EXPECT_EQ(std::exp(lp[1]), 0.0);
  EXPECT_NEAR(std::exp(lp[0]) + std::exp(lp[2]), 1.0, 1e-15);
}

TEST(NormalizeState, EndpointsAndClamping) {
  StateBounds b{{5, 1}, {20, 5}, {1.0, 2.0}};
  EXPECT_EQ(normalize_state({{20, 5}, {1.0, 2.0}}, b), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(normalize_state({{5, 1}, {0, 0}}, b), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(normalize_state({{30, -2}, {5.0, -1}}, b), (std::vector<double>{1, 0, 1, 0}));
  const auto mid = normalize_state({{12.5, 3}, {0.5, 1}}, b);
  EXPECT_DOUBLE_EQ(mid[0], 0.5);
  EXPECT_DOUBLE_EQ(mid[1], 0.5);
  StateBounds degenerate{{5}, {5}, {}};
  EXPECT_THROW(normalize_state({{5}, {0}}, degenerate), ValidationError);
  StateBounds bad_delay{{0}, {1}, {0.0}};
  EXPECT_THROW(normalize_state({{0.5}, {0}}, bad_delay), ValidationError);
}

TEST(Mlp, OutputsFiniteAndShapes) {
  Rng rng(5);
  Mlp net({4, 64, 64, 10}, rng, 0.01);
  EXPECT_EQ(net.params().size(), Mlp::count_params({4, 64, 64, 10}));
  const auto y = net.forward(std::vector<double>{0.1, 0.9, -3, 100});
  ASSERT_EQ(y.size(), 10u);
  for (double v : y) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(net.forward(std::vector<double>{1, 2}), ValidationError);
}

// Central finite differences of the full PPO loss against the analytic
// gradients of both networks.
TEST(PpoLoss, GradientsMatchFiniteDifferences) {
  AgentConfig cfg;
  cfg.entropy_coef = 0.05;
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    Rng rng(100 + inst);
    const std::size_t features = 3, actions = 5, batch = 6;
    PolicyNetwork net;
    net.actor = Mlp({features, 7, 6, actions}, rng, 1.0);
    net.critic = Mlp({features, 7, 6, 1}, rng, 1.0);
    for (auto& w : net.actor.params()) w += rng.uniform(-0.1, 0.1);  // non-zero biases
    for (auto& w : net.critic.params()) w += rng.uniform(-0.1, 0.1);

    std::vector<std::vector<double>> xs(batch);
    std::vector<std::vector<std::uint8_t>> masks(batch);
    std::vector<PpoSample> samples(batch);
    for (std::size_t k = 0; k < batch; ++k) {
      for (std::size_t f = 0; f < features; ++f) xs[k].push_back(rng.uniform(-1, 1));
      masks[k].assign(actions, 1);
      masks[k][rng.below(actions)] = 0;
      std::size_t a;
      do a = rng.below(actions);
      while (!masks[k][a]);
      const auto lp = masked_log_softmax(net.actor.forward(xs[k]), masks[k]);
      // Mix ratios inside and outside the clip band.
      const double shift = k % 3 == 0 ? 0.5 : rng.uniform(-0.1, 0.1);
      samples[k] = {xs[k], masks[k], a, lp[a] + shift, rng.uniform(-2, 2), rng.uniform(-1, 1)};
    }

    const auto loss = ppo_loss(net, samples, cfg);
    auto check = [&](std::vector<double>& params, const std::vector<double>& grad) {
      for (std::size_t p = 0; p < params.size(); ++p) {
        const double h = 1e-6, keep = params[p];
        params[p] = keep + h;
        const double up = ppo_loss(net, samples, cfg).total;
        params[p] = keep - h;
        const double down = ppo_loss(net, samples, cfg).total;
        params[p] = keep;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(grad[p]), 1e-3});
        ASSERT_LE(std::abs(numeric - grad[p]) / scale, 1e-4)
            << "instance " << inst << " param " << p << " analytic " << grad[p]
            << " numeric " << numeric;
      }
    };
    check(net.actor.params(), loss.actor_grad);
    check(net.critic.params(), loss.critic_grad);
  }
}

TEST(Train, TwoStateBandit) {
  TableBandit env({{1.0, 0.0}, {0.0, 1.0}});
  AgentConfig cfg;
  cfg.total_steps = 10000;
  cfg.eval_every = 0;
  auto init = PolicyNetwork::create(env.feature_count(), 2, 64, 1);
  const auto res = train(env, cfg, init);
  Rng rng(0);
  const std::vector<std::uint8_t> all{1, 1};
  EXPECT_EQ(act(res.policy, env.features(0), all, ActMode::greedy, rng), 0u);
  EXPECT_EQ(act(res.policy, env.features(1), all, ActMode::greedy, rng), 1u);
}

TEST(Train, MatchesArgmaxOnRandomTable) {
  Rng rng(7);
  const std::size_t S = 12, A = 8;
  std::vector<std::vector<double>> table(S, std::vector<double>(A));
  std::vector<std::vector<std::uint8_t>> masks(S, std::vector<std::uint8_t>(A, 1));
  for (std::size_t s = 0; s < S; ++s) {
    for (auto& r : table[s]) r = rng.uniform();
    masks[s][rng.below(A)] = 0;
  }
  TableBandit env(table, masks);
  AgentConfig cfg;
  cfg.total_steps = 20000;
  cfg.eval_every = 0;
  const auto res = train(env, cfg, PolicyNetwork::create(env.feature_count(), A, 64, 3));
  EXPECT_EQ(env.masked_evaluations, 0u);
  std::size_t match = 0;
  for (std::size_t s = 0; s < S; ++s) {
    std::size_t best = A;
    for (std::size_t a = 0; a < A; ++a)
      if (masks[s][a] && (best == A || table[s][a] > table[s][best])) best = a;
    Rng unused(0);
    match += act(res.policy, env.features(s), masks[s], ActMode::greedy, unused) == best;
  }
  EXPECT_GE(double(match) / S, 0.95);
}

TEST(Train, ReproducibleCurves) {
  auto run = [] {
    TableBandit env({{0.2, 0.9, 0.1}, {0.5, 0.4, 0.8}});
    TableBandit probe({{0.2, 0.9, 0.1}, {0.5, 0.4, 0.8}});
    AgentConfig cfg;
    cfg.total_steps = 3000;
    cfg.seed = 11;
    CurveEvaluator eval = [&](const PolicyNetwork& p) {
      Rng unused(0);
      double got = 0, best = 0;
      for (std::size_t s = 0; s < 2; ++s) {
        const std::vector<std::uint8_t> all{1, 1, 1};
        got += std::vector<std::vector<double>>{{0.2, 0.9, 0.1}, {0.5, 0.4, 0.8}}[s]
                   [act(p, probe.features(s), all, ActMode::greedy, unused)];
        best += s == 0 ? 0.9 : 0.8;
      }
      return CurvePoint{0, got / best, 0.0};
    };
    return train(env, cfg, PolicyNetwork::create(3, 3, 16, 11), eval);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.curve.size(), 3u);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t k = 0; k < a.curve.size(); ++k) {
    EXPECT_EQ(a.curve[k].step, (k + 1) * 1000);
    EXPECT_EQ(a.curve[k].anr, b.curve[k].anr);
  }
  EXPECT_EQ(a.policy.actor.params(), b.policy.actor.params());
  EXPECT_EQ(a.gradient_steps, 2u * 10 * 16);  // two full 1024-step rollouts
}

TEST(Train, NonFiniteRewardAborts) {
  TableBandit env({{std::nan(""), 0.0}});
  AgentConfig cfg;
  cfg.total_steps = 2000;
  EXPECT_THROW(train(env, cfg, PolicyNetwork::create(2, 2, 8, 1)), NumericalError);
}

TEST(AgentConfig, Validation) {
  AgentConfig c;
  c.batch_size = 2048;
  EXPECT_THROW(c.validate(), ValidationError);
  c = AgentConfig{};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = AgentConfig{};
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
}
