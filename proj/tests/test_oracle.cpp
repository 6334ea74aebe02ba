#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "meshrl/config.hpp"
#include "meshrl/oracle.hpp"
#include "meshrl/pipeline.hpp"

using namespace meshrl;

namespace {

std::shared_ptr<const ForestModel> constant_model(double mean, double var) {
  auto leaf = [](double v) {
    RegressionTree t;
    t.nodes = {{v}};
    return std::vector<RegressionTree>{t};
  };
  return std::make_shared<const ForestModel>(
      2, 2, 0, std::vector<std::vector<RegressionTree>>{leaf(mean), leaf(mean), leaf(var), leaf(var)});
}

struct Trained : ::testing::Test {
  static void SetUpTestSuite() {
    cfg = std::make_unique<ScenarioConfig>(default_config(1));
    cfg->model.tree_count = 40;
    model = std::make_shared<const ForestModel>(fit_model(*cfg, collect(*cfg, 6000, 1), 1).model);
  }
  static void TearDownTestSuite() {
    cfg.reset();
    model.reset();
  }
  static inline std::unique_ptr<ScenarioConfig> cfg;
  static inline std::shared_ptr<const ForestModel> model;
};

}  // namespace

TEST(OptimalAction, ConstantLowDelayMeansNoBlocking) {
  ScenarioConfig cfg = default_config(1);
  auto env = make_simulator(cfg, constant_model(0.02, 0.0), cfg.training);
  for (long t = 0; t < 20; ++t) {
    const auto ev = env.current();
    const auto best = optimal_action(ev->reward, ev->mask.allowed);
    EXPECT_EQ(env.actions()[best.index].b, (std::vector<double>{0, 0}));
    env.step(best.index);
  }
}

TEST(OptimalAction, SingleActionGrid) {
  const std::vector<double> r{0.3};
  const std::vector<std::uint8_t> m{1};
  EXPECT_EQ(optimal_action(r, m).index, 0u);
  EXPECT_EQ(optimal_action(r, std::vector<std::uint8_t>{0}).index, 0u);  // empty region: all actions
}

TEST(OptimalAction, TiesAndPurity) {
  const std::vector<double> r{1, 5, 5, 2};
  const std::vector<std::uint8_t> m{1, 1, 1, 1};
  EXPECT_EQ(optimal_action(r, m).index, 1u);
  EXPECT_EQ(optimal_action(r, std::vector<std::uint8_t>{1, 0, 1, 1}).index, 2u);
  EXPECT_EQ(optimal_action(r, m).index, optimal_action(r, m).index);
}

// Peak load on the target where both services cannot meet their bounds at
// once: enumerating every action directly, the best ones shed service 1
// before service 2.
TEST(OptimalAction, ScenarioTwoBlocksServiceOneFirst) {
  const ScenarioConfig cfg = default_config(2);
  const auto topo = cfg.topology();
  const ActionTable t(cfg.grid, topo);
  const LoadVector load{20, 20};
  double best = -1;
  ControlAction arg;
  bool both_ok_somewhere = false;
  for (const auto& a : t.actions()) {
    const auto resp = mesh_response(cfg.surrogate, topo, load, a);
    double r = 0;
    for (std::size_t i = 0; i < 2; ++i)
      r += cfg.reward.weights[i] * load[i] * (1 - a.b[i]) *
           0.5 * (1 - std::tanh(10 * (resp.mean_delay[i] - 0.1) / 0.1));
    if (a.b[0] == 0 && a.b[1] == 0 && resp.mean_delay[0] <= 0.1 && resp.mean_delay[1] <= 0.1)
      both_ok_somewhere = true;
    if (r > best) {
      best = r;
      arg = a;
    }
  }
  ASSERT_FALSE(both_ok_somewhere);  // genuinely saturated state
  const auto gt = ground_truth_rewards(cfg.surrogate, topo, cfg.reward, cfg.grid, t, load);
  const std::vector<std::uint8_t> all(t.size(), 1);
  const auto o = optimal_action(gt, all);
  EXPECT_NEAR(o.reward, best, 1e-12);
  EXPECT_EQ(t[o.index], arg);
  EXPECT_GT(arg.b[0], 0.0);
  EXPECT_GE(arg.b[0], arg.b[1]);
}

TEST(Nr, Definitions) {
  EXPECT_DOUBLE_EQ(normalized_reward(3, 4), 0.75);
  EXPECT_DOUBLE_EQ(normalized_reward(0, 0), 1.0);
  const std::vector<double> xs{1.0, 0.5, 0.75, 1.0};
  const auto m = mean_ci95(xs);
  EXPECT_DOUBLE_EQ(m.mean, 0.8125);
  double ss = 0;
  for (double x : xs) ss += (x - 0.8125) * (x - 0.8125);
  EXPECT_NEAR(m.half_width, 1.96 * std::sqrt(ss / 3) / 2, 1e-15);
}

TEST_F(Trained, OracleAsPolicyScoresOne) {
  auto env = make_simulator(*cfg, model, cfg->training);
  const auto rep = evaluate_simulator(env, oracle_rule(), cfg->eval.random_steps, 3);
  EXPECT_EQ(rep.steps.size(), 150u);
  EXPECT_EQ(rep.anr, 1.0);
  auto sine = make_simulator(*cfg, model, cfg->evaluation);
  EXPECT_EQ(evaluate_simulator(sine, oracle_rule(), cfg->eval.sine_steps, 3).anr, 1.0);
  auto target = make_simulator(*cfg, model, cfg->evaluation);
  const auto tr = evaluate_surrogate(cfg->surrogate, target, oracle_rule(), cfg->evaluation, 100, 3,
                                     Scoring::ground_truth);
  EXPECT_EQ(tr.anr, 1.0);
}

TEST_F(Trained, RandomPolicyIsWorseThanTrained) {
  ScenarioConfig c = *cfg;
  c.agent.total_steps = 12288;
  c.agent.eval_every = 0;
  const auto res = train_policy(c, model, 2);
  auto env = make_simulator(c, model, c.training);
  const auto random = evaluate_simulator(env, random_rule(5), 150, 8);
  const auto trained = evaluate_simulator(env, res.policy, 150, 8);
  EXPECT_LT(random.anr, 1.0);
  EXPECT_LT(random.anr, trained.anr);
  for (const auto* rep : {&random, &trained}) {
    double sum = 0;
    for (const auto& s : rep->steps) {
      EXPECT_GE(s.nr, 0.0);
      EXPECT_LE(s.nr, 1.0);
      sum += s.nr;
    }
    EXPECT_NEAR(rep->anr, sum / rep->steps.size(), 1e-12);
  }
}

TEST_F(Trained, SurrogateNrNeverExceedsOne) {
  auto env = make_simulator(*cfg, model, cfg->training);
  for (Scoring sc : {Scoring::ground_truth, Scoring::model}) {
    const auto rep = evaluate_surrogate(cfg->surrogate, env, random_rule(9), cfg->training, 80, 4, sc);
    for (const auto& s : rep.steps) {
      EXPECT_LE(s.nr, 1.0);
      EXPECT_GE(s.nr, 0.0);
      for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(s.carried[i], s.load[i] + 1e-12);
    }
  }
}

TEST_F(Trained, ReplacingAnActionWithTheOracleNeverLowersAnr) {
  auto env = make_simulator(*cfg, model, cfg->training);
  const auto base = evaluate_simulator(env, random_rule(21), 60, 5);
  for (long swap : {0L, 17L, 59L}) {
    auto inner = random_rule(21);
    long t = 0;
    DecisionRule patched = [&](const SystemState& s, std::span<const std::uint8_t> m,
                               std::span<const double> r) {
      const auto k = inner(s, m, r);  // keep the random stream aligned
      return t++ == swap ? optimal_action(r, m).index : k;
    };
    const auto rep = evaluate_simulator(env, patched, 60, 5);
    EXPECT_GE(rep.anr, base.anr);
  }
}

// Naive re-implementation: per-action pointwise prediction, explicit region
// test and the scenario-1 reward written out by hand.
TEST_F(Trained, BruteForceEquivalence) {
  ScenarioConfig c = *cfg;
  c.grid.b_levels = {0.0, 0.2, 0.4, 0.6, 0.8};
  c.grid.p_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
  auto env = make_simulator(c, model, c.training);
  ASSERT_LE(env.actions().size(), 1000u);
  for (LoadVector load : {LoadVector{5, 5}, LoadVector{20, 20}, LoadVector{10, 20}, LoadVector{15, 5}}) {
    double best = -1;
    bool any = false;
    for (int pass = 0; pass < 2 && !any; ++pass)
      for (const auto& a : enumerate_actions(c.grid, c.topology())) {
        const auto p = model->predict(load, a);
        const bool ok = (p.var[0] <= 0 || p.var[0] < 0.5 * p.mean[0]) &&
                        (p.var[1] <= 0 || p.var[1] < 0.5 * p.mean[1]);
        if (!ok && pass == 0) continue;
        any = any || pass == 0;
        double r = 0;
        for (int i = 0; i < 2; ++i)
          r += load[i] * (1 - a.b[i]) * 0.5 * (1 - std::tanh(10 * (p.mean[i] - 0.1) / 0.1));
        best = std::max(best, r);
      }
    const auto ev = env.evaluate(load);
    EXPECT_NEAR(optimal_action(ev->reward, ev->mask.allowed).reward, best, 1e-12);
  }
}

TEST_F(Trained, GridMismatchIsRejected) {
  PolicyNetwork p = initial_policy(*cfg, 1);
  ScenarioConfig other = *cfg;
  other.grid.p_levels = {0.0, 0.5, 1.0};
  auto env = make_simulator(other, model, other.training);
  EXPECT_THROW(evaluate_simulator(env, p, 10, 1), ValidationError);
  EXPECT_THROW(evaluate_surrogate(other.surrogate, env, p, other.training, 10, 1), ValidationError);
}
