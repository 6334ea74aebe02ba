#include <gtest/gtest.h>

#include <cmath>

#include "meshrl/objectives.hpp"
#include "meshrl/random.hpp"

using namespace meshrl;

namespace {

std::vector<ServiceObservation> obs(double lc1, double d1, double lc2, double d2) {
  return {{lc1, lc1, d1, 0}, {lc2, lc2, d2, 0}};
}

ActionGrid cores_grid() {
  ActionGrid g;
  g.c_levels = {1, 2, 3, 4};
  g.scaling_active = true;
  return g;
}

const ControlAction kAny{{0, 0}, {0.5, 0.5}, {4, 4}};

}  // namespace

TEST(RDelay, Examples) {
  EXPECT_EQ(r_delay(0.1, 0.1, 10), 0.5);
  EXPECT_NEAR(r_delay(0.0, 0.1, 10), 1.0, 1e-8);
  EXPECT_NEAR(r_delay(0.11, 0.1, 10), 0.5 * (1 - std::tanh(1.0)), 1e-12);
  EXPECT_NEAR(r_delay(0.11, 0.1, 10), 0.11920, 1e-5);
}

TEST(RFloor, Examples) {
  EXPECT_EQ(r_floor(5, 5, 10), 0.5);
  EXPECT_NEAR(r_floor(0, 5, 10), 0.0, 1e-8);
  EXPECT_NEAR(r_floor(10, 5, 10), 1.0, 1e-8);
}

TEST(RewardShapes, MonotoneOnRandomPairs) {
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const double o = rng.uniform(0.01, 1);
    double a = rng.uniform(0, 2 * o), b = rng.uniform(0, 2 * o);
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    EXPECT_GE(r_delay(a, o, 10), r_delay(b, o, 10));
    EXPECT_LE(r_floor(a * 10, o * 10, 10), r_floor(b * 10, o * 10, 10));
    for (double r : {r_delay(a, o, 10), r_floor(a, o, 10)}) {
      EXPECT_GE(r, 0);
      EXPECT_LE(r, 1);
    }
  }
}

TEST(CostFactor, LinearEndpoints) {
  const auto g = cores_grid();
  const auto spec = default_reward(4);
  EXPECT_DOUBLE_EQ(cost_factor({{0, 0}, {0.5, 0.5}, {1, 1}}, spec, g), 1.0);
  EXPECT_DOUBLE_EQ(cost_factor({{0, 0}, {0.5, 0.5}, {4, 4}}, spec, g), 0.5);
  // Midpoint of the total-core range [2, 8] is 5 cores.
  EXPECT_DOUBLE_EQ(cost_factor({{0, 0}, {0.5, 0.5}, {2, 3}}, spec, g), 0.75);
}

TEST(Reward, ScenarioExamples) {
  const ActionGrid g;
  const auto o = obs(20, 0.001, 15, 0.001);
  EXPECT_NEAR(reward(default_reward(1), o, kAny, g), 35, 1e-6);
  EXPECT_NEAR(reward(default_reward(2), o, kAny, g), 95, 1e-6);
  const auto starved = obs(0, 0.001, 15, 0.001);
  const double r3 = reward(default_reward(3), starved, kAny, g);
  EXPECT_NEAR(r3, 15 * r_delay(0.001, 0.1, 10), 1e-6);
  EXPECT_EQ(reward(default_reward(1), obs(0, 0.05, 0, 0.05), kAny, g), 0.0);
}

TEST(Reward, ScenarioTwoMinusOneIdentity) {
  Rng rng(12);
  const ActionGrid g;
  for (int k = 0; k < 1000; ++k) {
    const auto o = obs(rng.uniform(0, 20), rng.uniform(0, 0.3), rng.uniform(0, 20),
                       rng.uniform(0, 0.3));
    const double diff = reward(default_reward(2), o, kAny, g) - reward(default_reward(1), o, kAny, g);
    const double expect = 4 * o[1].carried * r_delay(o[1].d_mean, 0.1, 10);
    EXPECT_NEAR(diff, expect, 1e-12 * std::max(1.0, expect));
    EXPECT_GE(diff, 0);
  }
}

TEST(Reward, ScenarioOneNonDecreasingInCarried) {
  Rng rng(13);
  const ActionGrid g;
  for (int k = 0; k < 500; ++k) {
    const double d1 = rng.uniform(0, 0.3), d2 = rng.uniform(0, 0.3);
    const double a = rng.uniform(0, 20), b = a + rng.uniform(0, 5);
    const double lc2 = rng.uniform(0, 20);
    EXPECT_LE(reward(default_reward(1), obs(a, d1, lc2, d2), kAny, g),
              reward(default_reward(1), obs(b, d1, lc2, d2), kAny, g));
  }
}

TEST(Reward, ScenarioFourPrefersFewerCores) {
  const auto g = cores_grid();
  const auto spec = default_reward(4);
  const auto o = obs(10, 0.08, 3, 0.4);
  double prev = reward(spec, o, {{0, 0}, {0.5, 0.5}, {1, 1}}, g);
  for (int total = 3; total <= 8; ++total) {
    const ControlAction a{{0, 0}, {0.5, 0.5}, {std::min(4, total - 1), total - std::min(4, total - 1)}};
    const double r = reward(spec, o, a, g);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(RewardSpec, Validation) {
  RewardSpec s = default_reward(1);
  s.scenario = 5;
  EXPECT_THROW(s.validate(2), ValidationError);
  s = default_reward(1);
  s.cost_floor = 1.0;
  EXPECT_THROW(s.validate(2), ValidationError);
  EXPECT_THROW(default_reward(1).validate(3), ValidationError);
}
