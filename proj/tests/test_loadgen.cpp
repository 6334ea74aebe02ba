#include <gtest/gtest.h>

#include <map>
#include <numbers>

#include "meshrl/loadgen.hpp"

using namespace meshrl;

TEST(LoadAt, SineExamples) {
  LoadPattern p{LoadKind::sinusoidal, {{{}, 12.5, 7.5, 0.0}}, 100, 0};
  EXPECT_DOUBLE_EQ(load_at(p, 0)[0], 12.5);
  LoadPattern c{LoadKind::sinusoidal, {{{}, 3.0, 2.0, 0.0}}, 100, 0};
  EXPECT_DOUBLE_EQ(load_at(c, 25)[0], 5.0);
}

TEST(LoadAt, RandomValuesFromSet) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    LoadPattern p{LoadKind::random, {{{5, 10, 15, 20}, 0, 0, 0}}, 100, seed};
    for (long t = 0; t < 500; ++t) {
      const double v = load_at(p, t)[0];
      EXPECT_TRUE(v == 5 || v == 10 || v == 15 || v == 20);
    }
  }
}

TEST(LoadAt, PureFunctionOfSeedAndStep) {
  const auto [train, eval] = default_patterns(1, 17);
  for (long t : {0L, 5L, 1000L}) EXPECT_EQ(load_at(train, t), load_at(train, t));
  LoadPattern other = train;
  other.seed = 18;
  int differ = 0;
  for (long t = 0; t < 100; ++t) differ += load_at(train, t) != load_at(other, t);
  EXPECT_GT(differ, 50);
}

TEST(LoadAt, EmpiricalDistributionUniform) {
  LoadPattern p{LoadKind::random, {{{5, 10, 15, 20}, 0, 0, 0}, {{1, 2, 3, 4, 5}, 0, 0, 0}}, 100, 7};
  std::map<double, int> f0, f1;
  const int n = 10000;
  for (long t = 0; t < n; ++t) {
    const auto l = load_at(p, t);
    ++f0[l[0]];
    ++f1[l[1]];
  }
  for (auto [v, c] : f0) EXPECT_NEAR(double(c) / n, 0.25, 0.05) << v;
  for (auto [v, c] : f1) EXPECT_NEAR(double(c) / n, 0.20, 0.05) << v;
}

TEST(DefaultPatterns, Scenarios) {
  auto [t1, e1] = default_patterns(1);
  ASSERT_EQ(t1.services.size(), 2u);
  for (const auto& s : t1.services) EXPECT_EQ(s.values, (std::vector<double>{5, 10, 15, 20}));
  for (long t = 0; t < 400; ++t)
    for (double v : load_at(e1, t)) {
      EXPECT_GE(v, 5.0 - 1e-12);
      EXPECT_LE(v, 20.0 + 1e-12);
    }
  EXPECT_NE(e1.services[0].phase, e1.services[1].phase);

  auto [t4, e4] = default_patterns(4);
  for (double v : t4.services[1].values) EXPECT_TRUE(v >= 1 && v <= 5 && v == std::floor(v));
  EXPECT_DOUBLE_EQ(e4.services[1].mean, 3.0);
  EXPECT_DOUBLE_EQ(e4.services[1].amplitude, 2.0);
  EXPECT_THROW(default_patterns(0), ValidationError);
}

TEST(LoadPattern, Validation) {
  LoadPattern p{LoadKind::sinusoidal, {{{}, 3.0, 4.0, 0.0}}, 100, 0};
  EXPECT_THROW(p.validate(), ValidationError);
  p.services[0].amplitude = 1;
  p.period = 0;
  EXPECT_THROW(p.validate(), ValidationError);
  LoadPattern r{LoadKind::random, {{{}, 0, 0, 0}}, 100, 0};
  EXPECT_THROW(r.validate(), ValidationError);
  r.services[0].values = {-1};
  EXPECT_THROW(r.validate(), ValidationError);
}

TEST(LoadPattern, SineStaysInRange) {
  auto [t, e] = default_patterns(4);
  const auto bounds = e.bounds();
  for (long k = 0; k < 1000; ++k) {
    const auto l = load_at(e, k);
    for (std::size_t i = 0; i < l.size(); ++i) {
      EXPECT_GE(l[i], bounds[i].first - 1e-12);
      EXPECT_LE(l[i], bounds[i].second + 1e-12);
    }
  }
}
