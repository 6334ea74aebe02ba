#include <gtest/gtest.h>

#include <set>

#include "meshrl/core.hpp"
#include "meshrl/random.hpp"

using namespace meshrl;

TEST(CarriedLoad, Examples) {
  EXPECT_DOUBLE_EQ(carried_load(20, 0.25), 15);
  EXPECT_DOUBLE_EQ(carried_load(20, 0), 20);
  EXPECT_DOUBLE_EQ(carried_load(5, 1.0), 0);
}

TEST(CarriedLoad, RejectsOutOfDomain) {
  EXPECT_THROW(carried_load(-1, 0.5), DomainError);
  EXPECT_THROW(carried_load(10, 1.5), DomainError);
  EXPECT_THROW(carried_load(10, -0.1), DomainError);
}

TEST(CarriedLoad, BoundedByOffered) {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double l = rng.uniform(0, 50), b = rng.uniform();
    const double c = carried_load(l, b);
    EXPECT_GE(c, 0);
    EXPECT_LE(c, l);
  }
  EXPECT_DOUBLE_EQ(carried_load(7, 0), 7);
  EXPECT_LT(carried_load(7, 1e-9), 7);
}

namespace {
MeshTopology two_service_topo() { return standard_topology(1); }
}

TEST(EnumerateActions, Sixteen) {
  ActionGrid g;
  g.b_levels = {0, 0.5};
  g.p_levels = {0, 1};
  g.c_levels = {2};
  EXPECT_EQ(enumerate_actions(g, two_service_topo()).size(), 16u);
}

TEST(EnumerateActions, Singleton) {
  ActionGrid g;
  g.b_levels = {0};
  g.p_levels = {0.5};
  g.c_levels = {1};
  g.scaling_active = true;
  const auto acts = enumerate_actions(g, two_service_topo());
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(acts[0].c, (std::vector<int>{1, 1}));
}

TEST(EnumerateActions, ScenarioFourGrid) {
  ActionGrid g;
  g.p_levels = {0, 0.25, 0.5, 0.75, 1};
  g.c_levels = {1, 2, 3, 4};
  g.blocking_active = false;
  g.scaling_active = true;
  const auto acts = enumerate_actions(g, standard_topology(4));
  EXPECT_EQ(acts.size(), 400u);
  for (const auto& a : acts) EXPECT_EQ(a.b, (std::vector<double>{0, 0}));
}

TEST(EnumerateActions, DeterministicAndOnGrid) {
  ActionGrid g;
  g.b_levels = {0, 0.3, 0.6};
  g.p_levels = {0, 0.5, 1};
  g.c_levels = {1, 4};
  const auto topo = two_service_topo();
  const auto a = enumerate_actions(g, topo), b = enumerate_actions(g, topo);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 81u);
  std::set<std::vector<double>> distinct;
  for (const auto& x : a) {
    for (double v : x.b) EXPECT_TRUE(std::count(g.b_levels.begin(), g.b_levels.end(), v));
    for (double v : x.p) EXPECT_TRUE(std::count(g.p_levels.begin(), g.p_levels.end(), v));
    EXPECT_EQ(x.c, (std::vector<int>{4, 4}));  // inactive: pinned at the maximum
    std::vector<double> key = x.b;
    key.insert(key.end(), x.p.begin(), x.p.end());
    distinct.insert(key);
  }
  EXPECT_EQ(distinct.size(), a.size());
}

TEST(ActionTable, IndexRoundTrip) {
  ActionGrid g;
  g.b_levels = {0, 0.2, 0.4};
  g.p_levels = {0, 0.5, 1};
  g.c_levels = {1, 2, 3};
  g.scaling_active = true;
  const ActionTable t(g, two_service_topo());
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(t.index_of(t[k]), k);
  ControlAction off = t[0];
  off.b[0] = 0.1;
  EXPECT_EQ(t.index_of(off), t.size());
}

TEST(ServiceCost, Examples) {
  const auto topo = two_service_topo();
  ControlAction a{{0, 0}, {0.5, 0.5}, {2, 3}};
  EXPECT_DOUBLE_EQ(service_cost(a, 0, topo), 5);
  a.c = {1, 1};
  EXPECT_DOUBLE_EQ(service_cost(a, 1, topo), 2);

  // A service whose only path avoids every scalable node.
  MeshTopology bare({{0, NodeRole::front}, {1, NodeRole::backend}, {2, NodeRole::backend}},
                    {{0, 1}, {0, 2}}, {{1, ServiceKind::information, 0.1, {{0, 1}}}}, {2});
  ControlAction b{{0}, {1}, {4}};
  EXPECT_DOUBLE_EQ(service_cost(b, 0, bare), 0);
}

TEST(Topology, RejectsMalformed) {
  auto svc = [](Path p) { return ServiceSpec{1, ServiceKind::information, 0.1, {p}}; };
  const std::vector<Node> nodes{{0, NodeRole::front}, {1, NodeRole::backend}};
  EXPECT_THROW(MeshTopology(nodes, {{0, 1}, {1, 0}}, {svc({0, 1})}, {}), ValidationError);
  EXPECT_THROW(MeshTopology(nodes, {}, {svc({0})}, {}), ValidationError);  // unreachable
  EXPECT_THROW(MeshTopology(nodes, {{0, 1}}, {svc({1})}, {}), ValidationError);
  EXPECT_THROW(MeshTopology({{0, NodeRole::backend}, {1, NodeRole::backend}}, {{0, 1}},
                            {svc({0, 1})}, {}),
               ValidationError);
  EXPECT_THROW(standard_topology(7), ValidationError);
  EXPECT_NO_THROW(MeshTopology(nodes, {{0, 1}}, {svc({0, 1})}, {1}));
}

TEST(Grid, ValidationAndHash) {
  ActionGrid g;
  g.b_levels = {0.5, 0.2};
  EXPECT_THROW(g.validate(), ValidationError);
  g.b_levels = {0, 1.2};
  EXPECT_THROW(g.validate(), ValidationError);
  ActionGrid a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.p_levels = {0.5, 1.0};
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.scaling_active = true;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Random, CounterHashIsPure) {
  EXPECT_EQ(hash_counter({1, 2, 3}), hash_counter({1, 2, 3}));
  EXPECT_NE(hash_counter({1, 2, 3}), hash_counter({1, 3, 2}));
  Rng a(9), b(9);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next(), b.next());
}

TEST(Random, NormalMoments) {
  double s = 0, ss = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double z = counter_normal(hash_counter({42, static_cast<std::uint64_t>(k)}));
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}
