#include <gtest/gtest.h>

#include <cmath>

#include "ksptrack/ksptrack.hpp"
#include "support/oracles.hpp"

using namespace ksptrack;

namespace {

Network make(std::size_t nodes, std::initializer_list<std::tuple<NodeId, NodeId, double>> edges) {
  Network g;
  g.node_count = nodes;
  g.source = 0;
  g.sink = static_cast<NodeId>(nodes - 1);
  for (auto [u, v, c] : edges) g.add_edge(u, v, c, EdgeKind::Tracklet);
  return g;
}

PathSet single(const Network& g, std::vector<EdgeId> p) {
  PathSet ps;
  ps.path_costs.push_back(path_cost(g, p));
  ps.total_cost = ps.path_costs.back();
  ps.paths.push_back(std::move(p));
  return ps;
}

// S=0, a=1, b=2, T=3: the shortest path S-a-b-T blocks both routes of the
// optimal pair {S-a-T, S-b-T}; the interlacing path runs b->a backwards.
Network crossing() {
  return make(4, {{0, 1, -1.0}, {1, 2, -1.0}, {2, 3, -1.0}, {0, 2, -0.75}, {1, 3, -0.75}});
}

}  // namespace

TEST(BellmanFord, Examples) {
  auto one = make(2, {{0, 1, -2.0}});
  EXPECT_DOUBLE_EQ(bellman_ford(one, 0).label[1], -2.0);
  auto two = make(3, {{0, 1, 0.0}, {1, 2, -1.0}, {0, 2, -3.0}});
  EXPECT_DOUBLE_EQ(bellman_ford(two, 0).label[2], -3.0);
  auto cut = make(3, {{0, 1, 1.0}});
  EXPECT_EQ(bellman_ford(cut, 0).label[2], kInfinity);
  EXPECT_EQ(bellman_ford(cut, 0).pred[2], kNoEdge);
}

TEST(BellmanFord, MatchesDynamicProgramming) {
  auto rng = seeded_rng(101, 0);
  for (int inst = 0; inst < 20; ++inst) {
    const auto g = oracle::random_dag(rng, 50, 0.1);
    const auto bf = bellman_ford(g, 0);
    const auto dp = oracle::dag_labels(g, 0);
    for (NodeId v = 0; v < g.node_count; ++v) {
      if (dp[v] == kInfinity)
        EXPECT_EQ(bf.label[v], kInfinity);
      else
        EXPECT_NEAR(bf.label[v], dp[v], 1e-9);
    }
    // predecessor tree reproduces the labels
    for (NodeId v = 1; v < g.node_count; ++v)
      if (bf.label[v] != kInfinity) EXPECT_NEAR(path_cost(g, extract_path(g, bf, v)), bf.label[v], 1e-9);
  }
}

TEST(Dijkstra, Examples) {
  auto chain = make(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 3.0}});
  EXPECT_DOUBLE_EQ(dijkstra(chain, 0).label[3], 6.0);
  auto cut = make(3, {{0, 1, 1.0}});
  EXPECT_EQ(dijkstra(cut, 0).label[2], kInfinity);
  auto tiny = make(2, {{0, 1, -1e-12}});
  EXPECT_EQ(dijkstra(tiny, 0).label[1], 0.0);
}

TEST(Dijkstra, AgreesWithBellmanFordOnNonnegativeGraphs) {
  auto rng = seeded_rng(102, 0);
  for (int inst = 0; inst < 20; ++inst) {
    const auto g = oracle::random_dag(rng, 40, 0.15, 0.0, 4.0);
    const auto a = dijkstra(g, 0), b = bellman_ford(g, 0);
    for (NodeId v = 0; v < g.node_count; ++v) {
      if (b.label[v] == kInfinity)
        EXPECT_EQ(a.label[v], kInfinity);
      else
        EXPECT_NEAR(a.label[v], b.label[v], 1e-9);
    }
  }
}

TEST(TransformCosts, Examples) {
  auto g = make(3, {{0, 1, 5.0}});
  const std::vector<double> labels{0.0, 1.0, 2.0};
  Network h = g;
  h.edges[0] = {1, 2, 5.0, EdgeKind::Tracklet};
  EXPECT_DOUBLE_EQ(transform_costs(h, labels).edges[0].cost, 4.0);

  auto rng = seeded_rng(103, 0);
  const auto r = oracle::random_dag(rng, 30, 0.2);
  const auto bf = bellman_ford(r, 0);
  const auto t = transform_costs(r, bf.label);
  for (NodeId v = 1; v < r.node_count; ++v)
    if (bf.pred[v] != kNoEdge) EXPECT_NEAR(t.edges[bf.pred[v]].cost, 0.0, 1e-12);  // tree edges are tight
  for (const auto& e : t.edges) EXPECT_GE(e.cost, -kReducedCostTolerance);

  // unreachable endpoints give unusable edges
  auto cut = make(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  const auto tc = transform_costs(cut, bellman_ford(cut, 0).label);
  EXPECT_EQ(tc.edges[1].cost, kInfinity);

  const std::vector<double> stale{0.0, 0.0, 10.0};
  EXPECT_THROW(transform_costs(h, stale), InvariantError);
}

TEST(ReverseAlong, Examples) {
  const auto g = make(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 3.0}, {0, 3, 9.0}});
  EXPECT_EQ(reverse_along(g, PathSet{}), g);
  const auto p = single(g, {0, 1, 2});
  const auto r = reverse_along(g, p);
  int flipped = 0;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (r.edges[e].from != g.edges[e].from) {
      ++flipped;
      EXPECT_EQ(r.edges[e].from, g.edges[e].to);
      EXPECT_EQ(r.edges[e].to, g.edges[e].from);
      EXPECT_EQ(r.edges[e].cost, -g.edges[e].cost);
    }
  EXPECT_EQ(flipped, 3);
  EXPECT_EQ(r.edges[3], g.edges[3]);
  EXPECT_EQ(reverse_along(r, p), g);
  EXPECT_THROW(reverse_along(g, single(g, {7})), ValidationError);
}

TEST(Augment, DisjointInterlacingIsAppended) {
  const auto g = make(4, {{0, 1, -1.0}, {1, 3, -1.0}, {0, 2, -1.0}, {2, 3, -1.0}});
  const auto p = single(g, {0, 1});
  const std::vector<EdgeId> extra{2, 3};
  const auto next = augment(p, extra, g);
  ASSERT_EQ(next.size(), 2u);
  EXPECT_EQ(next.paths[0], (std::vector<EdgeId>{0, 1}));
  EXPECT_EQ(next.paths[1], extra);
  EXPECT_DOUBLE_EQ(next.total_cost, -4.0);
}

TEST(Augment, CrossingSegmentIsCancelled) {
  const auto g = crossing();
  const auto first = single(g, {0, 1, 2});
  // interlacing path on the residual graph: S->b, b->a (reversed edge 1), a->T
  const std::vector<EdgeId> inter{3, 1, 4};
  const auto residual = reverse_along(g, first);
  EXPECT_DOUBLE_EQ(path_cost(residual, inter), -0.5);
  const auto next = augment(first, inter, g);
  ASSERT_EQ(next.size(), 2u);
  EXPECT_EQ(next.paths[0], (std::vector<EdgeId>{0, 4}));
  EXPECT_EQ(next.paths[1], (std::vector<EdgeId>{3, 2}));
  EXPECT_DOUBLE_EQ(next.total_cost, -3.5);
  EXPECT_EQ(check_path_set(g, next), "");
}

TEST(SolveKsp, CrossingTopology) {
  const auto ps = solve_ksp(crossing());
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_DOUBLE_EQ(ps.total_cost, -3.5);
}

TEST(SolveKsp, PositiveCostsKeepTheFirstPath) {
  const auto g = make(4, {{0, 1, 1.0}, {1, 3, 1.0}, {0, 2, 2.0}, {2, 3, 2.0}});
  const auto ps = solve_ksp(g);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_DOUBLE_EQ(ps.total_cost, 2.0);
  EXPECT_DOUBLE_EQ(oracle::best_disjoint_family(g).cost, 2.0);
}

TEST(SolveKsp, IndependentNegativePaths) {
  const auto g = make(4, {{0, 1, -1.0}, {1, 3, -1.0}, {0, 2, -2.0}, {2, 3, -1.0}});
  const auto ps = solve_ksp(g);
  EXPECT_EQ(ps.size(), 2u);
  EXPECT_DOUBLE_EQ(ps.total_cost, -5.0);
}

TEST(SolveKsp, EdgeCases) {
  EXPECT_TRUE(solve_ksp(make(3, {{0, 1, -1.0}})).empty());
  const auto g = make(4, {{0, 1, -1.0}, {1, 3, -1.0}, {0, 2, -2.0}, {2, 3, -1.0}});
  KspOptions cap;
  cap.l_max = 1;
  EXPECT_EQ(solve_ksp(g, cap).size(), 1u);
  cap.l_max = 0;
  EXPECT_TRUE(solve_ksp(g, cap).empty());
  Network bad = g;
  bad.sink = 9;
  EXPECT_THROW(solve_ksp(bad), ValidationError);
}

TEST(SolveKsp, MatchesExhaustiveEnumeration) {
  auto rng = seeded_rng(104, 0);
  int with_paths = 0, multi = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const auto g = oracle::random_tracking_dag(rng);
    const auto ref = oracle::best_disjoint_family(g);
    const auto ps = solve_ksp(g);
    ASSERT_EQ(check_path_set(g, ps), "") << "instance " << inst;
    if (!ref.any) {
      EXPECT_TRUE(ps.empty());
      continue;
    }
    ++with_paths;
    multi += ref.size > 1;
    EXPECT_NEAR(ps.total_cost, ref.cost, 1e-9) << "instance " << inst << "\n" << network_to_string(g);
    EXPECT_EQ(ps.size(), ref.size) << "instance " << inst;
  }
  EXPECT_GT(with_paths, 80);
  EXPECT_GT(multi, 20);
}

TEST(SolveKsp, EveryIterationKeepsReducedCostsAndOptimality) {
  auto rng = seeded_rng(105, 0);
  for (int inst = 0; inst < 50; ++inst) {
    const auto g = oracle::random_tracking_dag(rng, 16, 5);
    std::vector<double> prev_totals;
    KspOptions opts;
    opts.observer = [&](const KspIteration& it) {
      for (const auto& e : it.transformed->edges) ASSERT_GE(e.cost, -kReducedCostTolerance);
      ASSERT_TRUE(check_path_set(g, *it.current).empty());
      prev_totals.push_back(it.current->total_cost);
      if (it.interlacing.empty()) return;
      // the Dijkstra path is a shortest path of the residual graph
      const auto bf = bellman_ford(*it.residual, g.source);
      EXPECT_NEAR(it.interlacing_cost, bf.label[g.sink], 1e-9);
    };
    const auto ps = solve_ksp(g, opts);
    for (std::size_t i = 1; i < prev_totals.size(); ++i) EXPECT_LT(prev_totals[i], prev_totals[i - 1]);
    if (!prev_totals.empty()) EXPECT_DOUBLE_EQ(ps.total_cost, prev_totals.back());
  }
}

TEST(CheckPathSet, DetectsViolations) {
  const auto g = crossing();
  EXPECT_EQ(check_path_set(g, solve_ksp(g)), "");
  PathSet shared = single(g, {0, 1, 2});
  shared.paths.push_back({0, 4});
  shared.path_costs.push_back(path_cost(g, shared.paths[1]));
  shared.total_cost += shared.path_costs[1];
  EXPECT_NE(check_path_set(g, shared), "");
  EXPECT_NE(check_path_set(g, single(g, {0, 2})), "");  // not contiguous
  EXPECT_NE(check_path_set(g, single(g, {0, 1})), "");  // stops short of the sink
  auto wrong = single(g, {0, 1, 2});
  wrong.total_cost = 7.0;
  EXPECT_NE(check_path_set(g, wrong), "");
}

TEST(GraphDump, RoundTripAndSolve) {
  auto rng = seeded_rng(106, 0);
  for (int inst = 0; inst < 20; ++inst) {
    const auto g = oracle::random_tracking_dag(rng);
    const auto text = network_to_string(g);
    const auto back = network_from_string(text);
    EXPECT_EQ(back, g);
    EXPECT_EQ(network_to_string(back), text);
    EXPECT_EQ(solve_ksp(back).paths, solve_ksp(g).paths);
  }
  EXPECT_THROW(network_from_string("nodes 2\nsource 0\nsink 1\nedge bogus 0 1 1\n"), ValidationError);
  EXPECT_THROW(network_from_string("nodes 2\nsource 0\nsink 1\nedge tracklet 0 5 1\n"), ValidationError);
  EXPECT_THROW(network_from_string("edge tracklet 0 1 1\n"), ValidationError);
  const auto g = network_from_string("# comment\nnodes 3\nsource 0\nsink 2\n\nedge entrance 0 1 -1.5\nedge exit 1 2 0\n");
  EXPECT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0].kind, EdgeKind::Entrance);
  EXPECT_DOUBLE_EQ(solve_ksp(g).total_cost, -1.5);
}
