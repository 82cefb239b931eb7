#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ksptrack/errors.hpp"
#include "ksptrack/network.hpp"

namespace ksptrack {

inline constexpr EdgeId kNoEdge = std::numeric_limits<EdgeId>::max();
inline constexpr double kReducedCostTolerance = 1e-9;

/// Shortest-path labels L(.) and the predecessor edge of every node.
/// Unreachable nodes carry +inf and kNoEdge.
struct ShortestPathTree {
  std::vector<double> label;
  std::vector<EdgeId> pred;
};

/// Edge-disjoint source -> sink paths, as edge id sequences.
struct PathSet {
  std::vector<std::vector<EdgeId>> paths;
  std::vector<double> path_costs;
  double total_cost = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return paths.size(); }
  [[nodiscard]] bool empty() const noexcept { return paths.empty(); }
};

inline double path_cost(const Network& g, std::span<const EdgeId> path) {
  double c = 0.0;
  for (auto e : path) c += g.edges[e].cost;
  return c;
}

/// Generic label-correcting shortest paths; handles negative costs. Passes
/// over the edge list in id order until a fixed point.
inline ShortestPathTree bellman_ford(const Network& g, NodeId source) {
  ShortestPathTree t{std::vector<double>(g.node_count, kInfinity), std::vector<EdgeId>(g.node_count, kNoEdge)};
  t.label[source] = 0.0;
  for (std::size_t pass = 0;; ++pass) {
    bool changed = false;
    for (EdgeId e = 0; e < g.edges.size(); ++e) {
      const auto& ed = g.edges[e];
      if (t.label[ed.from] == kInfinity || ed.cost == kInfinity) continue;
      const double cand = t.label[ed.from] + ed.cost;
      if (cand < t.label[ed.to]) {
        t.label[ed.to] = cand;
        t.pred[ed.to] = e;
        changed = true;
      }
    }
    if (!changed) break;
    if (pass + 1 >= g.node_count) throw InvariantError("bellman_ford: negative cycle reachable from the source");
  }
  return t;
}

/// Dijkstra with a binary heap over reduced costs (as produced by
/// transform_costs). Rounding negatives are treated as 0; +inf edges are
/// ignored.
inline ShortestPathTree dijkstra(const Network& g, NodeId source) {
  const auto out = g.out_edges();
  ShortestPathTree t{std::vector<double>(g.node_count, kInfinity), std::vector<EdgeId>(g.node_count, kNoEdge)};
  std::vector<bool> done(g.node_count, false);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  t.label[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    for (auto e : out[u]) {
      const auto& ed = g.edges[e];
      if (ed.cost == kInfinity) continue;
      const double cand = d + std::max(0.0, ed.cost);
      if (cand < t.label[ed.to]) {
        t.label[ed.to] = cand;
        t.pred[ed.to] = e;
        heap.emplace(cand, ed.to);
      }
    }
  }
  return t;
}

/// Edge ids from the tree root to `target`; empty when unreachable.
inline std::vector<EdgeId> extract_path(const Network& g, const ShortestPathTree& t, NodeId target) {
  std::vector<EdgeId> path;
  if (t.label[target] == kInfinity) return path;
  for (NodeId v = target; t.pred[v] != kNoEdge; v = g.edges[t.pred[v]].from) {
    path.push_back(t.pred[v]);
    if (path.size() > g.edges.size()) throw InvariantError("extract_path: predecessor cycle");
  }
  std::reverse(path.begin(), path.end());
  return path;
}

/// Reduced costs C + L(u) - L(v). Edges touching a node with an infinite
/// label are unusable and get +inf. Every other reduced cost must be
/// >= -1e-9 relative to the magnitudes involved, otherwise the labels are stale.
inline Network transform_costs(const Network& g, std::span<const double> labels) {
  if (labels.size() != g.node_count) throw InvariantError("transform_costs: label count mismatch");
  Network r = g;
  for (auto& e : r.edges) {
    if (labels[e.from] == kInfinity || labels[e.to] == kInfinity) {
      e.cost = kInfinity;
      continue;
    }
    const double scale = std::max({1.0, std::abs(e.cost), std::abs(labels[e.from]), std::abs(labels[e.to])});
    e.cost = e.cost + labels[e.from] - labels[e.to];
    if (e.cost < -kReducedCostTolerance * scale)
      throw InvariantError("transform_costs: reduced cost " + std::to_string(e.cost) + " on edge " +
                           std::to_string(e.from) + "->" + std::to_string(e.to) + " (stale labels)");
  }
  return r;
}

namespace detail {
inline std::vector<bool> occupied_edges(const Network& g, const PathSet& paths) {
  std::vector<bool> occ(g.edges.size(), false);
  for (const auto& p : paths.paths)
    for (auto e : p) {
      if (e >= g.edges.size()) throw ValidationError("path references missing edge " + std::to_string(e));
      if (occ[e]) throw InvariantError("paths are not edge-disjoint at edge " + std::to_string(e));
      occ[e] = true;
    }
  return occ;
}
}  // namespace detail

/// Flips every edge occupied by `paths` (u->v becomes v->u) and negates its cost.
inline Network reverse_along(const Network& g, const PathSet& paths) {
  const auto occ = detail::occupied_edges(g, paths);
  Network r = g;
  for (EdgeId e = 0; e < r.edges.size(); ++e)
    if (occ[e]) {
      std::swap(r.edges[e].from, r.edges[e].to);
      r.edges[e].cost = -r.edges[e].cost;
    }
  return r;
}

/// Splits a set of edges carrying unit flow into source -> sink paths by
/// walking lowest-id successor edges from the source.
inline PathSet decompose_flow(const Network& g, const std::vector<bool>& occupied) {
  std::vector<std::vector<EdgeId>> out(g.node_count);
  std::size_t remaining = 0;
  for (EdgeId e = 0; e < g.edges.size(); ++e)
    if (occupied[e]) {
      out[g.edges[e].from].push_back(e);
      ++remaining;
    }
  std::vector<std::size_t> cursor(g.node_count, 0);
  PathSet ps;
  while (cursor[g.source] < out[g.source].size()) {
    std::vector<EdgeId> path;
    NodeId v = g.source;
    while (v != g.sink || path.empty()) {
      if (cursor[v] >= out[v].size())
        throw InvariantError("augment: flow decomposition stuck at node " + std::to_string(v));
      const EdgeId e = out[v][cursor[v]++];
      path.push_back(e);
      v = g.edges[e].to;
      if (path.size() > g.edges.size()) throw InvariantError("augment: cycle in flow decomposition");
    }
    remaining -= path.size();
    const double c = path_cost(g, path);
    ps.paths.push_back(std::move(path));
    ps.path_costs.push_back(c);
    ps.total_cost += c;
  }
  if (remaining != 0) throw InvariantError("augment: occupied edges left over after decomposition");
  return ps;
}

/// Combines the current path set with an interlacing path found on the
/// reversed graph: interlacing edges that run against an occupied edge
/// cancel it, the others are added. The result is re-split into paths.
inline PathSet augment(const PathSet& paths, std::span<const EdgeId> interlacing, const Network& g_original) {
  auto occ = detail::occupied_edges(g_original, paths);
  for (auto e : interlacing) {
    if (e >= occ.size()) throw ValidationError("augment: interlacing path references missing edge");
    occ[e] = !occ[e];
  }
  auto result = decompose_flow(g_original, occ);
  if (result.size() != paths.size() + 1)
    throw InvariantError("augment: expected " + std::to_string(paths.size() + 1) + " paths, got " +
                         std::to_string(result.size()));
  return result;
}

/// Snapshot handed to the solver observer on every interlacing search.
struct KspIteration {
  std::size_t paths_before = 0;
  const PathSet* current = nullptr;
  const Network* residual = nullptr;     // after reverse_along, original signs
  const Network* transformed = nullptr;  // after transform_costs
  const std::vector<double>* labels = nullptr;
  std::vector<EdgeId> interlacing;       // empty when the sink is unreachable
  double interlacing_cost = 0.0;         // under residual costs
};

struct KspOptions {
  std::size_t l_max = 200;
  std::function<void(const KspIteration&)> observer;
};

/// Edge-disjoint K shortest paths. Starts from the Bellman-Ford shortest
/// path, then repeatedly reverses occupied edges, reweights with the current
/// labels, finds the interlacing path with Dijkstra and augments. Stops as
/// soon as the total cost would not decrease, or at l_max paths.
inline PathSet solve_ksp(const Network& g, const KspOptions& opts = {}) {
  if (g.source >= g.node_count || g.sink >= g.node_count) throw ValidationError("solve_ksp: bad source/sink");
  const auto bf = bellman_ford(g, g.source);
  if (bf.label[g.sink] == kInfinity || opts.l_max == 0) return {};
  PathSet current;
  current.paths.push_back(extract_path(g, bf, g.sink));
  current.path_costs.push_back(path_cost(g, current.paths.back()));
  current.total_cost = current.path_costs.back();

  std::vector<double> labels = bf.label;
  while (current.size() < opts.l_max) {
    const Network residual = reverse_along(g, current);
    const Network reduced = transform_costs(residual, labels);
    const auto tree = dijkstra(reduced, g.source);
    KspIteration it;
    it.paths_before = current.size();
    it.current = &current;
    it.residual = &residual;
    it.transformed = &reduced;
    it.labels = &labels;
    if (tree.label[g.sink] == kInfinity) {
      if (opts.observer) opts.observer(it);
      break;
    }
    it.interlacing = extract_path(reduced, tree, g.sink);
    it.interlacing_cost = path_cost(residual, it.interlacing);
    if (opts.observer) opts.observer(it);

    auto next = augment(current, it.interlacing, g);
    if (next.total_cost >= current.total_cost) break;
    current = std::move(next);
    for (std::size_t v = 0; v < labels.size(); ++v)
      labels[v] = tree.label[v] == kInfinity ? kInfinity : labels[v] + tree.label[v];
  }
  return current;
}

/// Structural feasibility of a path set: unit capacities, conservation at
/// every node but source and sink, all emitted flow reaching the sink, and
/// consistent costs. Returns an empty string when feasible.
inline std::string check_path_set(const Network& g, const PathSet& ps) {
  std::vector<int> flow(g.edges.size(), 0);
  for (std::size_t k = 0; k < ps.paths.size(); ++k) {
    const auto& p = ps.paths[k];
    if (p.empty()) return "path " + std::to_string(k) + " is empty";
    NodeId v = g.source;
    for (auto e : p) {
      if (e >= g.edges.size()) return "path " + std::to_string(k) + " references missing edge";
      if (g.edges[e].from != v) return "path " + std::to_string(k) + " is not contiguous";
      v = g.edges[e].to;
      if (++flow[e] > 1) return "edge " + std::to_string(e) + " carries more than unit flow";
    }
    if (v != g.sink) return "path " + std::to_string(k) + " does not end at the sink";
  }
  std::vector<long> balance(g.node_count, 0);
  for (EdgeId e = 0; e < g.edges.size(); ++e) {
    balance[g.edges[e].from] -= flow[e];
    balance[g.edges[e].to] += flow[e];
  }
  const auto k = static_cast<long>(ps.paths.size());
  for (NodeId v = 0; v < g.node_count; ++v) {
    const long expected = v == g.source ? -k : (v == g.sink ? k : 0);
    if (balance[v] != expected) return "flow conservation violated at node " + std::to_string(v);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < ps.paths.size(); ++i) {
    const double c = path_cost(g, ps.paths[i]);
    if (std::abs(c - ps.path_costs.at(i)) > 1e-9 * std::max(1.0, std::abs(c))) return "path cost mismatch";
    total += c;
  }
  if (std::abs(total - ps.total_cost) > 1e-9 * std::max(1.0, std::abs(total))) return "total cost mismatch";
  return {};
}

}  // namespace ksptrack
