#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ksptrack/config.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/features.hpp"
#include "ksptrack/forest.hpp"
#include "ksptrack/hoof.hpp"
#include "ksptrack/ksp.hpp"
#include "ksptrack/lfda.hpp"
#include "ksptrack/network.hpp"
#include "ksptrack/superpixels.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

inline constexpr double kProbabilityEpsilon = 1e-6;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Log-odds cost -log(p / (1 - p)) with p clamped to [1e-6, 1 - 1e-6].
inline double probability_to_cost(double p) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return -std::log(p / (1.0 - p));
}

/// Ordered superpixel chain behind one tracklet edge; a single superpixel
/// until temporal merging concatenates chains along solved paths.
struct TrackletChain {
  std::vector<SuperpixelRef> members;
  friend bool operator==(const TrackletChain&, const TrackletChain&) = default;
};

/// Everything the edge costs and pruning rules read. Pointers are
/// non-owning; `forest` is optional and only used to score merged chains.
struct GraphInputs {
  const SuperpixelMap* superpixels = nullptr;
  const FeatureTable* features = nullptr;
  const HoofTable* hoof = nullptr;  // computed for `direction`
  const ObjectnessTable* rho = nullptr;
  const BaggedForest* forest = nullptr;
  const LfdaModel* lfda = nullptr;
  const PointAnnotations* points = nullptr;
  Config config;
  Direction direction = Direction::Forward;
};

/// Flow network for one time direction. Node layout: 0 = super-source,
/// 1..T = per-step pseudo-sources, then (v, w) per surviving tracklet in
/// order of first step, then the sink. "Step" is the frame index in the
/// graph's time direction.
struct FlowGraph {
  Direction direction = Direction::Forward;
  std::size_t steps = 0;
  Network network;
  std::vector<TrackletChain> tracklets;  // registry; pruned chains stay listed
  std::vector<NodeId> tracklet_in;       // kNoNode when pruned
  std::vector<NodeId> tracklet_out;
  std::vector<EdgeId> tracklet_edge;     // kNoEdge when pruned
  std::vector<std::int32_t> edge_tracklet;  // tracklet id of tracklet edges, -1 otherwise

  [[nodiscard]] NodeId super_source() const noexcept { return 0; }
  [[nodiscard]] NodeId pseudo_source(std::size_t step) const noexcept { return static_cast<NodeId>(1 + step); }
  [[nodiscard]] NodeId sink() const noexcept { return network.sink; }
  [[nodiscard]] std::size_t edge_count() const noexcept { return network.edges.size(); }
  [[nodiscard]] std::size_t step_of(std::uint32_t frame) const noexcept {
    return direction == Direction::Forward ? frame : steps - 1 - frame;
  }
};

namespace detail {

struct PendingEdge {
  Edge edge;
  std::int32_t tracklet;
};

}  // namespace detail

inline std::vector<TrackletChain> singleton_chains(const SuperpixelMap& sp, Direction dir) {
  std::vector<TrackletChain> chains;
  chains.reserve(sp.total());
  const std::size_t T = sp.frame_count();
  for (std::size_t s = 0; s < T; ++s) {
    const auto t = static_cast<std::uint32_t>(dir == Direction::Forward ? s : T - 1 - s);
    for (std::uint32_t n = 0; n < sp.count(t); ++n) chains.push_back({{{t, n}}});
  }
  return chains;
}

/// Objectness of a chain: rho itself for one superpixel; for merged chains
/// the forest's prediction on the members' mean feature (mean member rho if
/// no forest is supplied).
inline double chain_objectness(const GraphInputs& in, const TrackletChain& chain) {
  const auto& sp = *in.superpixels;
  if (chain.members.size() == 1) return in.rho->values[sp.global_index(chain.members.front())];
  if (in.forest == nullptr) {
    double s = 0.0;
    for (auto m : chain.members) s += in.rho->values[sp.global_index(m)];
    return s / static_cast<double>(chain.members.size());
  }
  std::vector<double> mean(static_cast<std::size_t>(in.features->dim()), 0.0);
  for (auto m : chain.members) {
    const auto row = in.features->row(sp.global_index(m));
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  for (auto& v : mean) v /= static_cast<double>(chain.members.size());
  return in.forest->predict(mean);
}

/// Cost of a transition from superpixel a (step s) to b (step s+1).
inline double transition_cost(const GraphInputs& in, SuperpixelRef a, SuperpixelRef b) {
  const auto& sp = *in.superpixels;
  return probability_to_cost(
      alpha(*in.lfda, in.features->row(sp.global_index(a)), in.features->row(sp.global_index(b))));
}

/// Tracklet cost: sum of member log-odds costs plus the transition costs
/// linking consecutive members.
inline double chain_cost(const GraphInputs& in, const TrackletChain& chain) {
  const auto& sp = *in.superpixels;
  double c = 0.0;
  for (std::size_t i = 0; i < chain.members.size(); ++i) {
    c += probability_to_cost(in.rho->values[sp.global_index(chain.members[i])]);
    if (i + 1 < chain.members.size()) c += transition_cost(in, chain.members[i], chain.members[i + 1]);
  }
  return c;
}

/// Builds the pruned, costed network over the given tracklet registry.
/// Throws ValidationError when no entrance edge survives.
inline FlowGraph build_graph(const GraphInputs& in, std::vector<TrackletChain> registry) {
  const auto& sp = *in.superpixels;
  const auto& cfg = in.config;
  if (in.features->rows() != sp.total() || in.rho->values.size() != sp.total() || in.hoof->rows() != sp.total())
    throw ValidationError("build_graph: inputs cover different superpixel sets");
  if (in.points->frame_count() != sp.frame_count())
    throw ValidationError("build_graph: annotations cover a different number of frames");

  FlowGraph g;
  g.direction = in.direction;
  g.steps = sp.frame_count();
  g.tracklets = std::move(registry);
  const std::size_t n_chains = g.tracklets.size();
  const double radius = cfg.radius * std::max(sp.width(), sp.height());
  const double radius2 = radius * radius;

  auto first_step = [&](std::size_t c) { return g.step_of(g.tracklets[c].members.front().frame); };
  auto last_step = [&](std::size_t c) { return g.step_of(g.tracklets[c].members.back().frame); };

  // Tracklet pruning and node assignment.
  std::vector<std::size_t> alive;
  for (std::size_t c = 0; c < n_chains; ++c) {
    if (g.tracklets[c].members.empty()) throw InvariantError("build_graph: empty tracklet chain");
    if (chain_objectness(in, g.tracklets[c]) >= cfg.tau_rho) alive.push_back(c);
  }
  std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) { return first_step(a) < first_step(b); });
  g.tracklet_in.assign(n_chains, kNoNode);
  g.tracklet_out.assign(n_chains, kNoNode);
  g.tracklet_edge.assign(n_chains, kNoEdge);
  NodeId next = static_cast<NodeId>(1 + g.steps);
  for (auto c : alive) {
    g.tracklet_in[c] = next++;
    g.tracklet_out[c] = next++;
  }
  g.network.node_count = next + 1;
  g.network.source = 0;
  g.network.sink = next;

  std::vector<detail::PendingEdge> pending;
  std::vector<std::size_t> entrances_per_step(g.steps, 0);

  // Entrance edges: the chain's first superpixel must have its centroid
  // within R of an annotation in that frame. With several annotations the
  // most similar one sets the cost.
  for (auto c : alive) {
    const auto head = g.tracklets[c].members.front();
    const auto r = sp.centroid(head);
    double best = kInfinity;
    for (const auto& p : in.points->in_frame(head.frame)) {
      const double dx = r.x - p.x;
      const double dy = r.y - p.y;
      if (dx * dx + dy * dy > radius2) continue;
      const auto annotated = sp.containing(head.frame, p);
      const double b = beta(*in.lfda, in.features->row(sp.global_index(head)), in.features->row(sp.global_index(annotated)));
      best = std::min(best, probability_to_cost(b));
    }
    if (best == kInfinity) continue;
    const auto s = first_step(c);
    pending.push_back({{g.pseudo_source(s), g.tracklet_in[c], best, EdgeKind::Entrance}, -1});
    ++entrances_per_step[s];
  }
  std::size_t total_entrances = 0;
  for (std::size_t s = 0; s < g.steps; ++s) {
    total_entrances += entrances_per_step[s];
    for (std::size_t k = 0; k < entrances_per_step[s]; ++k)
      pending.push_back({{g.super_source(), g.pseudo_source(s), 0.0, EdgeKind::SourceLink}, -1});
  }
  if (total_entrances == 0)
    throw ValidationError("build_graph: no entrance edge survives pruning (" + std::string(to_string(in.direction)) +
                          " pass); increase the radius R");

  for (auto c : alive)
    pending.push_back({{g.tracklet_in[c], g.tracklet_out[c], chain_cost(in, g.tracklets[c]), EdgeKind::Tracklet},
                       static_cast<std::int32_t>(c)});

  // Transition edges between chains ending at step s and chains starting at s+1.
  std::vector<std::vector<std::size_t>> starting(g.steps);
  for (auto c : alive) starting[first_step(c)].push_back(c);
  for (auto a : alive) {
    const auto s = last_step(a);
    if (s + 1 >= g.steps) continue;
    const auto tail = g.tracklets[a].members.back();
    const auto ra = sp.centroid(tail);
    const auto ua = in.hoof->row(sp.global_index(tail));
    for (auto b : starting[s + 1]) {
      const auto head = g.tracklets[b].members.front();
      const auto rb = sp.centroid(head);
      const double dx = rb.x - ra.x;
      const double dy = rb.y - ra.y;
      if (dx * dx + dy * dy > radius2) continue;
      if (histogram_intersection(ua, in.hoof->row(sp.global_index(head))) < cfg.tau_u) continue;
      pending.push_back(
          {{g.tracklet_out[a], g.tracklet_in[b], transition_cost(in, tail, head), EdgeKind::Transition}, -1});
    }
  }

  for (auto c : alive) pending.push_back({{g.tracklet_out[c], g.network.sink, 0.0, EdgeKind::Exit}, -1});

  // Edge ids follow the topological order of their tails.
  std::stable_sort(pending.begin(), pending.end(),
                   [](const detail::PendingEdge& a, const detail::PendingEdge& b) { return a.edge.from < b.edge.from; });
  g.network.edges.reserve(pending.size());
  g.edge_tracklet.reserve(pending.size());
  for (const auto& pe : pending) {
    const auto id = g.network.add_edge(pe.edge.from, pe.edge.to, pe.edge.cost, pe.edge.kind);
    g.edge_tracklet.push_back(pe.tracklet);
    if (pe.tracklet >= 0) g.tracklet_edge[static_cast<std::size_t>(pe.tracklet)] = id;
  }
  return g;
}

inline FlowGraph build_graph(const GraphInputs& in) {
  return build_graph(in, singleton_chains(*in.superpixels, in.direction));
}

/// Tracklet ids traversed by each path, in path order.
inline std::vector<std::vector<std::size_t>> path_tracklets(const FlowGraph& g, const PathSet& paths) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& p : paths.paths) {
    auto& ids = out.emplace_back();
    for (auto e : p)
      if (g.edge_tracklet.at(e) >= 0) ids.push_back(static_cast<std::size_t>(g.edge_tracklet[e]));
  }
  return out;
}

/// Global indices (sorted, unique) of all superpixels covered by the paths.
inline std::vector<std::size_t> path_superpixels(const FlowGraph& g, const PathSet& paths, const SuperpixelMap& sp) {
  std::vector<std::size_t> out;
  for (const auto& ids : path_tracklets(g, paths))
    for (auto c : ids)
      for (auto m : g.tracklets[c].members) out.push_back(sp.global_index(m));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Registry after merging: the chains along each path are concatenated into
/// one chain; untouched chains keep their relative order after the merged ones.
inline std::vector<TrackletChain> merge_chains(const FlowGraph& g, const PathSet& paths) {
  std::vector<TrackletChain> merged;
  std::vector<bool> used(g.tracklets.size(), false);
  for (const auto& ids : path_tracklets(g, paths)) {
    if (ids.empty()) continue;
    TrackletChain chain;
    for (auto c : ids) {
      used[c] = true;
      chain.members.insert(chain.members.end(), g.tracklets[c].members.begin(), g.tracklets[c].members.end());
    }
    merged.push_back(std::move(chain));
  }
  for (std::size_t c = 0; c < g.tracklets.size(); ++c)
    if (!used[c]) merged.push_back(g.tracklets[c]);
  return merged;
}

/// Concatenates the tracklets of every path into a single tracklet whose
/// cost is the sum of its tracklet and transition costs, then rebuilds the
/// network with `in` (entrance rule on the first superpixel, transitions
/// out of the last and into the first).
inline FlowGraph temporal_merge(const FlowGraph& g, const PathSet& paths, const GraphInputs& in) {
  return build_graph(in, merge_chains(g, paths));
}

}  // namespace ksptrack
