#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ksptrack/errors.hpp"

namespace ksptrack {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

enum class EdgeKind : std::uint8_t { SourceLink, Entrance, Tracklet, Transition, Exit };

inline std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::SourceLink: return "source-link";
    case EdgeKind::Entrance: return "entrance";
    case EdgeKind::Tracklet: return "tracklet";
    case EdgeKind::Transition: return "transition";
    case EdgeKind::Exit: return "exit";
  }
  return "?";
}

inline EdgeKind parse_edge_kind(std::string_view s) {
  for (auto k : {EdgeKind::SourceLink, EdgeKind::Entrance, EdgeKind::Tracklet, EdgeKind::Transition, EdgeKind::Exit})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown edge kind '" + std::string(s) + "'");
}

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  double cost = 0.0;
  EdgeKind kind = EdgeKind::Tracklet;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed multigraph with unit-capacity edges, one source and one sink.
/// Edge ids are positions in `edges` and stay stable under reversal.
struct Network {
  std::size_t node_count = 0;
  NodeId source = 0;
  NodeId sink = 0;
  std::vector<Edge> edges;

  EdgeId add_edge(NodeId from, NodeId to, double cost, EdgeKind kind) {
    edges.push_back({from, to, cost, kind});
    return static_cast<EdgeId>(edges.size() - 1);
  }

  /// Outgoing edge ids per node, in increasing edge id.
  [[nodiscard]] std::vector<std::vector<EdgeId>> out_edges() const {
    std::vector<std::vector<EdgeId>> out(node_count);
    for (EdgeId e = 0; e < edges.size(); ++e) out[edges[e].from].push_back(e);
    return out;
  }

  friend bool operator==(const Network&, const Network&) = default;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Text dump, one record per line:
//   nodes N
//   source S
//   sink X
//   edge <kind> <u> <v> <cost>
// Blank lines and lines starting with '#' are ignored.

inline void write_network(std::ostream& os, const Network& g) {
  os << "nodes " << g.node_count << '\n' << "source " << g.source << '\n' << "sink " << g.sink << '\n';
  char buf[64];
  for (const auto& e : g.edges) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), e.cost);
    os << "edge " << to_string(e.kind) << ' ' << e.from << ' ' << e.to << ' ' << std::string_view(buf, ptr - buf)
       << '\n';
  }
}

inline std::string network_to_string(const Network& g) {
  std::ostringstream os;
  write_network(os, g);
  return os.str();
}

inline Network read_network(std::istream& is) {
  Network g;
  bool have_nodes = false, have_source = false, have_sink = false;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ValidationError("graph line " + std::to_string(line_no) + ": " + msg);
  };
  auto number = [&](std::string_view tok, auto& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad number '" + std::string(tok) + "'");
  };
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head) || head[0] == '#') continue;
    std::string a, b, c, d;
    if (head == "nodes") {
      ls >> a;
      number(a, g.node_count);
      have_nodes = true;
    } else if (head == "source") {
      ls >> a;
      number(a, g.source);
      have_source = true;
    } else if (head == "sink") {
      ls >> a;
      number(a, g.sink);
      have_sink = true;
    } else if (head == "edge") {
      if (!(ls >> a >> b >> c >> d)) fail("expected 'edge kind u v cost'");
      Edge e;
      e.kind = parse_edge_kind(a);
      number(b, e.from);
      number(c, e.to);
      number(d, e.cost);
      g.edges.push_back(e);
    } else {
      fail("unknown record '" + head + "'");
    }
  }
  if (!have_nodes || !have_source || !have_sink) throw ValidationError("graph: missing nodes/source/sink header");
  if (g.source >= g.node_count || g.sink >= g.node_count) throw ValidationError("graph: source or sink out of range");
  for (const auto& e : g.edges)
    if (e.from >= g.node_count || e.to >= g.node_count) throw ValidationError("graph: edge endpoint out of range");
  return g;
}

inline Network network_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_network(is);
}

}  // namespace ksptrack
