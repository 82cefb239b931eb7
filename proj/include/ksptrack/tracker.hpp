#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ksptrack/config.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/features.hpp"
#include "ksptrack/forest.hpp"
#include "ksptrack/graph.hpp"
#include "ksptrack/hoof.hpp"
#include "ksptrack/ksp.hpp"
#include "ksptrack/lfda.hpp"
#include "ksptrack/optical_flow.hpp"
#include "ksptrack/rng.hpp"
#include "ksptrack/superpixels.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Preprocessed per-sequence inputs shared by both directions.
struct TrackerInputs {
  SuperpixelMap superpixels;
  FlowField flow;  // forward fields, frame t -> t+1
  FeatureTable features;
  PointAnnotations points{0};
};

/// Binary segmentation at superpixel resolution: one flag per global index.
struct Segmentation {
  std::vector<std::uint8_t> positive;

  [[nodiscard]] std::size_t count() const {
    std::size_t n = 0;
    for (auto v : positive) n += v;
    return n;
  }
  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

/// Pixel mask of frame t, 1 = object.
inline std::vector<std::uint8_t> render_mask(const SuperpixelMap& sp, const Segmentation& seg, std::size_t t) {
  const auto& labels = sp.labels(t);
  const auto offset = sp.frame_offset(t);
  std::vector<std::uint8_t> mask(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = seg.positive.at(offset + labels[i]);
  return mask;
}

inline std::vector<std::vector<std::uint8_t>> render_masks(const SuperpixelMap& sp, const Segmentation& seg) {
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t t = 0; t < sp.frame_count(); ++t) out.push_back(render_mask(sp, seg, t));
  return out;
}

inline Segmentation segmentation_union(const Segmentation& a, const Segmentation& b) {
  if (a.positive.size() != b.positive.size()) throw ValidationError("segmentation_union: size mismatch");
  Segmentation out{a.positive};
  for (std::size_t i = 0; i < out.positive.size(); ++i) out.positive[i] |= b.positive[i];
  return out;
}

struct IterationRecord {
  Direction direction = Direction::Forward;
  int iteration = 0;
  std::size_t k = 0;
  double total_cost = 0.0;
  std::size_t phi = 0;
  std::size_t edges = 0;
  std::size_t edges_refreshed = 0;  // old registry, retrained costs; 0 after the last iteration
  std::size_t edges_merged = 0;     // merged registry, retrained costs; 0 after the last iteration
};

inline void write_record(std::ostream& os, const IterationRecord& r) {
  os << "{\"direction\":\"" << to_string(r.direction) << "\",\"iteration\":" << r.iteration << ",\"k\":" << r.k
     << ",\"total_cost\":" << (std::isfinite(r.total_cost) ? r.total_cost : 0.0) << ",\"phi\":" << r.phi
     << ",\"edges\":" << r.edges << ",\"edges_refreshed\":" << r.edges_refreshed
     << ",\"edges_merged\":" << r.edges_merged << "}\n";
}

struct DirectionResult {
  Direction direction = Direction::Forward;
  Segmentation segmentation;
  PathSet paths;              // final solve
  FlowGraph graph;            // graph of the final solve
  ObjectnessTable rho;        // last foreground model
  std::vector<IterationRecord> history;
  int iterations = 0;
  bool converged = false;     // phi stopped changing before the cap
  std::vector<std::string> warnings;
};

/// Models and graph inputs for one direction at one outer iteration.
class DirectionState {
 public:
  DirectionState(const TrackerInputs& in, const Config& cfg, Direction dir)
      : in_(in), cfg_(cfg), dir_(dir), hoof_(hoof(in.flow, in.superpixels, cfg.hoof_bins, dir)),
        split_(split_samples(in.superpixels, in.points)) {}

  /// Retrains forest and LFDA for `iteration` on the current split.
  void train(int iteration) {
    const auto d = static_cast<std::uint64_t>(dir_);
    const auto it = static_cast<std::uint64_t>(iteration);
    forest_ = train_forest(split_, in_.features, cfg_, d, it);
    rho_ = predict_objectness(forest_, in_.features);
    auto rng = seeded_rng(cfg_.rng_seed, stream_key(StreamPurpose::Lfda, d, it, 0));
    lfda_ = fit_lfda(in_.features, rho_, cfg_, rng);
  }

  void add_positives(std::span<const std::size_t> globals) { split_ = augment_positives(std::move(split_), globals); }

  [[nodiscard]] GraphInputs graph_inputs() const {
    GraphInputs g;
    g.superpixels = &in_.superpixels;
    g.features = &in_.features;
    g.hoof = &hoof_;
    g.rho = &rho_;
    g.forest = &forest_;
    g.lfda = &lfda_;
    g.points = &in_.points;
    g.config = cfg_;
    g.direction = dir_;
    return g;
  }

  [[nodiscard]] const ObjectnessTable& rho() const noexcept { return rho_; }
  [[nodiscard]] const SampleSplit& split() const noexcept { return split_; }
  [[nodiscard]] const HoofTable& hoof_table() const noexcept { return hoof_; }

 private:
  const TrackerInputs& in_;
  Config cfg_;
  Direction dir_;
  HoofTable hoof_;
  SampleSplit split_;
  BaggedForest forest_;
  ObjectnessTable rho_;
  LfdaModel lfda_;
};

/// Outer loop for one direction: solve, stop when no new superpixels were
/// covered, otherwise augment positives, retrain, merge and re-solve.
/// phi is the number of distinct superpixels covered by all paths so far.
inline DirectionResult run_direction(const TrackerInputs& in, const Config& cfg, Direction dir,
                                     std::ostream* diagnostics = nullptr) {
  validate(cfg);
  const auto& sp = in.superpixels;
  if (in.features.rows() != sp.total()) throw ValidationError("run_direction: features do not cover all superpixels");
  if (in.points.frame_count() != sp.frame_count())
    throw ValidationError("run_direction: annotations cover " + std::to_string(in.points.frame_count()) +
                          " frames, sequence has " + std::to_string(sp.frame_count()));

  DirectionResult res;
  res.direction = dir;
  res.segmentation.positive.assign(sp.total(), 0);

  DirectionState state(in, cfg, dir);
  state.train(0);
  FlowGraph graph = build_graph(state.graph_inputs());
  std::size_t phi_prev = 0;

  for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
    KspOptions opts;
    opts.l_max = static_cast<std::size_t>(cfg.l_max);
    PathSet paths = solve_ksp(graph.network, opts);
    if (auto err = check_path_set(graph.network, paths); !err.empty())
      throw InvariantError("run_direction: infeasible path set: " + err);
    const auto covered = path_superpixels(graph, paths, sp);
    for (auto g : covered) res.segmentation.positive[g] = 1;
    const std::size_t phi = res.segmentation.count();

    IterationRecord rec;
    rec.direction = dir;
    rec.iteration = iter;
    rec.k = paths.size();
    rec.total_cost = paths.total_cost;
    rec.phi = phi;
    rec.edges = graph.edge_count();
    res.iterations = iter + 1;
    res.rho = state.rho();

    if (paths.empty() && iter == 0)
      res.warnings.push_back(std::string(to_string(dir)) + ": no path found at iteration 0; empty segmentation");

    const bool stop = phi == phi_prev;
    const bool last = iter + 1 == cfg.max_outer_iters;
    if (!stop && !last) {
      state.add_positives(covered);
      state.train(iter + 1);
      const auto gi = state.graph_inputs();
      rec.edges_refreshed = build_graph(gi, graph.tracklets).edge_count();
      FlowGraph merged = temporal_merge(graph, paths, gi);
      rec.edges_merged = merged.edge_count();
      res.paths = std::move(paths);
      res.graph = std::move(graph);
      graph = std::move(merged);
    } else {
      res.paths = std::move(paths);
      res.graph = std::move(graph);
    }
    res.history.push_back(rec);
    if (diagnostics) write_record(*diagnostics, rec);
    if (stop) {
      res.converged = true;
      break;
    }
    phi_prev = phi;
  }
  return res;
}

struct TrackerResult {
  Segmentation segmentation;  // forward union backward
  ObjectnessTable rho;        // mean of the two directions' final rho
  DirectionResult forward;
  DirectionResult backward;
};

inline TrackerResult run_bidirectional(const TrackerInputs& in, const Config& cfg, std::ostream* diagnostics = nullptr) {
  TrackerResult r;
  r.forward = run_direction(in, cfg, Direction::Forward, diagnostics);
  r.backward = run_direction(in, cfg, Direction::Backward, diagnostics);
  r.segmentation = segmentation_union(r.forward.segmentation, r.backward.segmentation);
  r.rho.values.resize(r.forward.rho.values.size());
  for (std::size_t i = 0; i < r.rho.values.size(); ++i)
    r.rho.values[i] = 0.5 * (r.forward.rho.values[i] + r.backward.rho.values[i]);
  return r;
}

/// Builds superpixels, flow and built-in features for a sequence; any of
/// them can be supplied precomputed instead.
inline TrackerInputs prepare_inputs(const ImageSequence& seq, PointAnnotations pts, const Config& cfg,
                                    std::optional<SuperpixelMap> superpixels = std::nullopt,
                                    std::optional<FlowField> flow = std::nullopt,
                                    std::optional<FeatureTable> features = std::nullopt) {
  validate(cfg);
  if (pts.frame_count() != seq.frame_count())
    throw ValidationError("annotations cover " + std::to_string(pts.frame_count()) + " frames, sequence has " +
                          std::to_string(seq.frame_count()));
  pts.check_bounds(seq.width(), seq.height());
  TrackerInputs in;
  in.superpixels = superpixels ? std::move(*superpixels)
                               : slic_superpixels(seq, cfg.n_superpixels_per_frame, cfg.slic_compactness);
  in.flow = flow ? std::move(*flow) : horn_schunck_flow(seq, cfg.flow_alpha, cfg.flow_iters);
  in.features = features ? std::move(*features)
                         : aggregate_features(builtin_pixel_features(seq, in.flow), in.superpixels);
  if (in.features.rows() != in.superpixels.total())
    throw ValidationError("features cover " + std::to_string(in.features.rows()) + " superpixels, expected " +
                          std::to_string(in.superpixels.total()));
  in.points = std::move(pts);
  return in;
}

}  // namespace ksptrack
