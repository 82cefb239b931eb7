#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ksptrack/ksptrack.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ksptrack;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInvariant = 3;

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + p.string());
  return os;
}

json scores_json(const Scores& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

// Per-pixel objectness as 8-bit maps: value v encodes rho in [v/255, (v+1)/255).
std::vector<std::vector<std::uint8_t>> score_maps(const SuperpixelMap& sp, const ObjectnessTable& rho) {
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t t = 0; t < sp.frame_count(); ++t) {
    const auto& labels = sp.labels(t);
    const auto off = sp.frame_offset(t);
    auto& m = out.emplace_back(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      m[i] = static_cast<std::uint8_t>(std::max(0, thresholds_reached(rho.values[off + labels[i]]) - 1));
  }
  return out;
}

struct SegmentArgs {
  std::string frames, points, config, superpixels, flow, features, out;
  bool overlay = false;
};

void run_segment(const SegmentArgs& a) {
  const Config cfg = a.config.empty() ? Config{} : load_config(a.config);
  const auto seq = load_sequence(a.frames);
  auto pts = load_annotations(a.points, seq.frame_count(), seq.width(), seq.height());

  std::optional<SuperpixelMap> sp;
  std::optional<FlowField> flow;
  std::optional<FeatureTable> feats;
  if (!a.superpixels.empty()) sp = ingest_superpixels(a.superpixels, seq);
  if (!a.flow.empty()) flow = read_flow(a.flow, seq);
  if (!a.features.empty()) {
    if (!sp) throw ValidationError("--features needs --superpixels (FEAT rows are indexed by an SPLM)");
    feats = read_feat(a.features, *sp);
  }
  const auto in = prepare_inputs(seq, std::move(pts), cfg, std::move(sp), std::move(flow), std::move(feats));

  const fs::path out(a.out);
  fs::create_directories(out);
  auto diag = open_out(out / "diagnostics.jsonl");
  const auto result = run_bidirectional(in, cfg, &diag);
  for (const auto* d : {&result.forward, &result.backward})
    for (const auto& w : d->warnings) std::cerr << "warning: " << w << '\n';

  const auto masks = render_masks(in.superpixels, result.segmentation);
  write_masks_png((out / "masks").string(), seq.width(), seq.height(), masks);

  const auto scores = score_maps(in.superpixels, result.rho);
  fs::create_directories(out / "scores");
  for (std::size_t t = 0; t < scores.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "score_%04zu.png", t);
    write_png((out / "scores" / name).string(), seq.width(), seq.height(), 1, scores[t]);
  }

  auto rho = open_out(out / "rho.csv");
  rho << "frame,superpixel,rho,selected\n";
  for (std::size_t t = 0; t < in.superpixels.frame_count(); ++t)
    for (std::uint32_t n = 0; n < in.superpixels.count(t); ++n) {
      const auto g = in.superpixels.frame_offset(t) + n;
      rho << t << ',' << n << ',' << result.rho.values[g] << ',' << int(result.segmentation.positive[g]) << '\n';
    }

  if (a.overlay) {
    const auto imgs = render_overlay(seq, masks);
    fs::create_directories(out / "overlay");
    for (std::size_t t = 0; t < imgs.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof(name), "overlay_%04zu.png", t);
      write_png((out / "overlay" / name).string(), seq.width(), seq.height(), 3, imgs[t]);
    }
  }
  std::cout << json{{"frames", seq.frame_count()},
                    {"superpixels", in.superpixels.total()},
                    {"selected", result.segmentation.count()},
                    {"forward_iterations", result.forward.iterations},
                    {"backward_iterations", result.backward.iterations}}
                   .dump()
            << '\n';
}

struct EvalArgs {
  std::string pred, gt, scores, csv;
};

void run_eval(const EvalArgs& a) {
  int pw = 0, ph = 0, gw = 0, gh = 0;
  const auto pred = load_masks(a.pred, pw, ph);
  const auto gt = load_masks(a.gt, gw, gh);
  if (pw != gw || ph != gh)
    throw ValidationError("prediction is " + std::to_string(pw) + "x" + std::to_string(ph) + ", ground truth is " +
                          std::to_string(gw) + "x" + std::to_string(gh));
  std::optional<std::vector<std::vector<double>>> scores;
  if (!a.scores.empty()) {
    auto frames = load_frames(a.scores);
    scores.emplace();
    for (auto& f : frames) {
      if (f.width != gw || f.height != gh) throw ValidationError("score map size does not match the ground truth");
      auto& s = scores->emplace_back(static_cast<std::size_t>(f.width) * f.height);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::round(f.data[i * f.channels] * 255.0) / 255.0;
    }
  }
  const auto r = compute_metrics(pred, gt, scores ? &*scores : nullptr);

  if (!a.csv.empty()) {
    auto os = open_out(a.csv);
    write_metrics_csv(os, r);
  }
  for (std::size_t t = 0; t < r.per_frame.size(); ++t) {
    auto j = scores_json(r.per_frame[t]);
    j["frame"] = t;
    std::cout << j.dump() << '\n';
  }
  for (const auto& p : r.pr_curve) {
    auto j = scores_json(p.scores);
    j["threshold"] = p.threshold;
    std::cout << j.dump() << '\n';
  }
  auto j = scores_json(r.pooled);
  j["summary"] = true;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  if (!r.pr_curve.empty()) j["best"] = {{"threshold", r.best.threshold}, {"scores", scores_json(r.best.scores)}};
  std::cout << j.dump() << '\n';
}

struct SynthArgs {
  SynthSpec spec;
  std::string outlier_mode = "background";
  std::string out;
};

void run_synth(SynthArgs a) {
  a.spec.outlier_mode = parse_outlier_mode(a.outlier_mode);
  const auto s = synth_sequence(a.spec);
  const fs::path out(a.out);
  write_sequence_png((out / "frames").string(), s.sequence);
  write_masks_png((out / "gt").string(), s.sequence.width(), s.sequence.height(), s.ground_truth);
  {
    auto os = open_out(out / "points.csv");
    write_annotations(os, s.points);
  }
  {
    auto os = open_out(out / "config.txt");
    os << serialize_config(synthetic_config());
  }
  std::cout << json{{"scenario", a.spec.scenario},
                    {"frames", s.sequence.frame_count()},
                    {"relocated", s.relocated},
                    {"dropped", s.dropped}}
                   .dump()
            << '\n';
}

struct SolveArgs {
  std::string graph;
  std::size_t l_max = 200;
};

void run_graph_solve(const SolveArgs& a) {
  Network g;
  if (a.graph == "-") {
    g = read_network(std::cin);
  } else {
    std::ifstream in(a.graph);
    if (!in) throw ValidationError("cannot open " + a.graph);
    g = read_network(in);
  }
  KspOptions opts;
  opts.l_max = a.l_max;
  const auto ps = solve_ksp(g, opts);
  if (auto err = check_path_set(g, ps); !err.empty()) throw InvariantError("infeasible path set: " + err);
  std::cout << json{{"k", ps.size()}, {"total_cost", ps.total_cost}, {"path_costs", ps.path_costs}, {"paths", ps.paths}}
                   .dump()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video segmentation from point annotations via K-shortest paths"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "Segment a sequence from per-frame points");
  s->add_option("--frames", seg.frames, "Frame directory or multi-image PNM")->required();
  s->add_option("--points", seg.points, "CSV of frame,x,y")->required();
  s->add_option("--config", seg.config, "key = value config file");
  s->add_option("--superpixels", seg.superpixels, "Precomputed SPLM file");
  s->add_option("--flow", seg.flow, "Precomputed FLOW file");
  s->add_option("--features", seg.features, "Precomputed FEAT file (needs --superpixels)");
  s->add_option("--out", seg.out, "Output directory")->required();
  s->add_flag("--overlay", seg.overlay, "Also write prediction overlays");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predicted masks against ground truth");
  e->add_option("--pred", ev.pred, "Predicted mask directory")->required();
  e->add_option("--gt", ev.gt, "Ground-truth mask directory")->required();
  e->add_option("--scores", ev.scores, "Score map directory (8-bit, for the PR curve)");
  e->add_option("--csv", ev.csv, "Per-frame CSV output");

  SynthArgs sy;
  auto* y = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  y->add_option("--scenario", sy.spec.scenario, "moving-square, growing-disc, branching-blob, static-square, late-square")
      ->required();
  y->add_option("--out", sy.out, "Output directory")->required();
  y->add_option("--frames", sy.spec.frames, "Frame count")->capture_default_str();
  y->add_option("--width", sy.spec.width)->capture_default_str();
  y->add_option("--height", sy.spec.height)->capture_default_str();
  y->add_option("--seed", sy.spec.seed)->capture_default_str();
  y->add_option("--outliers", sy.spec.outlier_fraction, "Fraction of annotations relocated")->capture_default_str();
  y->add_option("--outlier-mode", sy.outlier_mode, "background or near")->capture_default_str();
  y->add_option("--outlier-distance", sy.spec.outlier_distance, "Pixels, near mode")->capture_default_str();
  y->add_option("--missing", sy.spec.missing_fraction, "Fraction of annotations dropped")->capture_default_str();

  SolveArgs gs;
  auto* g = app.add_subcommand("graph-solve", "Run the KSP solver on a graph dump");
  g->add_option("--graph", gs.graph, "Graph dump file, - for stdin")->required();
  g->add_option("--l-max", gs.l_max, "Path cap")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitValidation;
  }

  try {
    if (*s) run_segment(seg);
    if (*e) run_eval(ev);
    if (*y) run_synth(sy);
    if (*g) run_graph_solve(gs);
  } catch (const ValidationError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const InvariantError& ex) {
    std::cerr << "internal error: " << ex.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& ex) {
    std::cerr << "internal error: " << ex.what() << '\n';
    return kExitInvariant;
  }
  return 0;
}
