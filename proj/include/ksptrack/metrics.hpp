#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ksptrack/errors.hpp"

namespace ksptrack {

using MaskSequence = std::vector<std::vector<std::uint8_t>>;

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision is 0 with no predicted pixels, recall 0 with no object pixels,
/// F1 is 0 when both are 0.
inline Scores scores_from(const Counts& c) {
  Scores s;
  if (c.tp + c.fp > 0) s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

struct PrPoint {
  double threshold = 0.0;
  Scores scores;
};

struct MetricsReport {
  Counts counts;
  Scores pooled;
  std::vector<Counts> frame_counts;
  std::vector<Scores> per_frame;
  std::vector<PrPoint> pr_curve;  // empty without a score map
  PrPoint best;                   // best-F1 threshold on the curve
};

inline constexpr int kPrThresholds = 256;

/// Number of thresholds i / 255 (i = 0..255) that score s reaches.
inline int thresholds_reached(double s) {
  if (!(s >= 0.0)) return 0;
  int k = static_cast<int>(std::floor(s * (kPrThresholds - 1)));
  k = std::min(k, kPrThresholds - 1);
  while (k + 1 < kPrThresholds && static_cast<double>(k + 1) / (kPrThresholds - 1) <= s) ++k;
  while (k >= 0 && static_cast<double>(k) / (kPrThresholds - 1) > s) --k;
  return k + 1;
}

/// Pooled pixel counts over all frames; optional per-pixel scores give the
/// PR curve at 256 evenly spaced thresholds in [0, 1] (score >= threshold).
inline MetricsReport compute_metrics(const MaskSequence& pred, const MaskSequence& gt,
                                     const std::vector<std::vector<double>>* scores = nullptr) {
  if (pred.size() != gt.size())
    throw ValidationError("metrics: " + std::to_string(pred.size()) + " predicted frames vs " +
                          std::to_string(gt.size()) + " ground-truth frames");
  if (scores && scores->size() != gt.size()) throw ValidationError("metrics: score map frame count mismatch");
  MetricsReport r;
  std::vector<std::uint64_t> pos_hist(kPrThresholds + 1, 0), neg_hist(kPrThresholds + 1, 0);
  std::uint64_t gt_total = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (pred[t].size() != gt[t].size())
      throw ValidationError("metrics: frame " + std::to_string(t) + " has " + std::to_string(pred[t].size()) +
                            " predicted pixels vs " + std::to_string(gt[t].size()));
    if (scores && (*scores)[t].size() != gt[t].size())
      throw ValidationError("metrics: score map frame " + std::to_string(t) + " size mismatch");
    Counts c;
    for (std::size_t i = 0; i < gt[t].size(); ++i) {
      const bool p = pred[t][i] != 0, g = gt[t][i] != 0;
      c.tp += p && g;
      c.fp += p && !g;
      c.fn += !p && g;
      gt_total += g;
      if (scores) (g ? pos_hist : neg_hist)[thresholds_reached((*scores)[t][i])]++;
    }
    r.frame_counts.push_back(c);
    r.per_frame.push_back(scores_from(c));
    r.counts += c;
  }
  r.pooled = scores_from(r.counts);
  if (scores) {
    // pixels with reach > i pass threshold i
    std::uint64_t tp = 0, fp = 0;
    std::vector<PrPoint> curve(kPrThresholds);
    for (int i = kPrThresholds - 1; i >= 0; --i) {
      tp += pos_hist[i + 1];
      fp += neg_hist[i + 1];
      curve[i] = {static_cast<double>(i) / (kPrThresholds - 1), scores_from({tp, fp, gt_total - tp})};
    }
    r.pr_curve = std::move(curve);
    r.best = r.pr_curve.front();
    for (const auto& p : r.pr_curve)
      if (p.scores.f1 > r.best.scores.f1) r.best = p;
  }
  return r;
}

inline void write_metrics_csv(std::ostream& os, const MetricsReport& r) {
  os << "frame,tp,fp,fn,precision,recall,f1\n";
  auto row = [&](const std::string& name, const Counts& c, const Scores& s) {
    os << name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << s.precision << ',' << s.recall << ',' << s.f1
       << '\n';
  };
  for (std::size_t t = 0; t < r.per_frame.size(); ++t) row(std::to_string(t), r.frame_counts[t], r.per_frame[t]);
  row("all", r.counts, r.pooled);
}

}  // namespace ksptrack
