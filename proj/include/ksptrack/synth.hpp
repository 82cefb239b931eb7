#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ksptrack/config.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/metrics.hpp"
#include "ksptrack/rng.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

enum class OutlierMode { Background, Near };

inline OutlierMode parse_outlier_mode(const std::string& s) {
  if (s == "background") return OutlierMode::Background;
  if (s == "near") return OutlierMode::Near;
  throw ValidationError("unknown outlier mode '" + s + "' (expected background or near)");
}

struct SynthSpec {
  std::string scenario = "moving-square";
  int frames = 40;
  int width = 64;
  int height = 64;
  std::uint64_t seed = 7;
  double outlier_fraction = 0.0;  // share of annotated frames whose point is relocated
  OutlierMode outlier_mode = OutlierMode::Background;
  double outlier_distance = 12.0;  // Near mode: pixels from the true point
  double missing_fraction = 0.0;   // share of annotated frames whose point is dropped
};

struct SynthSequence {
  ImageSequence sequence;
  MaskSequence ground_truth;
  PointAnnotations points;
  std::vector<std::size_t> relocated;  // frames with a corrupted point
  std::vector<std::size_t> dropped;    // frames whose point was removed
};

inline const std::vector<std::string>& synth_scenarios() {
  static const std::vector<std::string> names{"moving-square", "growing-disc", "branching-blob", "static-square",
                                              "late-square"};
  return names;
}

/// Tracker settings sized for the 64x64 scenarios: fewer, larger
/// superpixels and a wider entrance/transition radius than the defaults.
inline Config synthetic_config() {
  Config c;
  c.n_superpixels_per_frame = 64;
  c.radius = 0.3;
  c.l_max = 1000;
  return c;
}

/// ceil(fraction * n), robust to representation error in fraction.
inline std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

/// Radius of the growing disc at frame t: a half-sine ramp from 4 px up to
/// 4 + 0.14 * min(W, H) px and back.
inline double growing_disc_radius(int t, int frames, int width, int height) {
  const double lo = 4.0;
  const double hi = lo + 0.14 * std::min(width, height);
  const double phase = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
  return lo + (hi - lo) * std::sin(std::numbers::pi * phase);
}

namespace detail {

struct Disc {
  double cx, cy, r;
  [[nodiscard]] bool contains(double x, double y) const { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; }
};

struct FrameShape {
  std::vector<Disc> discs;
  int sq_x0 = 0, sq_y0 = 0, sq_size = 0;  // axis-aligned square, size 0 = none
  double ax = 0, ay = 0;                  // object-local texture origin
  Point annotation;
  bool has_annotation = true;

  [[nodiscard]] bool contains(int x, int y) const {
    if (sq_size > 0 && x >= sq_x0 && x < sq_x0 + sq_size && y >= sq_y0 && y < sq_y0 + sq_size) return true;
    for (const auto& d : discs)
      if (d.contains(x + 0.5, y + 0.5)) return true;
    return false;
  }
};

inline FrameShape scenario_shape(const SynthSpec& s, int t) {
  FrameShape f;
  const int T = s.frames, W = s.width, H = s.height;
  if (s.scenario == "moving-square" || s.scenario == "static-square" || s.scenario == "late-square") {
    f.sq_size = 16;
    const bool moving = s.scenario == "moving-square";
    const int span = std::min(T - 1, W - f.sq_size);
    f.sq_x0 = moving ? (W - f.sq_size - span) / 2 + std::min(t, span) : (W - f.sq_size) / 2;
    f.sq_y0 = (H - f.sq_size) / 2;
    f.ax = f.sq_x0;
    f.ay = f.sq_y0;
    f.annotation = {f.sq_x0 + f.sq_size / 2.0, f.sq_y0 + f.sq_size / 2.0};
    if (s.scenario == "late-square" && t < T / 2) {
      f.sq_size = 0;
      f.has_annotation = false;
    }
  } else if (s.scenario == "growing-disc") {
    const double r = growing_disc_radius(t, T, W, H);
    f.discs.push_back({W / 2.0, H / 2.0, r});
    f.ax = W / 2.0;
    f.ay = H / 2.0;
    f.annotation = {W / 2.0, H / 2.0};
  } else if (s.scenario == "branching-blob") {
    // one disc that splits into two branches drifting apart vertically
    const double half = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
    const double r = 0.12 * std::min(W, H);
    const double cx = W / 2.0, cy = H / 2.0;
    const double sep = half < 0.3 ? 0.0 : (half - 0.3) / 0.7 * (0.5 * H - r - 2.0);
    f.discs.push_back({cx, cy - sep, r});
    f.discs.push_back({cx, cy + sep, r});
    f.ax = cx;
    f.ay = cy;
    f.annotation = {cx, cy - sep};
  } else {
    std::string names;
    for (const auto& n : synth_scenarios()) names += (names.empty() ? "" : ", ") + n;
    throw ValidationError("unknown scenario '" + s.scenario + "' (expected one of: " + names + ")");
  }
  return f;
}

}  // namespace detail

/// Grayscale sequence on 8-bit intensity levels. Static uniform noise
/// background in [0.15, 0.45]; object pixels carry a uniform noise texture in [0.6, 0.9] attached to
/// the object, so it moves with it. Annotation = object centre.
inline SynthSequence synth_sequence(const SynthSpec& s) {
  if (s.frames < 2) throw ValidationError("synth: need at least 2 frames");
  if (s.width < 24 || s.height < 24) throw ValidationError("synth: image must be at least 24x24");
  if (!(s.outlier_fraction >= 0.0 && s.outlier_fraction <= 1.0))
    throw ValidationError("synth: outlier fraction must be in [0, 1]");
  if (!(s.missing_fraction >= 0.0 && s.missing_fraction <= 1.0))
    throw ValidationError("synth: missing fraction must be in [0, 1]");
  auto rng = seeded_rng(s.seed, stream_key(StreamPurpose::Synth, 0, 0, 0));
  const int W = s.width, H = s.height;
  const std::size_t npix = static_cast<std::size_t>(W) * H;

  // 8-bit levels, so frames survive a PNG round trip unchanged
  auto level = [](double v) { return static_cast<float>(std::lround(v * 255.0)) / 255.0f; };
  std::vector<float> background(npix);
  for (auto& v : background) v = level(0.15 + 0.3 * uniform01(rng));
  const int tex = 2 * std::max(W, H);
  std::vector<float> texture(static_cast<std::size_t>(tex) * tex);
  for (int y = 0; y < tex; ++y)
    for (int x = 0; x < tex; ++x) {
      texture[static_cast<std::size_t>(y) * tex + x] = level(0.6 + 0.3 * uniform01(rng));
    }

  SynthSequence out;
  out.points = PointAnnotations(static_cast<std::size_t>(s.frames));
  std::vector<std::vector<float>> frames;
  for (int t = 0; t < s.frames; ++t) {
    const auto shape = detail::scenario_shape(s, t);
    auto& img = frames.emplace_back(background);
    auto& gt = out.ground_truth.emplace_back(npix, 0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (!shape.contains(x, y)) continue;
        const auto i = static_cast<std::size_t>(y) * W + x;
        gt[i] = 1;
        const int tx = std::clamp(static_cast<int>(std::floor(x - shape.ax)) + tex / 2, 0, tex - 1);
        const int ty = std::clamp(static_cast<int>(std::floor(y - shape.ay)) + tex / 2, 0, tex - 1);
        img[i] = texture[static_cast<std::size_t>(ty) * tex + tx];
      }
    if (shape.has_annotation) out.points.add(static_cast<std::size_t>(t), shape.annotation);
  }
  out.sequence = ImageSequence(W, H, 1, std::move(frames));

  std::vector<std::size_t> annotated;
  for (std::size_t t = 0; t < out.points.frame_count(); ++t)
    if (!out.points.in_frame(t).empty()) annotated.push_back(t);
  auto pick = [&](std::size_t count) {
    std::vector<std::size_t> pool = annotated;
    for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
  };

  out.relocated = pick(fraction_count(s.outlier_fraction, annotated.size()));
  for (auto t : out.relocated) {
    const auto orig = out.points.in_frame(t).front();
    const auto& gt = out.ground_truth[t];
    Point p = orig;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      if (s.outlier_mode == OutlierMode::Background) {
        p = {uniform_index(rng, static_cast<std::uint64_t>(W)) + 0.5, uniform_index(rng, static_cast<std::uint64_t>(H)) + 0.5};
      } else {
        const double a = 2.0 * std::numbers::pi * uniform01(rng);
        p = {orig.x + s.outlier_distance * std::cos(a), orig.y + s.outlier_distance * std::sin(a)};
      }
      if (p.x < 0 || p.y < 0 || p.x >= W || p.y >= H) continue;
      if (!gt[static_cast<std::size_t>(p.y) * W + static_cast<std::size_t>(p.x)]) break;
    }
    out.points.clear_frame(t);
    out.points.add(t, p);
  }

  out.dropped = pick(fraction_count(s.missing_fraction, annotated.size()));
  for (auto t : out.dropped) out.points.clear_frame(t);
  return out;
}

}  // namespace ksptrack
