#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ksptrack/binary_io.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Per-frame label grids plus centroid / pixel-count / pixel-list records.
/// Labels are contiguous 0..N_t-1 in every frame. Superpixels also have a
/// global index (frame-major) used by the dense per-superpixel tables.
class SuperpixelMap {
 public:
  SuperpixelMap() = default;

  /// Builds from raw per-frame label grids. Labels need not be contiguous:
  /// they are remapped in increasing order of their raw value.
  static SuperpixelMap from_labels(int width, int height, std::vector<std::vector<std::uint32_t>> labels) {
    SuperpixelMap m;
    m.width_ = width;
    m.height_ = height;
    const std::size_t npix = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    m.offsets_.push_back(0);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      auto& grid = labels[t];
      if (grid.size() != npix) throw ValidationError("superpixel frame " + std::to_string(t) + " has wrong size");
      std::vector<std::uint32_t> uniq(grid);
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      const bool contiguous = uniq.back() + 1 == uniq.size();
      if (!contiguous)
        for (auto& l : grid)
          l = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), l) - uniq.begin());
      const std::size_t n = uniq.size();

      Frame f;
      f.labels = std::move(grid);
      f.start.assign(n + 1, 0);
      for (auto l : f.labels) ++f.start[l + 1];
      for (std::size_t i = 0; i < n; ++i) f.start[i + 1] += f.start[i];
      f.pixels.resize(npix);
      std::vector<std::uint32_t> cursor(f.start.begin(), f.start.end() - 1);
      f.info.assign(n, {});
      for (std::size_t p = 0; p < npix; ++p) {
        const auto l = f.labels[p];
        f.pixels[cursor[l]++] = static_cast<std::uint32_t>(p);
        f.info[l].cx += static_cast<double>(p % width) + 0.5;
        f.info[l].cy += static_cast<double>(p / width) + 0.5;
        ++f.info[l].pixel_count;
      }
      for (auto& s : f.info) {
        s.cx /= s.pixel_count;
        s.cy /= s.pixel_count;
      }
      m.frames_.push_back(std::move(f));
      m.offsets_.push_back(m.offsets_.back() + n);
    }
    return m;
  }

  struct Info {
    double cx = 0.0;
    double cy = 0.0;
    std::uint32_t pixel_count = 0;
  };

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t frame_count() const noexcept { return frames_.size(); }
  [[nodiscard]] std::size_t count(std::size_t t) const { return frames_.at(t).info.size(); }
  [[nodiscard]] std::size_t total() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }

  [[nodiscard]] std::size_t global_index(SuperpixelRef r) const noexcept { return offsets_[r.frame] + r.id; }
  [[nodiscard]] SuperpixelRef ref_of(std::size_t global) const {
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), global);
    const auto t = static_cast<std::uint32_t>(it - offsets_.begin() - 1);
    return {t, static_cast<std::uint32_t>(global - offsets_[t])};
  }
  [[nodiscard]] std::size_t frame_offset(std::size_t t) const { return offsets_.at(t); }

  [[nodiscard]] const std::vector<std::uint32_t>& labels(std::size_t t) const { return frames_.at(t).labels; }
  [[nodiscard]] std::uint32_t label_at(std::size_t t, int x, int y) const {
    return frames_[t].labels[static_cast<std::size_t>(y) * width_ + x];
  }
  /// Superpixel whose pixel set contains the (floored) point.
  [[nodiscard]] SuperpixelRef containing(std::size_t t, Point p) const {
    const int x = std::clamp(static_cast<int>(std::floor(p.x)), 0, width_ - 1);
    const int y = std::clamp(static_cast<int>(std::floor(p.y)), 0, height_ - 1);
    return {static_cast<std::uint32_t>(t), label_at(t, x, y)};
  }
  [[nodiscard]] const Info& info(SuperpixelRef r) const { return frames_[r.frame].info[r.id]; }
  /// Mean pixel centre; pixel (x, y) covers [x, x + 1) x [y, y + 1).
  [[nodiscard]] Point centroid(SuperpixelRef r) const {
    const auto& i = info(r);
    return {i.cx, i.cy};
  }
  /// Row-major pixel indices of one superpixel.
  [[nodiscard]] std::span<const std::uint32_t> pixels(SuperpixelRef r) const {
    const auto& f = frames_[r.frame];
    return {f.pixels.data() + f.start[r.id], f.start[r.id + 1] - f.start[r.id]};
  }

  friend bool operator==(const SuperpixelMap& a, const SuperpixelMap& b) {
    if (a.width_ != b.width_ || a.height_ != b.height_ || a.frames_.size() != b.frames_.size()) return false;
    for (std::size_t t = 0; t < a.frames_.size(); ++t)
      if (a.frames_[t].labels != b.frames_[t].labels) return false;
    return true;
  }

 private:
  struct Frame {
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> start;
    std::vector<std::uint32_t> pixels;
    std::vector<Info> info;
  };

  int width_ = 0;
  int height_ = 0;
  std::vector<Frame> frames_;
  std::vector<std::size_t> offsets_;
};

namespace detail {

inline std::vector<std::uint32_t> slic_frame(const ImageSequence& seq, std::size_t t, int target, double compactness) {
  const int w = seq.width();
  const int h = seq.height();
  const int ch = seq.channels();
  const std::size_t npix = seq.pixel_count();
  const auto& img = seq.frame(t);
  const double step = std::sqrt(static_cast<double>(npix) / target);
  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  const double sx = static_cast<double>(w) / nx;
  const double sy = static_cast<double>(h) / ny;

  const auto luma = seq.luma_frame(t);
  auto grad = [&](int x, int y) {
    const auto L = [&](int xx, int yy) {
      return static_cast<double>(luma[static_cast<std::size_t>(std::clamp(yy, 0, h - 1)) * w + std::clamp(xx, 0, w - 1)]);
    };
    const double gx = L(x + 1, y) - L(x - 1, y);
    const double gy = L(x, y + 1) - L(x, y - 1);
    return gx * gx + gy * gy;
  };

  struct Center {
    double x, y;
    double c[3];
  };
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double cx = (i + 0.5) * sx - 0.5;
      double cy = (j + 0.5) * sy - 0.5;
      const int rx = std::clamp(static_cast<int>(std::lround(cx)), 0, w - 1);
      const int ry = std::clamp(static_cast<int>(std::lround(cy)), 0, h - 1);
      // Seed moves to the lowest-gradient pixel of the 3x3 window only when
      // strictly better than the grid position.
      double best = grad(rx, ry);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int px = rx + dx;
          const int py = ry + dy;
          if (px < 0 || py < 0 || px >= w || py >= h) continue;
          const double g = grad(px, py);
          if (g < best - 1e-12) {
            best = g;
            cx = px;
            cy = py;
          }
        }
      Center c{cx, cy, {0, 0, 0}};
      const auto p = static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(cy)), 0, h - 1)) * w +
                     std::clamp(static_cast<int>(std::lround(cx)), 0, w - 1);
      for (int k = 0; k < ch; ++k) c.c[k] = img[p * ch + k];
      centers.push_back(c);
    }
  }

  const double S = std::sqrt(sx * sy);
  const double spatial_weight = (compactness * compactness) / (S * S);
  std::vector<std::uint32_t> labels(npix, 0);
  std::vector<double> dist(npix);
  for (int iter = 0; iter < 10; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& c = centers[k];
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x - 2 * S)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + 2 * S)));
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y - 2 * S)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + 2 * S)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          double dc = 0.0;
          for (int q = 0; q < ch; ++q) {
            const double d = img[p * ch + q] - c.c[q];
            dc += d * d;
          }
          const double ds = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
          const double D = dc + ds * spatial_weight;
          if (D < dist[p]) {
            dist[p] = D;
            labels[p] = static_cast<std::uint32_t>(k);
          }
        }
    }
    std::vector<Center> acc(centers.size(), Center{0, 0, {0, 0, 0}});
    std::vector<std::size_t> cnt(centers.size(), 0);
    for (std::size_t p = 0; p < npix; ++p) {
      const auto l = labels[p];
      acc[l].x += static_cast<double>(p % w);
      acc[l].y += static_cast<double>(p / w);
      for (int q = 0; q < ch; ++q) acc[l].c[q] += img[p * ch + q];
      ++cnt[l];
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (cnt[k] == 0) continue;
      centers[k].x = acc[k].x / cnt[k];
      centers[k].y = acc[k].y / cnt[k];
      for (int q = 0; q < ch; ++q) centers[k].c[q] = acc[k].c[q] / cnt[k];
    }
  }

  // Connectivity: flood-fill components in raster order; fragments smaller
  // than a quarter of the nominal area join an adjacent component.
  const std::size_t min_size = std::max<std::size_t>(1, npix / (4 * centers.size()));
  constexpr std::uint32_t unset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> out(npix, unset);
  std::vector<std::uint32_t> stack;
  std::vector<std::uint32_t> comp;
  std::uint32_t next = 0;
  const int dxs[4] = {-1, 0, 1, 0};
  const int dys[4] = {0, -1, 0, 1};
  for (std::size_t start = 0; start < npix; ++start) {
    if (out[start] != unset) continue;
    const int sx0 = static_cast<int>(start % w);
    const int sy0 = static_cast<int>(start / w);
    std::uint32_t adjacent = unset;
    for (int k = 0; k < 4; ++k) {
      const int x = sx0 + dxs[k];
      const int y = sy0 + dys[k];
      if (x < 0 || y < 0 || x >= w || y >= h) continue;
      const auto q = static_cast<std::size_t>(y) * w + x;
      if (out[q] != unset) adjacent = out[q];
    }
    comp.clear();
    stack.assign(1, static_cast<std::uint32_t>(start));
    out[start] = next;
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      const int px = static_cast<int>(p % w);
      const int py = static_cast<int>(p / w);
      for (int k = 0; k < 4; ++k) {
        const int x = px + dxs[k];
        const int y = py + dys[k];
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        const auto q = static_cast<std::size_t>(y) * w + x;
        if (out[q] == unset && labels[q] == labels[p]) {
          out[q] = next;
          stack.push_back(static_cast<std::uint32_t>(q));
        }
      }
    }
    if (comp.size() < min_size && adjacent != unset) {
      for (auto p : comp) out[p] = adjacent;
    } else {
      ++next;
    }
  }
  return out;
}

}  // namespace detail

/// Per-frame SLIC. `compactness` weighs normalized spatial distance against
/// color distance (colors in [0, 1]). Deterministic: seeds sit on a regular
/// grid and the only perturbation is the 3x3 gradient move.
inline SuperpixelMap slic_superpixels(const ImageSequence& seq, int target_count, double compactness) {
  if (target_count < 1) throw ValidationError("slic: target_count must be >= 1");
  if (!(compactness > 0.0)) throw ValidationError("slic: compactness must be > 0");
  std::vector<std::vector<std::uint32_t>> labels(seq.frame_count());
  // Textures finer than the grid fragment the clusters; the frame is redone
  // with doubled compactness until the count lands in [target/2, 2 target].
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    double m = compactness;
    for (int attempt = 0;; ++attempt, m *= 2.0) {
      labels[t] = detail::slic_frame(seq, t, target_count, m);
      const auto n = 1 + *std::max_element(labels[t].begin(), labels[t].end());
      if (attempt == 16 || (2.0 * n >= target_count && n <= 2.0 * target_count)) break;
    }
  }
  return SuperpixelMap::from_labels(seq.width(), seq.height(), std::move(labels));
}

// SPLM: "SPLM", u32 T, W, H, then T*H*W u32 labels (row-major, frame-major).

inline binio::Writer encode_splm(const SuperpixelMap& sp) {
  binio::Writer w;
  w.magic("SPLM");
  w.u32(static_cast<std::uint32_t>(sp.frame_count()));
  w.u32(static_cast<std::uint32_t>(sp.width()));
  w.u32(static_cast<std::uint32_t>(sp.height()));
  for (std::size_t t = 0; t < sp.frame_count(); ++t)
    for (auto l : sp.labels(t)) w.u32(l);
  return w;
}

inline void write_splm(const std::string& path, const SuperpixelMap& sp) { encode_splm(sp).save(path); }

inline SuperpixelMap decode_splm(binio::Reader& r) {
  r.expect_magic("SPLM");
  const auto T = r.u32();
  const auto W = r.u32();
  const auto H = r.u32();
  if (T == 0 || W == 0 || H == 0) throw ValidationError(r.name() + ": empty dimensions");
  const std::size_t npix = static_cast<std::size_t>(W) * H;
  if (r.remaining() != static_cast<std::size_t>(T) * npix * 4) throw ValidationError(r.name() + ": size mismatch");
  std::vector<std::vector<std::uint32_t>> labels(T, std::vector<std::uint32_t>(npix));
  for (auto& f : labels)
    for (auto& l : f) l = r.u32();
  return SuperpixelMap::from_labels(static_cast<int>(W), static_cast<int>(H), std::move(labels));
}

/// Reads an SPLM file and checks it against the sequence geometry.
inline SuperpixelMap ingest_superpixels(const std::string& path, const ImageSequence& seq) {
  auto r = binio::Reader::from_file(path);
  auto sp = decode_splm(r);
  auto mismatch = [&](const char* what, std::size_t expected, std::size_t actual) {
    throw ValidationError(path + ": " + what + " mismatch, expected " + std::to_string(expected) + ", got " +
                          std::to_string(actual));
  };
  if (static_cast<int>(sp.width()) != seq.width()) mismatch("width", seq.width(), sp.width());
  if (static_cast<int>(sp.height()) != seq.height()) mismatch("height", seq.height(), sp.height());
  if (sp.frame_count() != seq.frame_count()) mismatch("frame count", seq.frame_count(), sp.frame_count());
  return sp;
}

}  // namespace ksptrack
