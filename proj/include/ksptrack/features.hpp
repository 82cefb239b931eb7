#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ksptrack/binary_io.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/optical_flow.hpp"
#include "ksptrack/superpixels.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Per-pixel feature maps h_t(k, l): one row-major W x H x dim buffer per frame.
struct PixelFeatures {
  int width = 0;
  int height = 0;
  int dim = 0;
  std::vector<std::vector<float>> frames;
};

/// Per-superpixel appearance vectors a_t^n, indexed by the superpixel map's
/// global index.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::size_t rows, int dim) : dim_(dim), data_(rows * static_cast<std::size_t>(dim), 0.0) {}

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }

  friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

 private:
  int dim_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline std::vector<float> gaussian_blur(const std::vector<float>& img, int w, int h, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= sum;
  std::vector<float> tmp(img.size()), out(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * img[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  return out;
}

}  // namespace detail

/// Built-in per-pixel layout, used when no learned features are supplied:
///   [channels..., blur(sigma=1), blur(sigma=3), |grad|, x/(W-1), y/(H-1), |flow|]
/// Blurs and gradient act on luma; gradient uses central differences; the
/// flow magnitude of frame t comes from the t -> t+1 field (last frame
/// reuses the last field).
inline int builtin_feature_dim(int channels) { return channels + 6; }

inline PixelFeatures builtin_pixel_features(const ImageSequence& seq, const FlowField& flow) {
  const int w = seq.width();
  const int h = seq.height();
  const int ch = seq.channels();
  const int dim = builtin_feature_dim(ch);
  if (flow.fields.size() + 1 != seq.frame_count() || flow.width != w || flow.height != h)
    throw ValidationError("builtin features: flow dimensions do not match the sequence");
  PixelFeatures pf{w, h, dim, {}};
  pf.frames.resize(seq.frame_count());
  const double xs = w > 1 ? 1.0 / (w - 1) : 0.0;
  const double ys = h > 1 ? 1.0 / (h - 1) : 0.0;
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    const auto luma = seq.luma_frame(t);
    const auto blur1 = detail::gaussian_blur(luma, w, h, 1.0);
    const auto blur3 = detail::gaussian_blur(luma, w, h, 3.0);
    const auto& field = flow.fields[std::min(t, flow.fields.size() - 1)];
    const auto& img = seq.frame(t);
    auto& out = pf.frames[t];
    out.resize(seq.pixel_count() * dim);
    auto L = [&](int x, int y) {
      return static_cast<double>(luma[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)]);
    };
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        float* f = out.data() + p * dim;
        for (int c = 0; c < ch; ++c) f[c] = img[p * ch + c];
        f[ch] = blur1[p];
        f[ch + 1] = blur3[p];
        const double gx = 0.5 * (L(x + 1, y) - L(x - 1, y));
        const double gy = 0.5 * (L(x, y + 1) - L(x, y - 1));
        f[ch + 2] = static_cast<float>(std::hypot(gx, gy));
        f[ch + 3] = static_cast<float>(x * xs);
        f[ch + 4] = static_cast<float>(y * ys);
        f[ch + 5] = static_cast<float>(std::hypot(field[2 * p], field[2 * p + 1]));
      }
  }
  return pf;
}

/// Mean of the pixel features over each superpixel.
inline FeatureTable aggregate_features(const PixelFeatures& pf, const SuperpixelMap& sp) {
  if (pf.width != sp.width() || pf.height != sp.height() || pf.frames.size() != sp.frame_count())
    throw ValidationError("aggregate_features: pixel feature resolution " + std::to_string(pf.width) + "x" +
                          std::to_string(pf.height) + " does not match superpixels " + std::to_string(sp.width()) +
                          "x" + std::to_string(sp.height()));
  FeatureTable table(sp.total(), pf.dim);
  for (std::size_t t = 0; t < sp.frame_count(); ++t) {
    if (pf.frames[t].size() != static_cast<std::size_t>(pf.width) * pf.height * pf.dim)
      throw ValidationError("aggregate_features: frame " + std::to_string(t) + " has wrong size");
    for (std::uint32_t n = 0; n < sp.count(t); ++n) {
      const SuperpixelRef r{static_cast<std::uint32_t>(t), n};
      auto row = table.row(sp.global_index(r));
      const auto pixels = sp.pixels(r);
      for (auto p : pixels)
        for (int d = 0; d < pf.dim; ++d) row[d] += pf.frames[t][static_cast<std::size_t>(p) * pf.dim + d];
      for (auto& v : row) v /= static_cast<double>(pixels.size());
    }
  }
  return table;
}

// FEAT: "FEAT", u32 record_count, u32 dim, then records
// (u32 frame, u32 superpixel_id, dim x f32).

inline binio::Writer encode_feat(const FeatureTable& feats, const SuperpixelMap& sp) {
  binio::Writer w;
  w.magic("FEAT");
  w.u32(static_cast<std::uint32_t>(feats.rows()));
  w.u32(static_cast<std::uint32_t>(feats.dim()));
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    const auto r = sp.ref_of(i);
    w.u32(r.frame);
    w.u32(r.id);
    for (double v : feats.row(i)) w.f32(static_cast<float>(v));
  }
  return w;
}

inline void write_feat(const std::string& path, const FeatureTable& feats, const SuperpixelMap& sp) {
  encode_feat(feats, sp).save(path);
}

/// Decodes a FEAT stream against a superpixel map; every superpixel must
/// appear exactly once.
inline FeatureTable decode_feat(binio::Reader& r, const SuperpixelMap& sp) {
  r.expect_magic("FEAT");
  const auto count = r.u32();
  const auto dim = r.u32();
  if (dim == 0) throw ValidationError(r.name() + ": zero feature dimension");
  if (r.remaining() != static_cast<std::size_t>(count) * (8 + 4 * static_cast<std::size_t>(dim)))
    throw ValidationError(r.name() + ": size mismatch");
  if (count != sp.total())
    throw ValidationError(r.name() + ": " + std::to_string(count) + " records for " + std::to_string(sp.total()) +
                          " superpixels");
  FeatureTable table(sp.total(), static_cast<int>(dim));
  std::vector<bool> seen(sp.total(), false);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto t = r.u32();
    const auto n = r.u32();
    if (t >= sp.frame_count() || n >= sp.count(t))
      throw ValidationError(r.name() + ": record " + std::to_string(i) + " references unknown superpixel (" +
                            std::to_string(t) + ", " + std::to_string(n) + ")");
    const auto g = sp.global_index({t, n});
    if (seen[g]) throw ValidationError(r.name() + ": duplicate record for (" + std::to_string(t) + ", " + std::to_string(n) + ")");
    seen[g] = true;
    for (auto& v : table.row(g)) {
      const float f = r.f32();
      if (!std::isfinite(f)) throw ValidationError(r.name() + ": non-finite feature value");
      v = f;
    }
  }
  return table;
}

inline FeatureTable read_feat(const std::string& path, const SuperpixelMap& sp) {
  auto r = binio::Reader::from_file(path);
  return decode_feat(r, sp);
}

}  // namespace ksptrack
