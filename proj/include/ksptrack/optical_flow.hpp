#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ksptrack/binary_io.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Dense displacement fields for the T-1 consecutive frame pairs (t -> t+1).
/// Each field stores interleaved (dx, dy) in pixels, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<std::vector<float>> fields;

  [[nodiscard]] std::size_t pair_count() const noexcept { return fields.size(); }
  [[nodiscard]] float dx(std::size_t pair, std::size_t pixel) const { return fields[pair][2 * pixel]; }
  [[nodiscard]] float dy(std::size_t pair, std::size_t pixel) const { return fields[pair][2 * pixel + 1]; }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

namespace detail {

inline void horn_schunck_pair(const std::vector<float>& a, const std::vector<float>& b, int w, int h, double alpha,
                              int iters, std::vector<float>& out) {
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto at = [w, h](const std::vector<float>& img, int x, int y) {
    return static_cast<double>(img[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)]);
  };
  // Gradients over the 2x2x2 cube (Horn & Schunck's first-difference stencil).
  std::vector<double> ex(n), ey(n), et(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      ex[p] = 0.25 * (at(a, x + 1, y) - at(a, x, y) + at(a, x + 1, y + 1) - at(a, x, y + 1) + at(b, x + 1, y) -
                      at(b, x, y) + at(b, x + 1, y + 1) - at(b, x, y + 1));
      ey[p] = 0.25 * (at(a, x, y + 1) - at(a, x, y) + at(a, x + 1, y + 1) - at(a, x + 1, y) + at(b, x, y + 1) -
                      at(b, x, y) + at(b, x + 1, y + 1) - at(b, x + 1, y));
      et[p] = 0.25 * (at(b, x, y) - at(a, x, y) + at(b, x + 1, y) - at(a, x + 1, y) + at(b, x, y + 1) -
                      at(a, x, y + 1) + at(b, x + 1, y + 1) - at(a, x + 1, y + 1));
    }
  std::vector<double> u(n, 0.0), v(n, 0.0), un(n), vn(n);
  const double a2 = alpha * alpha;
  auto avg = [w, h](const std::vector<double>& f, int x, int y) {
    auto F = [&](int xx, int yy) {
      return f[static_cast<std::size_t>(std::clamp(yy, 0, h - 1)) * w + std::clamp(xx, 0, w - 1)];
    };
    return (F(x - 1, y) + F(x + 1, y) + F(x, y - 1) + F(x, y + 1)) / 6.0 +
           (F(x - 1, y - 1) + F(x + 1, y - 1) + F(x - 1, y + 1) + F(x + 1, y + 1)) / 12.0;
  };
  for (int it = 0; it < iters; ++it) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const double ub = avg(u, x, y);
        const double vb = avg(v, x, y);
        const double k = (ex[p] * ub + ey[p] * vb + et[p]) / (a2 + ex[p] * ex[p] + ey[p] * ey[p]);
        un[p] = ub - ex[p] * k;
        vn[p] = vb - ey[p] * k;
      }
    u.swap(un);
    v.swap(vn);
  }
  out.resize(2 * n);
  for (std::size_t p = 0; p < n; ++p) {
    out[2 * p] = static_cast<float>(u[p]);
    out[2 * p + 1] = static_cast<float>(v[p]);
  }
}

}  // namespace detail

/// Horn-Schunck flow on luma for every consecutive pair; `alpha` is the
/// smoothness weight in intensity units.
inline FlowField horn_schunck_flow(const ImageSequence& seq, double alpha, int iters) {
  if (!(alpha > 0.0)) throw ValidationError("horn_schunck: alpha must be > 0");
  FlowField flow{seq.width(), seq.height(), {}};
  flow.fields.resize(seq.frame_count() - 1);
  auto prev = seq.luma_frame(0);
  for (std::size_t t = 0; t + 1 < seq.frame_count(); ++t) {
    auto next = seq.luma_frame(t + 1);
    detail::horn_schunck_pair(prev, next, seq.width(), seq.height(), alpha, iters, flow.fields[t]);
    prev = std::move(next);
  }
  return flow;
}

// FLOW: "FLOW", u32 T-1, W, H, then (T-1)*H*W (dx, dy) f32 pairs.

inline binio::Writer encode_flow(const FlowField& f) {
  binio::Writer w;
  w.magic("FLOW");
  w.u32(static_cast<std::uint32_t>(f.fields.size()));
  w.u32(static_cast<std::uint32_t>(f.width));
  w.u32(static_cast<std::uint32_t>(f.height));
  for (const auto& field : f.fields)
    for (float v : field) w.f32(v);
  return w;
}

inline void write_flow(const std::string& path, const FlowField& f) { encode_flow(f).save(path); }

inline FlowField decode_flow(binio::Reader& r) {
  r.expect_magic("FLOW");
  const auto pairs = r.u32();
  const auto W = r.u32();
  const auto H = r.u32();
  const std::size_t n = static_cast<std::size_t>(W) * H * 2;
  if (r.remaining() != pairs * n * 4) throw ValidationError(r.name() + ": size mismatch");
  FlowField f{static_cast<int>(W), static_cast<int>(H), std::vector<std::vector<float>>(pairs, std::vector<float>(n))};
  for (auto& field : f.fields)
    for (auto& v : field) {
      v = r.f32();
      if (!std::isfinite(v)) throw ValidationError(r.name() + ": non-finite flow value");
    }
  return f;
}

inline FlowField read_flow(const std::string& path, const ImageSequence& seq) {
  auto r = binio::Reader::from_file(path);
  auto f = decode_flow(r);
  if (f.width != seq.width() || f.height != seq.height() || f.fields.size() + 1 != seq.frame_count())
    throw ValidationError(path + ": flow dimensions do not match the sequence (expected " +
                          std::to_string(seq.frame_count() - 1) + " fields of " + std::to_string(seq.width()) + "x" +
                          std::to_string(seq.height()) + ")");
  return f;
}

}  // namespace ksptrack
