#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ksptrack/errors.hpp"
#include "ksptrack/metrics.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Mask pixels with a 4-neighbour outside the mask (image border counts as outside).
inline std::vector<std::uint8_t> mask_boundary(const std::vector<std::uint8_t>& mask, int width, int height) {
  std::vector<std::uint8_t> out(mask.size(), 0);
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height && mask[static_cast<std::size_t>(y) * width + x] != 0;
  };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (inside(x, y) && (!inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1)))
        out[static_cast<std::size_t>(y) * width + x] = 1;
  return out;
}

/// RGB overlays, one per frame: predicted pixels blended halfway to red,
/// ground-truth boundary painted green when `gt` is given.
inline std::vector<std::vector<std::uint8_t>> render_overlay(const ImageSequence& seq, const MaskSequence& pred,
                                                             const MaskSequence* gt = nullptr) {
  const int W = seq.width(), H = seq.height();
  const auto npix = static_cast<std::size_t>(W) * H;
  if (pred.size() != seq.frame_count() || (gt && gt->size() != seq.frame_count()))
    throw ValidationError("render_overlay: mask frame count does not match the sequence");
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    if (pred[t].size() != npix || (gt && (*gt)[t].size() != npix))
      throw ValidationError("render_overlay: mask size does not match frame " + std::to_string(t));
    auto& img = out.emplace_back(npix * 3);
    const auto contour = gt ? mask_boundary((*gt)[t], W, H) : std::vector<std::uint8_t>(npix, 0);
    for (std::size_t i = 0; i < npix; ++i) {
      const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
      for (int c = 0; c < 3; ++c) {
        const float v = seq.at(t, x, y, seq.channels() == 3 ? c : 0);
        double out_v = v;
        if (pred[t][i]) out_v = 0.5 * v + (c == 0 ? 0.5 : 0.0);
        if (contour[i]) out_v = c == 1 ? 1.0 : 0.0;
        img[i * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(out_v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return out;
}

}  // namespace ksptrack
