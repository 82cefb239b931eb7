#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ksptrack/errors.hpp"
#include "ksptrack/optical_flow.hpp"
#include "ksptrack/superpixels.hpp"

namespace ksptrack {

/// Per-superpixel histograms of oriented optical flow, indexed by the
/// superpixel map's global index. Every row sums to one.
class HoofTable {
 public:
  HoofTable() = default;
  HoofTable(std::size_t rows, int bins) : bins_(bins), data_(rows * static_cast<std::size_t>(bins), 0.0) {}

  [[nodiscard]] int bins() const noexcept { return bins_; }
  [[nodiscard]] std::size_t rows() const noexcept { return bins_ == 0 ? 0 : data_.size() / bins_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * bins_, static_cast<std::size_t>(bins_)};
  }
  [[nodiscard]] std::span<double> row(std::size_t i) { return {data_.data() + i * bins_, static_cast<std::size_t>(bins_)}; }

 private:
  int bins_ = 0;
  std::vector<double> data_;
};

/// Bin of a flow vector: the direction is mirrored about the vertical axis
/// into [-pi/2, pi/2] (so left and right motion coincide), then split into
/// `bins` equal sectors.
inline int hoof_bin(double dx, double dy, int bins) {
  const double theta = std::atan2(dy, std::abs(dx));
  const int b = static_cast<int>(std::floor((theta + std::numbers::pi / 2) / std::numbers::pi * bins));
  return std::clamp(b, 0, bins - 1);
}

/// Magnitude-weighted orientation histogram of one flow field restricted to
/// a pixel set. Zero total magnitude gives the uniform histogram.
inline void hoof_histogram(const std::vector<float>& field, std::span<const std::uint32_t> pixels, double sign,
                           std::span<double> out) {
  const int bins = static_cast<int>(out.size());
  std::fill(out.begin(), out.end(), 0.0);
  double total = 0.0;
  for (auto p : pixels) {
    const double dx = sign * field[2 * p];
    const double dy = sign * field[2 * p + 1];
    const double mag = std::hypot(dx, dy);
    if (mag == 0.0) continue;
    out[hoof_bin(dx, dy, bins)] += mag;
    total += mag;
  }
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  } else {
    std::fill(out.begin(), out.end(), 1.0 / bins);
  }
}

/// HOOF of every superpixel in the given time direction. Forward: frame t
/// uses the t -> t+1 field (the last frame reuses the last field).
/// Backward: frame t uses the reversed t -> t-1 field, i.e. the negated
/// forward field t-1 -> t (frame 0 reuses the first field).
inline HoofTable hoof(const FlowField& flow, const SuperpixelMap& sp, int bins, Direction dir = Direction::Forward) {
  if (bins < 2) throw ValidationError("hoof: bins must be >= 2");
  if (flow.fields.empty()) throw ValidationError("hoof: no flow fields");
  if (flow.width != sp.width() || flow.height != sp.height() || flow.fields.size() + 1 != sp.frame_count())
    throw ValidationError("hoof: flow and superpixel dimensions differ");
  HoofTable table(sp.total(), bins);
  const std::size_t last = flow.fields.size() - 1;
  for (std::size_t t = 0; t < sp.frame_count(); ++t) {
    const std::size_t field = dir == Direction::Forward ? std::min(t, last) : (t == 0 ? 0 : t - 1);
    const double sign = dir == Direction::Forward ? 1.0 : -1.0;
    for (std::uint32_t n = 0; n < sp.count(t); ++n) {
      const SuperpixelRef r{static_cast<std::uint32_t>(t), n};
      hoof_histogram(flow.fields[field], sp.pixels(r), sign, table.row(sp.global_index(r)));
    }
  }
  return table;
}

/// Histogram intersection similarity sum_b min(u_b, v_b).
inline double histogram_intersection(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ValidationError("histogram_intersection: bin count mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  double s = 0.0;
  for (std::size_t b = 0; b < u.size(); ++b) s += std::min(u[b], v[b]);
  return s;
}

}  // namespace ksptrack
