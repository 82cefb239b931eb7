#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ksptrack/errors.hpp"

namespace ksptrack {

/// T frames of W x H pixels with 1 (gray) or 3 (RGB) interleaved channels,
/// values normalized to [0, 1].
class ImageSequence {
 public:
  ImageSequence() = default;

  ImageSequence(int width, int height, int channels, std::vector<std::vector<float>> frames)
      : width_(width), height_(height), channels_(channels), frames_(std::move(frames)) {
    validate();
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] std::size_t frame_count() const noexcept { return frames_.size(); }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  [[nodiscard]] const std::vector<float>& frame(std::size_t t) const { return frames_.at(t); }

  [[nodiscard]] float at(std::size_t t, int x, int y, int c = 0) const noexcept {
    return frames_[t][(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  /// Luma 0.299 R + 0.587 G + 0.114 B (identity for gray frames).
  [[nodiscard]] float luma(std::size_t t, int x, int y) const noexcept {
    if (channels_ == 1) return at(t, x, y);
    return 0.299F * at(t, x, y, 0) + 0.587F * at(t, x, y, 1) + 0.114F * at(t, x, y, 2);
  }

  [[nodiscard]] std::vector<float> luma_frame(std::size_t t) const {
    std::vector<float> out(pixel_count());
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) out[static_cast<std::size_t>(y) * width_ + x] = luma(t, x, y);
    return out;
  }

 private:
  void validate() const {
    if (width_ <= 0 || height_ <= 0) throw ValidationError("image sequence: non-positive frame size");
    if (channels_ != 1 && channels_ != 3)
      throw ValidationError("image sequence: channels must be 1 or 3, got " + std::to_string(channels_));
    if (frames_.size() < 2)
      throw ValidationError("image sequence: need at least 2 frames, got " + std::to_string(frames_.size()));
    const std::size_t expected = pixel_count() * static_cast<std::size_t>(channels_);
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      if (frames_[t].size() != expected)
        throw ValidationError("image sequence: frame " + std::to_string(t) + " has wrong size");
      for (float v : frames_[t])
        if (!(v >= 0.0F && v <= 1.0F))
          throw ValidationError("image sequence: frame " + std::to_string(t) + " has value outside [0,1]");
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<std::vector<float>> frames_;
};

/// 2D pixel location, x = column, y = row, origin top-left.
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Per-frame annotation points; a frame may hold zero, one or several.
class PointAnnotations {
 public:
  PointAnnotations() = default;
  explicit PointAnnotations(std::size_t frames) : points_(frames) {}

  [[nodiscard]] std::size_t frame_count() const noexcept { return points_.size(); }
  [[nodiscard]] const std::vector<Point>& in_frame(std::size_t t) const { return points_.at(t); }
  void add(std::size_t t, Point p) { points_.at(t).push_back(p); }
  void clear_frame(std::size_t t) { points_.at(t).clear(); }

  [[nodiscard]] std::size_t total() const noexcept {
    std::size_t n = 0;
    for (const auto& f : points_) n += f.size();
    return n;
  }

  void check_bounds(int width, int height) const {
    for (std::size_t t = 0; t < points_.size(); ++t)
      for (const auto& p : points_[t])
        if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height))
          throw ValidationError("annotation in frame " + std::to_string(t) + " at (" + std::to_string(p.x) +
                                ", " + std::to_string(p.y) + ") is outside the image");
  }

 private:
  std::vector<std::vector<Point>> points_;
};

/// Identifies superpixel n of frame t.
struct SuperpixelRef {
  std::uint32_t frame = 0;
  std::uint32_t id = 0;
  friend auto operator<=>(const SuperpixelRef&, const SuperpixelRef&) = default;
};

enum class Direction { Forward, Backward };

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

}  // namespace ksptrack
