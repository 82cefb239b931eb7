#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <png.h>

#include "ksptrack/errors.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

namespace fs = std::filesystem;

/// One decoded frame, values normalized to [0, 1], interleaved channels.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;
};

inline Frame read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw ValidationError("cannot read PNG '" + path + "': " + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ValidationError("cannot decode PNG '" + path + "': " + msg);
  }
  Frame f{static_cast<int>(img.width), static_cast<int>(img.height), color ? 3 : 1, {}};
  f.data.reserve(buf.size());
  for (auto v : buf) f.data.push_back(static_cast<float>(v) / 255.0f);
  return f;
}

/// 8-bit PNG; channels 1 (gray) or 3 (RGB).
inline void write_png(const std::string& path, int width, int height, int channels,
                      const std::vector<std::uint8_t>& data) {
  if (channels != 1 && channels != 3) throw ValidationError("write_png: channels must be 1 or 3");
  if (data.size() != static_cast<std::size_t>(width) * height * channels)
    throw ValidationError("write_png: buffer size does not match dimensions");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data.data(), 0, nullptr))
    throw ValidationError("cannot write PNG '" + path + "': " + img.message);
}

inline std::vector<std::uint8_t> to_bytes(const std::vector<float>& v) {
  std::vector<std::uint8_t> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](float x) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
  });
  return out;
}

/// Binary mask (nonzero = object) as an 8-bit PNG with 0 / 255.
inline void write_mask_png(const std::string& path, int width, int height, const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> px(mask.size());
  std::transform(mask.begin(), mask.end(), px.begin(), [](std::uint8_t m) -> std::uint8_t { return m ? 255 : 0; });
  write_png(path, width, height, 1, px);
}

/// Reads every P5/P6 image in a file; several concatenated images form a
/// multi-frame container. Maxval up to 65535 (16-bit big-endian samples).
inline std::vector<Frame> read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) { throw ValidationError("PNM '" + path + "': " + msg); };
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_ws();
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) fail("header value too large");
      any = true;
    }
    if (!any) fail("malformed header");
    return static_cast<int>(v);
  };
  std::vector<Frame> frames;
  for (;;) {
    skip_ws();
    if (pos >= bytes.size()) break;
    if (pos + 2 > bytes.size() || bytes[pos] != 'P' || (bytes[pos + 1] != '5' && bytes[pos + 1] != '6'))
      fail("expected P5 or P6 magic at byte " + std::to_string(pos));
    const int channels = bytes[pos + 1] == '6' ? 3 : 1;
    pos += 2;
    const int w = number(), h = number(), maxval = number();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) fail("invalid header");
    ++pos;  // single whitespace before raster
    const std::size_t samples = static_cast<std::size_t>(w) * h * channels;
    const std::size_t width_bytes = maxval > 255 ? 2 : 1;
    if (pos + samples * width_bytes > bytes.size()) fail("truncated raster");
    Frame f{w, h, channels, std::vector<float>(samples)};
    for (std::size_t i = 0; i < samples; ++i) {
      unsigned v = static_cast<unsigned char>(bytes[pos]);
      if (width_bytes == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + 1]);
      pos += width_bytes;
      f.data[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
    frames.push_back(std::move(f));
  }
  if (frames.empty()) fail("no image");
  return frames;
}

inline void write_pnm(std::ostream& os, const Frame& f) {
  os << (f.channels == 3 ? "P6" : "P5") << '\n' << f.width << ' ' << f.height << "\n255\n";
  const auto b = to_bytes(f.data);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

namespace detail {

inline bool is_frame_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// Index = last run of digits in the file stem, or -1.
inline long frame_index(const fs::path& p) {
  const auto stem = p.stem().string();
  auto end = stem.find_last_of("0123456789");
  if (end == std::string::npos) return -1;
  auto begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  return std::stol(stem.substr(begin, end - begin + 1));
}

inline Frame read_frame_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(p.string());
  auto frames = read_pnm(p.string());
  if (frames.size() != 1) throw ValidationError("'" + p.string() + "' holds several images; pass it as the sequence");
  return frames.front();
}

}  // namespace detail

/// Frames from a directory of numbered PNG/PGM/PPM files (sorted by the
/// number in the file name; indices must be contiguous) or from a single
/// multi-image PNM container.
inline std::vector<Frame> load_frames(const std::string& path) {
  const fs::path root(path);
  if (!fs::exists(root)) throw ValidationError("'" + path + "' does not exist");
  std::vector<Frame> frames;
  if (fs::is_directory(root)) {
    std::map<long, fs::path> indexed;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_regular_file() || !detail::is_frame_file(entry.path())) continue;
      const long idx = detail::frame_index(entry.path());
      if (idx < 0) throw ValidationError("frame file '" + entry.path().filename().string() + "' has no index");
      if (!indexed.emplace(idx, entry.path()).second)
        throw ValidationError("duplicate frame index " + std::to_string(idx) + " in '" + path + "'");
    }
    if (indexed.empty()) throw ValidationError("no PNG/PGM/PPM frames in '" + path + "'");
    long expected = indexed.begin()->first;
    for (const auto& [idx, file] : indexed) {
      if (idx != expected)
        throw ValidationError("missing frame index " + std::to_string(expected) + " in '" + path + "'");
      ++expected;
      frames.push_back(detail::read_frame_file(file));
    }
  } else {
    frames = detail::is_frame_file(root) && root.extension() == ".png"
                 ? std::vector<Frame>{read_png(path)}
                 : read_pnm(path);
  }
  for (std::size_t t = 1; t < frames.size(); ++t)
    if (frames[t].width != frames[0].width || frames[t].height != frames[0].height ||
        frames[t].channels != frames[0].channels)
      throw ValidationError("frame " + std::to_string(t) + " is " + std::to_string(frames[t].width) + "x" +
                            std::to_string(frames[t].height) + "x" + std::to_string(frames[t].channels) +
                            ", frame 0 is " + std::to_string(frames[0].width) + "x" +
                            std::to_string(frames[0].height) + "x" + std::to_string(frames[0].channels));
  return frames;
}

inline ImageSequence load_sequence(const std::string& path) {
  auto frames = load_frames(path);
  std::vector<std::vector<float>> data;
  for (auto& f : frames) data.push_back(std::move(f.data));
  return ImageSequence(frames[0].width, frames[0].height, frames[0].channels, std::move(data));
}

/// Binary masks (value > 0.5 on the first channel = object).
inline std::vector<std::vector<std::uint8_t>> load_masks(const std::string& path, int& width, int& height) {
  const auto frames = load_frames(path);
  width = frames[0].width;
  height = frames[0].height;
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& f : frames) {
    auto& m = out.emplace_back(static_cast<std::size_t>(f.width) * f.height);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = f.data[i * f.channels] > 0.5f ? 1 : 0;
  }
  return out;
}

/// Writes frames as <dir>/<prefix>NNNN.png.
inline void write_sequence_png(const std::string& dir, const ImageSequence& seq, const std::string& prefix = "frame_") {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu.png", t);
    write_png((fs::path(dir) / (prefix + name)).string(), seq.width(), seq.height(), seq.channels(),
              to_bytes(seq.frame(t)));
  }
}

inline void write_masks_png(const std::string& dir, int width, int height,
                            const std::vector<std::vector<std::uint8_t>>& masks, const std::string& prefix = "mask_") {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu.png", t);
    write_mask_png((fs::path(dir) / (prefix + name)).string(), width, height, masks[t]);
  }
}

}  // namespace ksptrack
