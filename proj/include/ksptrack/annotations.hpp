#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ksptrack/errors.hpp"
#include "ksptrack/types.hpp"

namespace ksptrack {

/// Parses `frame,x,y` rows. The first non-blank row may be a header. Row
/// numbers in errors are 1-based line numbers. Points must satisfy
/// 0 <= x < width, 0 <= y < height and frame < frame_count.
inline PointAnnotations parse_annotations(std::string_view text, std::size_t frame_count, int width, int height) {
  PointAnnotations pts(frame_count);
  std::size_t row = 0;
  bool seen_row = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++row;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const bool first = !seen_row;
    seen_row = true;

    std::vector<std::string_view> fields;
    for (std::size_t p = 0;;) {
      auto comma = line.find(',', p);
      fields.push_back(line.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p));
      if (comma == std::string_view::npos) break;
      p = comma + 1;
    }
    auto fail = [&](const std::string& msg) {
      throw ValidationError("annotations row " + std::to_string(row) + ": " + msg);
    };
    auto has_alpha = [](std::string_view s) {
      for (char c : s)
        if (std::isalpha(static_cast<unsigned char>(c))) return true;
      return false;
    };
    const bool header = first && has_alpha(line);
    if (fields.size() != 3) {
      if (header) continue;
      fail("expected 3 fields 'frame,x,y'");
    }
    auto trim = [](std::string_view s) {
      while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
      while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
      return s;
    };
    unsigned long frame = 0;
    double x = 0, y = 0;
    auto f0 = trim(fields[0]), f1 = trim(fields[1]), f2 = trim(fields[2]);
    auto ok = [](std::string_view s, auto& out) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
    };
    if (!ok(f0, frame) || !ok(f1, x) || !ok(f2, y)) {
      if (header) continue;
      fail("malformed row '" + std::string(line) + "'");
    }
    if (frame >= frame_count)
      fail("frame " + std::to_string(frame) + " out of range (sequence has " + std::to_string(frame_count) + " frames)");
    if (!(x >= 0.0 && x < width && y >= 0.0 && y < height))
      fail("point (" + std::string(f1) + ", " + std::string(f2) + ") outside the " + std::to_string(width) + "x" +
           std::to_string(height) + " image");
    pts.add(frame, {x, y});
  }
  return pts;
}

inline PointAnnotations load_annotations(const std::string& path, std::size_t frame_count, int width, int height) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open annotations '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_annotations(ss.str(), frame_count, width, height);
}

inline void write_annotations(std::ostream& os, const PointAnnotations& pts) {
  os << "frame,x,y\n";
  for (std::size_t t = 0; t < pts.frame_count(); ++t)
    for (const auto& p : pts.in_frame(t)) os << t << ',' << p.x << ',' << p.y << '\n';
}

}  // namespace ksptrack
