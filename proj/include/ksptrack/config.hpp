#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>

#include "ksptrack/errors.hpp"

namespace ksptrack {

/// Tracker parameters. The last block holds preprocessing and sampling knobs.
struct Config {
  int n_superpixels_per_frame = 520;
  int n_trees = 500;
  double tau_rho = 0.5;
  double tau_u = 0.75;
  double tau_trans = 0.9;
  int lfda_knn = 5;
  int lfda_dims = 7;
  double radius = 0.05;   // normalized by max(W, H)
  double sigma_g = 0.3;   // normalized by max(W, H)
  int hoof_bins = 16;
  std::uint64_t rng_seed = 42;
  int l_max = 200;
  int max_outer_iters = 10;

  double slic_compactness = 0.2;
  double flow_alpha = 0.1;
  int flow_iters = 200;
  int lfda_max_samples = 1000;  // per class

  friend bool operator==(const Config&, const Config&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key, int line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("config line " + std::to_string(line) + ": cannot parse value '" + std::string(text) +
                          "' for key " + std::string(key));
  return value;
}

inline void require(bool ok, std::string_view key, std::string_view bound) {
  if (!ok) throw ValidationError("config: " + std::string(key) + " out of range, must be " + std::string(bound));
}

// Field table drives parsing, serialization and validation alike.
template <typename Fn>
void for_each_field(Config& c, Fn&& fn) {
  fn("n_superpixels_per_frame", c.n_superpixels_per_frame);
  fn("n_trees", c.n_trees);
  fn("tau_rho", c.tau_rho);
  fn("tau_u", c.tau_u);
  fn("tau_trans", c.tau_trans);
  fn("lfda_knn", c.lfda_knn);
  fn("lfda_dims", c.lfda_dims);
  fn("radius", c.radius);
  fn("sigma_g", c.sigma_g);
  fn("hoof_bins", c.hoof_bins);
  fn("rng_seed", c.rng_seed);
  fn("l_max", c.l_max);
  fn("max_outer_iters", c.max_outer_iters);
  fn("slic_compactness", c.slic_compactness);
  fn("flow_alpha", c.flow_alpha);
  fn("flow_iters", c.flow_iters);
  fn("lfda_max_samples", c.lfda_max_samples);
}

}  // namespace detail

inline void validate(const Config& c) {
  using detail::require;
  require(c.n_superpixels_per_frame > 0, "n_superpixels_per_frame", "> 0");
  require(c.n_trees > 0, "n_trees", "> 0");
  require(c.tau_rho > 0.0 && c.tau_rho < 1.0, "tau_rho", "in (0,1)");
  require(c.tau_u > 0.0 && c.tau_u < 1.0, "tau_u", "in (0,1)");
  require(c.tau_trans > 0.0 && c.tau_trans < 1.0, "tau_trans", "in (0,1)");
  require(c.lfda_knn > 0, "lfda_knn", "> 0");
  require(c.lfda_dims > 0, "lfda_dims", "> 0");
  require(c.radius > 0.0 && c.radius <= 1.0, "radius", "in (0,1]");
  require(c.sigma_g > 0.0 && c.sigma_g <= 1.0, "sigma_g", "in (0,1]");
  require(c.hoof_bins >= 2, "hoof_bins", ">= 2");
  require(c.l_max > 0, "l_max", "> 0");
  require(c.max_outer_iters > 0, "max_outer_iters", "> 0");
  require(c.slic_compactness > 0.0, "slic_compactness", "> 0");
  require(c.flow_alpha > 0.0, "flow_alpha", "> 0");
  require(c.flow_iters > 0, "flow_iters", "> 0");
  require(c.lfda_max_samples > 0, "lfda_max_samples", "> 0");
}

/// Parses `key = value` lines; `#` starts a comment. Missing keys keep their
/// defaults.
inline Config parse_config(std::string_view text) {
  Config cfg;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    bool known = false;
    detail::for_each_field(cfg, [&](std::string_view name, auto& field) {
      if (name != key) return;
      known = true;
      field = detail::parse_number<std::remove_reference_t<decltype(field)>>(value, key, line_no);
    });
    if (!known)
      throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    if (end == text.size()) break;
  }
  validate(cfg);
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const Config& cfg) {
  Config copy = cfg;
  std::string out;
  detail::for_each_field(copy, [&](std::string_view name, auto& field) {
    out += name;
    out += " = ";
    if constexpr (std::is_floating_point_v<std::remove_reference_t<decltype(field)>>)
      out += detail::format_double(field);
    else
      out += std::to_string(field);
    out += '\n';
  });
  return out;
}

}  // namespace ksptrack
