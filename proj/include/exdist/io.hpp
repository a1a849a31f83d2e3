#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/vec.hpp"

namespace exdist::io {

/// Writes `text` to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Removes every "seconds" entry from `j` and returns them in a tree of the
/// same shape, so that the remainder is reproducible byte for byte.
inline nlohmann::json extract_timings(nlohmann::json& j) {
  nlohmann::json out;
  if (j.is_object()) {
    if (j.contains("seconds")) {
      out["seconds"] = j["seconds"];
      j.erase("seconds");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      auto sub = extract_timings(it.value());
      if (!sub.is_null()) out[it.key()] = std::move(sub);
    }
  } else if (j.is_array()) {
    bool any = false;
    nlohmann::json arr = nlohmann::json::array();
    for (auto& e : j) {
      auto sub = extract_timings(e);
      any = any || !sub.is_null();
      arr.push_back(std::move(sub));
    }
    if (any) out = std::move(arr);
  }
  return out;
}

/// Minimal CSV table; numbers are written with full round-trip precision.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }

  template <class... T>
  void row(const T&... v) {
    std::vector<std::string> cells{cell(v)...};
    row_strings(cells);
  }

  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw std::logic_error("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

  static std::string cell(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string q = "\"";
    for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  static std::string cell(const char* v) { return cell(std::string(v)); }

 private:
  std::size_t cols_;
  std::string text_;
};

/// SVG canvas mapping a world box onto a fixed pixel width, y up.
class Svg {
 public:
  Svg(const Box<2>& world, double width_px = 640.0) : w_(world), scale_(width_px / std::max(world.extent(0), 1e-300)) {
    width_ = width_px;
    height_ = world.extent(1) * scale_;
  }

  void rect(const Box<2>& b, const std::string& fill, const std::string& stroke = "none", double opacity = 1.0) {
    body_ << "<rect x=\"" << px(b.lo[0]) << "\" y=\"" << py(b.hi[1]) << "\" width=\"" << b.extent(0) * scale_
          << "\" height=\"" << b.extent(1) * scale_ << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\" stroke-width=\"0.5\" fill-opacity=\"" << opacity << "\"/>\n";
  }

  void circle(const Vec2& c, double r, const std::string& stroke, const std::string& fill = "none") {
    body_ << "<circle cx=\"" << px(c[0]) << "\" cy=\"" << py(c[1]) << "\" r=\"" << r * scale_ << "\" fill=\"" << fill
          << "\" stroke=\"" << stroke << "\" stroke-width=\"1\"/>\n";
  }

  void polyline(const std::vector<Vec2>& pts, const std::string& stroke, bool closed = false) {
    body_ << (closed ? "<polygon" : "<polyline") << " fill=\"none\" stroke=\"" << stroke
          << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : pts) body_ << px(p[0]) << ',' << py(p[1]) << ' ';
    body_ << "\"/>\n";
  }

  void point(const Vec2& p, const std::string& fill, double r_px = 1.5) {
    body_ << "<circle cx=\"" << px(p[0]) << "\" cy=\"" << py(p[1]) << "\" r=\"" << r_px << "\" fill=\"" << fill
          << "\"/>\n";
  }

  std::string str() const {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
      << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body_.str() << "</svg>\n";
    return s.str();
  }

  /// White-to-dark-blue ramp for t in [0, 1].
  static std::string ramp(double t) {
    t = std::clamp(std::isfinite(t) ? t : 1.0, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(255 * (1 - t)));
    const int g = static_cast<int>(std::lround(255 * (1 - 0.8 * t)));
    const int b = static_cast<int>(std::lround(255 - 100 * t));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
  }

 private:
  double px(double x) const { return (x - w_.lo[0]) * scale_; }
  double py(double y) const { return (w_.hi[1] - y) * scale_; }

  Box<2> w_;
  double scale_;
  double width_ = 0.0, height_ = 0.0;
  std::ostringstream body_;
};

}  // namespace exdist::io
