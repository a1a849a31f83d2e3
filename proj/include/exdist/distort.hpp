#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/geom.hpp"
#include "exdist/modfam.hpp"

namespace exdist::distort {

using geom::Ball;

/// Homeomorphism sampled at the nodes of a square lattice, interpolated
/// bilinearly. The inverse is found from the nearest image node followed by
/// Newton steps on the bilinear patches around it.
class SampledMap {
 public:
  SampledMap() = default;

  template <class F>
  static SampledMap from_function(const Box<2>& domain, int cells, F&& f) {
    if (cells < 2) throw DomainError("sampled map needs at least 2 cells per side");
    SampledMap m;
    m.origin_ = domain.lo;
    m.h_ = std::max(domain.extent(0), domain.extent(1)) / cells;
    m.nx_ = static_cast<int>(std::lround(domain.extent(0) / m.h_)) + 1;
    m.ny_ = static_cast<int>(std::lround(domain.extent(1) / m.h_)) + 1;
    m.values_.resize(static_cast<std::size_t>(m.nx_) * m.ny_);
    for (int j = 0; j < m.ny_; ++j)
      for (int i = 0; i < m.nx_; ++i) m.values_[m.idx(i, j)] = f(m.node(i, j));
    m.build();
    return m;
  }

  /// Rows "x1,x2,f1,f2" on a square lattice (any row order).
  static SampledMap from_csv(std::istream& in) {
    std::vector<std::array<double, 4>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '.'))
        continue;
      std::array<double, 4> r{};
      std::stringstream ss(line);
      char comma;
      if (!(ss >> r[0] >> comma >> r[1] >> comma >> r[2] >> comma >> r[3]))
        throw DomainError("sampled map CSV: malformed row '" + line + "'");
      rows.push_back(r);
    }
    if (rows.size() < 4) throw DomainError("sampled map CSV: too few rows");
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      xs.push_back(r[0]);
      ys.push_back(r[1]);
    }
    auto uniq = [](std::vector<double>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(xs);
    uniq(ys);
    SampledMap m;
    m.origin_ = {xs.front(), ys.front()};
    m.nx_ = static_cast<int>(xs.size());
    m.ny_ = static_cast<int>(ys.size());
    m.h_ = xs.size() > 1 ? (xs.back() - xs.front()) / (xs.size() - 1) : 1.0;
    if (rows.size() != static_cast<std::size_t>(m.nx_) * m.ny_)
      throw DomainError("sampled map CSV: rows do not form a full lattice");
    m.values_.resize(rows.size());
    for (const auto& r : rows) {
      const int i = static_cast<int>(std::lround((r[0] - m.origin_[0]) / m.h_));
      const int j = static_cast<int>(std::lround((r[1] - m.origin_[1]) / m.h_));
      m.values_[m.idx(i, j)] = {r[2], r[3]};
    }
    m.build();
    return m;
  }

  void to_csv(std::ostream& out) const {
    out << "x1,x2,f1,f2\n";
    out.precision(17);
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        const Vec2 p = node(i, j), v = values_[idx(i, j)];
        out << p[0] << ',' << p[1] << ',' << v[0] << ',' << v[1] << '\n';
      }
  }

  double spacing() const { return h_; }
  Box<2> domain() const { return {origin_, {origin_[0] + (nx_ - 1) * h_, origin_[1] + (ny_ - 1) * h_}}; }
  Box<2> image_bounds() const { return image_box_; }
  std::size_t nodes() const { return values_.size(); }

  double boundary_distance(const Vec2& x) const {
    const Box<2> d = domain();
    return std::min({x[0] - d.lo[0], d.hi[0] - x[0], x[1] - d.lo[1], d.hi[1] - x[1]});
  }

  Vec2 operator()(const Vec2& x) const {
    int i, j;
    double s, t;
    cell_of(x, i, j, s, t);
    return patch(i, j, s, t);
  }

  /// Preimage of y, or nothing when y is not in the sampled image.
  std::optional<Vec2> inverse(const Vec2& y) const {
    const auto [bi, bj] = bucket_of(y);
    double best = std::numeric_limits<double>::infinity();
    std::size_t nearest = 0;
    for (int ring = 0; ring <= std::max(bx_, by_); ++ring) {
      for (int dj = -ring; dj <= ring; ++dj)
        for (int di = -ring; di <= ring; ++di) {
          if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
          const int u = bi + di, v = bj + dj;
          if (u < 0 || v < 0 || u >= bx_ || v >= by_) continue;
          for (auto k : buckets_[static_cast<std::size_t>(v) * bx_ + u]) {
            const double d = distance2<2>(values_[k], y);
            if (d < best) {
              best = d;
              nearest = k;
            }
          }
        }
      // Everything beyond this ring lies at least ring * bucket width away.
      if (std::isfinite(best) && std::sqrt(best) <= ring * bucket_) break;
    }
    const int ni = static_cast<int>(nearest % nx_), nj = static_cast<int>(nearest / nx_);
    for (int r = 1; r <= 2; ++r)
      for (int cj = nj - r; cj < nj + r; ++cj)
        for (int ci = ni - r; ci < ni + r; ++ci) {
          if (ci < 0 || cj < 0 || ci >= nx_ - 1 || cj >= ny_ - 1) continue;
          if (auto st = solve_patch(ci, cj, y)) return Vec2{origin_[0] + (ci + (*st)[0]) * h_,
                                                             origin_[1] + (cj + (*st)[1]) * h_};
        }
    return std::nullopt;
  }

  /// Throws ConsistencyError unless node values are distinct and the inverse
  /// recovers every probed node within half a cell.
  void validate(int stride = 7) const {
    std::vector<Vec2> v = values_;
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) throw ConsistencyError("sampled map is not injective");
    for (std::size_t k = 0; k < values_.size(); k += static_cast<std::size_t>(stride)) {
      const Vec2 x = node(static_cast<int>(k % nx_), static_cast<int>(k / nx_));
      const auto back = inverse(values_[k]);
      if (!back || distance<2>(*back, x) > 0.5 * h_)
        throw ConsistencyError("sampled map inverse does not round-trip at a node");
    }
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  Vec2 node(int i, int j) const { return {origin_[0] + i * h_, origin_[1] + j * h_}; }

  void cell_of(const Vec2& x, int& i, int& j, double& s, double& t) const {
    const double u = (x[0] - origin_[0]) / h_, w = (x[1] - origin_[1]) / h_;
    if (u < -1e-9 || w < -1e-9 || u > nx_ - 1 + 1e-9 || w > ny_ - 1 + 1e-9)
      throw DomainError("point outside the sampled domain");
    i = std::clamp(static_cast<int>(std::floor(u)), 0, nx_ - 2);
    j = std::clamp(static_cast<int>(std::floor(w)), 0, ny_ - 2);
    s = std::clamp(u - i, 0.0, 1.0);
    t = std::clamp(w - j, 0.0, 1.0);
  }

  Vec2 patch(int i, int j, double s, double t) const {
    const Vec2 &a = values_[idx(i, j)], &b = values_[idx(i + 1, j)];
    const Vec2 &c = values_[idx(i, j + 1)], &d = values_[idx(i + 1, j + 1)];
    return (1 - s) * (1 - t) * a + s * (1 - t) * b + (1 - s) * t * c + s * t * d;
  }

  std::optional<std::array<double, 2>> solve_patch(int i, int j, const Vec2& y) const {
    const Vec2 &a = values_[idx(i, j)], &b = values_[idx(i + 1, j)];
    const Vec2 &c = values_[idx(i, j + 1)], &d = values_[idx(i + 1, j + 1)];
    double s = 0.5, t = 0.5;
    const double scale = distance<2>(a, d) + distance<2>(b, c);
    for (int it = 0; it < 30; ++it) {
      const Vec2 r = patch(i, j, s, t) - y;
      const Vec2 ds = (1 - t) * (b - a) + t * (d - c);
      const Vec2 dt = (1 - s) * (c - a) + s * (d - b);
      const double det = ds[0] * dt[1] - ds[1] * dt[0];
      if (det == 0.0) return std::nullopt;
      const double es = (r[0] * dt[1] - r[1] * dt[0]) / det;
      const double et = (ds[0] * r[1] - ds[1] * r[0]) / det;
      s -= es;
      t -= et;
      if (std::fabs(es) + std::fabs(et) < 1e-14) break;
      if (std::fabs(s) > 4 || std::fabs(t) > 4) return std::nullopt;
    }
    const double eps = 1e-9;
    if (s < -eps || t < -eps || s > 1 + eps || t > 1 + eps) return std::nullopt;
    if (distance<2>(patch(i, j, s, t), y) > 1e-9 * (scale + 1.0)) return std::nullopt;
    return std::array<double, 2>{std::clamp(s, 0.0, 1.0), std::clamp(t, 0.0, 1.0)};
  }

  std::pair<int, int> bucket_of(const Vec2& y) const {
    const int u = static_cast<int>(std::floor((y[0] - image_box_.lo[0]) / bucket_));
    const int v = static_cast<int>(std::floor((y[1] - image_box_.lo[1]) / bucket_));
    return {std::clamp(u, 0, bx_ - 1), std::clamp(v, 0, by_ - 1)};
  }

  void build() {
    image_box_ = Box<2>::empty();
    for (const auto& v : values_) image_box_.expand(v);
    const double ext = std::max({image_box_.extent(0), image_box_.extent(1), 1e-300});
    const int per = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(values_.size()))));
    bucket_ = ext / per;
    bx_ = std::max(1, static_cast<int>(std::ceil(image_box_.extent(0) / bucket_)) + 1);
    by_ = std::max(1, static_cast<int>(std::ceil(image_box_.extent(1) / bucket_)) + 1);
    buckets_.assign(static_cast<std::size_t>(bx_) * by_, {});
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const auto [u, v] = bucket_of(values_[k]);
      buckets_[static_cast<std::size_t>(v) * bx_ + u].push_back(k);
    }
  }

  Vec2 origin_{};
  double h_ = 1.0;
  int nx_ = 0, ny_ = 0;
  std::vector<Vec2> values_;
  Box<2> image_box_;
  double bucket_ = 1.0;
  int bx_ = 1, by_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

struct DistortionRow {
  double r = 0.0;
  double L = 0.0;  // sup |f(x) - f(y)| over |x - y| <= r
  double l = 0.0;  // inf |f(x) - f(y)| over |x - y| >= r
  double ratio() const { return L / l; }
};

struct DistortionProbe {
  Vec2 x{};
  std::vector<DistortionRow> rows;  // radii in decreasing order
  double H = 0.0;                   // max of L/l over the two smallest radii

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& r : rows) t.push_back({{"r", r.r}, {"L", r.L}, {"l", r.l}, {"ratio", r.ratio()}});
    return {{"x", x}, {"rows", t}, {"H", H}};
  }
};

/// L_f(x,r) and l_f(x,r) along a radius ladder. For a homeomorphism both
/// extremes are attained on the sphere |y - x| = r, which is sampled at
/// `directions` points through the interpolated map.
inline DistortionProbe metric_distortion(const SampledMap& f, const Vec2& x, std::vector<double> ladder,
                                         int directions = 720) {
  if (ladder.empty()) throw DomainError("metric_distortion: empty radius ladder");
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  if (ladder.front() >= f.boundary_distance(x)) throw DomainError("metric_distortion: point too close to the boundary");
  if (ladder.back() < 2.0 * f.spacing()) throw DomainError("metric_distortion: radii must be at least two cells");
  DistortionProbe probe;
  probe.x = x;
  const Vec2 fx = f(x);
  for (double r : ladder) {
    DistortionRow row;
    row.r = r;
    row.l = std::numeric_limits<double>::infinity();
    for (int k = 0; k < directions; ++k) {
      const double t = 2.0 * std::numbers::pi * k / directions;
      const double d = distance<2>(f(x + r * Vec2{std::cos(t), std::sin(t)}), fx);
      row.L = std::max(row.L, d);
      row.l = std::min(row.l, d);
    }
    if (!(row.l > 0.0)) throw ConsistencyError("metric_distortion: map collapses a sphere point onto f(x)");
    probe.rows.push_back(row);
  }
  const std::size_t n = probe.rows.size();
  probe.H = probe.rows[n - 1].ratio();
  if (n >= 2) probe.H = std::max(probe.H, probe.rows[n - 2].ratio());
  return probe;
}

struct EccentricOptions {
  double resolution = 0.01;  // eccentricity search pitch, relative to the set diameter
  int boundary_points = 256;
  int offsets = 4;            // off-centre candidates per family
};

struct EccentricEstimate {
  double value = std::numeric_limits<double>::infinity();
  double balls = std::numeric_limits<double>::infinity();      // family (a)
  double pullbacks = std::numeric_limits<double>::infinity();  // family (b)
  std::size_t candidates = 0;

  nlohmann::json to_json() const {
    return {{"value", value}, {"balls", balls}, {"pullbacks", pullbacks}, {"candidates", candidates}};
  }
};

namespace detail {

using Map = std::function<std::optional<Vec2>(const Vec2&)>;

inline std::vector<Vec2> circle_points(const Ball<2>& b, int n) {
  std::vector<Vec2> out;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    out.push_back(b.center + b.radius * Vec2{std::cos(t), std::sin(t)});
  }
  return out;
}

inline std::optional<std::vector<Vec2>> map_loop(const Map& g, const std::vector<Vec2>& loop) {
  std::vector<Vec2> out;
  for (const auto& p : loop) {
    auto q = g(p);
    if (!q) return std::nullopt;
    out.push_back(*q);
  }
  return out;
}

inline double loop_diameter(const std::vector<Vec2>& loop) {
  double d = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i)
    for (std::size_t j = i + 1; j < loop.size(); ++j) d = std::max(d, distance2<2>(loop[i], loop[j]));
  return std::sqrt(d);
}

inline double loop_eccentricity(const std::vector<Vec2>& loop, const Vec2& hint, const EccentricOptions& o) {
  const auto region = geom::Region<2>::polygon(loop);
  return geom::eccentricity(region, o.resolution * region.bbox.diameter(), {hint}).value;
}

// max(E(B), E(g(B))) for a ball B, with E(B) = 1.
inline std::optional<double> ball_candidate(const Map& g, const Ball<2>& b, const EccentricOptions& o) {
  const auto img = map_loop(g, circle_points(b, o.boundary_points));
  if (!img) return std::nullopt;
  const auto hint = g(b.center);
  return std::max(1.0, loop_eccentricity(*img, hint ? *hint : img->front(), o));
}

inline std::vector<Vec2> offsets(double rho, int n) {
  std::vector<Vec2> out{{0.0, 0.0}};
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    out.push_back(0.5 * rho * Vec2{std::cos(t), std::sin(t)});
  }
  return out;
}

}  // namespace detail

/// Family (a): balls of radius r containing x, scored by max(1, E(f(B))).
/// Family (b): pullbacks of range balls containing f(x) whose diameter is at
/// most 2r, scored by max(E(f^{-1}(B')), 1). Returns the smaller score.
inline EccentricEstimate eccentric_distortion(const SampledMap& f, const Vec2& x, double r,
                                              const EccentricOptions& opts = {}) {
  if (!(r > 0.0) || !(3.0 * r < f.boundary_distance(x)))
    throw DomainError("eccentric_distortion: need 0 < r < dist(x, boundary)/3");
  EccentricEstimate est;
  const detail::Map fwd = [&](const Vec2& p) -> std::optional<Vec2> { return f(p); };
  const detail::Map inv = [&](const Vec2& q) { return f.inverse(q); };
  for (const auto& o : detail::offsets(r, opts.offsets)) {
    ++est.candidates;
    if (auto v = detail::ball_candidate(fwd, Ball<2>(x + o, r), opts)) est.balls = std::min(est.balls, *v);
  }
  const Vec2 fx = f(x);
  // Largest range radius whose pullback has diameter <= 2r, by bisection.
  auto pull_diam = [&](const Ball<2>& b) {
    const auto pre = detail::map_loop(inv, detail::circle_points(b, 64));
    return pre ? detail::loop_diameter(*pre) : std::numeric_limits<double>::infinity();
  };
  double lo = 0.0, hi = 2.0 * r;
  {
    int grow = 0;
    while (pull_diam(Ball<2>(fx, hi)) <= 2.0 * r && grow++ < 40) hi *= 2.0;
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (pull_diam(Ball<2>(fx, mid)) <= 2.0 * r ? lo : hi) = mid;
  }
  if (lo > 0.0) {
    for (const auto& o : detail::offsets(lo, opts.offsets)) {
      const Ball<2> b(fx + 0.5 * o, 0.75 * lo + (o == Vec2{0.0, 0.0} ? 0.25 * lo : 0.0));
      if (pull_diam(b) > 2.0 * r) continue;
      ++est.candidates;
      if (auto v = detail::ball_candidate(inv, b, opts)) est.pullbacks = std::min(est.pullbacks, *v);
    }
  }
  est.value = std::min(est.balls, est.pullbacks);
  return est;
}

/// E_f(x, r) along a ladder of radii, made nonincreasing in r: a candidate
/// admissible at a small radius stays admissible at every larger one.
inline std::vector<EccentricEstimate> eccentric_ladder(const SampledMap& f, const Vec2& x, std::vector<double> radii,
                                                       const EccentricOptions& opts = {}) {
  std::sort(radii.begin(), radii.end());
  std::vector<EccentricEstimate> out;
  for (double r : radii) {
    EccentricEstimate e = eccentric_distortion(f, x, r, opts);
    if (!out.empty()) e.value = std::min(e.value, out.back().value);
    out.push_back(e);
  }
  return out;
}

struct Ring {
  Vec2 center{};
  double r = 0.0;
  double R = 0.0;
};

struct RingRow {
  Ring ring;
  double input_modulus = 0.0;
  double image_modulus = 0.0;
  double lower = 0.0;
  std::size_t cells = 0;
  bool ok = false;
  std::string error;
};

struct RingQcResult {
  double C1 = 0.0;
  double C2_observed = 0.0;
  std::vector<RingRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json j = {{"center", row.ring.center}, {"r", row.ring.r},       {"R", row.ring.R},
                          {"input_modulus", row.input_modulus},                  {"image_modulus", row.image_modulus},
                          {"lower", row.lower},      {"cells", row.cells},       {"ok", row.ok}};
      if (!row.error.empty()) j["error"] = row.error;
      t.push_back(j);
    }
    return {{"C1", C1}, {"C2_observed", C2_observed}, {"rings", t}};
  }
};

/// Scene for the image family f(Γ(A)) of the ring A = {r < |y - c| < R}:
/// cells whose preimage lies in the inner closed ball form F1, cells outside
/// the image of the outer ball form F2 (a frame around the image).
inline modfam::GridScene<2> image_ring_scene(const SampledMap& f, const Ring& ring, int cells_short_side,
                                             std::size_t max_cells = 250000) {
  Box<2> ib = Box<2>::empty();
  for (const auto& p : detail::circle_points(Ball<2>(ring.center, ring.R), 1024)) ib.expand(f(p));
  double h = std::min(ib.extent(0), ib.extent(1)) / cells_short_side;
  const double area = (ib.extent(0) + 6 * h) * (ib.extent(1) + 6 * h);
  if (area / (h * h) > static_cast<double>(max_cells)) h = std::sqrt(area / static_cast<double>(max_cells));
  Grid<2> g;
  g.h = h;
  g.origin = {ib.lo[0] - 3 * h, ib.lo[1] - 3 * h};
  g.shape = {static_cast<int>(std::ceil(ib.extent(0) / h)) + 6, static_cast<int>(std::ceil(ib.extent(1) / h)) + 6};
  modfam::GridScene<2> s(g);
  for (std::size_t c = 0; c < g.size(); ++c) {
    const auto pre = f.inverse(g.center(c));
    const double d = pre ? distance<2>(*pre, ring.center) : std::numeric_limits<double>::infinity();
    s.role[c] = d <= ring.r ? modfam::CellRole::f1 : (d < ring.R ? modfam::CellRole::open : modfam::CellRole::f2);
  }
  return s;
}

/// Discrete modulus of f(Γ(A)) for each ring; C2_observed is the maximum.
inline RingQcResult ring_qc_test(const SampledMap& f, const std::vector<Ring>& rings, double C1,
                                 const modfam::SolverOptions& opts = {}, int cells_short_side = 96) {
  RingQcResult res;
  res.C1 = C1;
  for (const auto& ring : rings) {
    RingRow row;
    row.ring = ring;
    try {
      if (!(ring.r > 0.0 && ring.r < ring.R)) throw DomainError("ring radii must satisfy 0 < r < R");
      if (!(ring.R < f.boundary_distance(ring.center))) throw DomainError("ring closure is not inside the domain");
      row.input_modulus = modfam::ring_modulus_exact(2, ring.r, ring.R);
      if (row.input_modulus > C1 * (1.0 + 1e-12)) throw DomainError("ring modulus exceeds C1");
      const auto scene = image_ring_scene(f, ring, cells_short_side);
      row.cells = scene.grid.size();
      const auto m = modfam::discrete_modulus(scene, modfam::CurveConstraint::unconstrained(), opts);
      row.image_modulus = m.infeasible ? 0.0 : m.value;
      row.lower = m.infeasible ? 0.0 : m.lower;
      row.ok = true;
      res.C2_observed = std::max(res.C2_observed, row.image_modulus);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace exdist::distort
