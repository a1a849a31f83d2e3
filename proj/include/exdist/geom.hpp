#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <utility>
#include <type_traits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "exdist/grid.hpp"
#include "exdist/vec.hpp"

namespace exdist::geom {

/// Open ball B(center, radius).
template <int N>
struct Ball {
  Vec<N> center{};
  double radius = 1.0;

  Ball() = default;
  Ball(Vec<N> c, double r) : center(c), radius(r) {
    if (!(r > 0.0)) throw DomainError("ball radius must be positive");
  }

  Ball dilate(double lambda) const { return Ball(center, lambda * radius); }
  bool contains(const Vec<N>& p) const { return distance<N>(p, center) < radius; }
  double diameter() const { return 2.0 * radius; }
};

/// Polygonal path with cached cumulative arclength.
template <int N>
class PolyCurve {
 public:
  PolyCurve() = default;
  explicit PolyCurve(std::vector<Vec<N>> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.empty()) throw DomainError("PolyCurve needs at least one vertex");
    cumulative_.resize(vertices_.size(), 0.0);
    for (std::size_t i = 1; i < vertices_.size(); ++i)
      cumulative_[i] = cumulative_[i - 1] + distance<N>(vertices_[i - 1], vertices_[i]);
  }

  /// Closed regular polygon approximating the circle |x - c| = r (2D).
  static PolyCurve circle(const Vec<N>& c, double r, int n) requires(N == 2) {
    std::vector<Vec<N>> v;
    v.reserve(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
      const double t = 2.0 * std::numbers::pi * (k % n) / n;
      v.push_back({c[0] + r * std::cos(t), c[1] + r * std::sin(t)});
    }
    return PolyCurve(std::move(v));
  }

  static PolyCurve segment(const Vec<N>& a, const Vec<N>& b) { return PolyCurve({a, b}); }

  const std::vector<Vec<N>>& vertices() const { return vertices_; }
  const std::vector<double>& arclength() const { return cumulative_; }
  std::size_t segments() const { return vertices_.empty() ? 0 : vertices_.size() - 1; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  Vec<N> front() const { return vertices_.front(); }
  Vec<N> back() const { return vertices_.back(); }
  std::pair<Vec<N>, Vec<N>> endpoints() const { return {front(), back()}; }

  /// Point at arclength s, clamped to [0, length].
  Vec<N> at(double s) const {
    if (s <= 0.0) return vertices_.front();
    if (s >= length()) return vertices_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    const double seg = cumulative_[i + 1] - cumulative_[i];
    const double t = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
    return lerp<N>(vertices_[i], vertices_[i + 1], t);
  }

  PolyCurve translated(const Vec<N>& v) const {
    std::vector<Vec<N>> out = vertices_;
    for (auto& p : out) p = p + v;
    return PolyCurve(std::move(out));
  }

  PolyCurve reversed() const {
    std::vector<Vec<N>> out(vertices_.rbegin(), vertices_.rend());
    return PolyCurve(std::move(out));
  }

  /// Restriction to arclength window [s0, s1].
  PolyCurve subpath(double s0, double s1) const {
    s0 = std::clamp(s0, 0.0, length());
    s1 = std::clamp(s1, s0, length());
    std::vector<Vec<N>> out{at(s0)};
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      if (cumulative_[i] > s0 && cumulative_[i] < s1) out.push_back(vertices_[i]);
    out.push_back(at(s1));
    return PolyCurve(std::move(out));
  }

  /// Concatenation; the second curve must start where this one ends.
  PolyCurve concat(const PolyCurve& other) const {
    if (distance<N>(back(), other.front()) > 1e-12 * (1.0 + length() + other.length()))
      throw DomainError("concat: curves are not joined");
    std::vector<Vec<N>> out = vertices_;
    out.insert(out.end(), other.vertices_.begin() + 1, other.vertices_.end());
    return PolyCurve(std::move(out));
  }

  /// Same trace with every segment split into k pieces.
  PolyCurve refined(int k) const {
    std::vector<Vec<N>> out{vertices_.front()};
    for (std::size_t i = 0; i + 1 < vertices_.size(); ++i)
      for (int j = 1; j <= k; ++j) out.push_back(lerp<N>(vertices_[i], vertices_[i + 1], double(j) / k));
    return PolyCurve(std::move(out));
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      for (std::size_t j = i + 1; j < vertices_.size(); ++j)
        d = std::max(d, distance2<N>(vertices_[i], vertices_[j]));
    return std::sqrt(d);
  }

 private:
  std::vector<Vec<N>> vertices_;
  std::vector<double> cumulative_;
};

/// Bounded open set given by its boundary and a membership predicate. In 2D
/// the boundary is a set of closed polygon loops and distances to it are
/// exact; in 3D it is a point sample with a stated tolerance.
template <int N>
struct Region {
  std::vector<std::vector<Vec<N>>> boundary;
  std::function<bool(const Vec<N>&)> contains;
  double tolerance = 0.0;
  Box<N> bbox = Box<N>::empty();

  static Region polygon(std::vector<Vec2> loop) requires(N == 2) {
    if (loop.size() < 3) throw DomainError("polygon region needs at least 3 vertices");
    if (loop.front() != loop.back()) loop.push_back(loop.front());
    Region r;
    r.boundary.push_back(loop);
    r.contains = [loop](const Vec2& p) { return point_in_polygon(loop, p); };
    r.finish();
    return r;
  }

  static Region disk(const Vec2& c, double radius, int n = 1024) requires(N == 2) {
    return ellipse(c, radius, radius, n);
  }

  static Region ellipse(const Vec2& c, double a, double b, int n = 1024) requires(N == 2) {
    std::vector<Vec2> loop;
    for (int k = 0; k < n; ++k) {
      const double t = 2.0 * std::numbers::pi * k / n;
      loop.push_back({c[0] + a * std::cos(t), c[1] + b * std::sin(t)});
    }
    return polygon(std::move(loop));
  }

  static Region rectangle(const Vec2& lo, const Vec2& hi) requires(N == 2) {
    return polygon({lo, {hi[0], lo[1]}, hi, {lo[0], hi[1]}});
  }

  static Region from_samples(std::vector<Vec<N>> samples, std::function<bool(const Vec<N>&)> inside,
                             double tol) {
    Region r;
    r.boundary.push_back(std::move(samples));
    r.contains = std::move(inside);
    r.tolerance = tol;
    r.finish();
    return r;
  }

  /// Image of the region under a map, boundary transported sample-wise.
  template <class F>
  Region image(F&& f) const requires(N == 2) {
    std::vector<Vec2> loop;
    for (const auto& p : boundary.front()) loop.push_back(f(p));
    return polygon(std::move(loop));
  }

  void finish() {
    bbox = Box<N>::empty();
    for (const auto& loop : boundary)
      for (const auto& p : loop) bbox.expand(p);
  }

  bool empty() const {
    for (const auto& loop : boundary)
      if (!loop.empty()) return false;
    return true;
  }

  /// Lower bound on the distance from c to the boundary.
  double inner_distance(const Vec<N>& c) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& loop : boundary) {
      if constexpr (N == 2) {
        if (tolerance == 0.0) {
          for (std::size_t i = 0; i + 1 < loop.size(); ++i)
            best = std::min(best, point_segment_distance<2>(c, loop[i], loop[i + 1]));
          continue;
        }
      }
      for (const auto& p : loop) best = std::min(best, distance<N>(c, p));
    }
    return std::max(0.0, best - tolerance);
  }

  /// Upper bound on sup over the region of |x - c|.
  double outer_distance(const Vec<N>& c) const {
    double best = 0.0;
    for (const auto& loop : boundary)
      for (const auto& p : loop) best = std::max(best, distance2<N>(c, p));
    return std::sqrt(best) + tolerance;
  }

  double diameter() const {
    double d = 0.0;
    for (const auto& la : boundary)
      for (const auto& lb : boundary)
        for (const auto& p : la)
          for (const auto& q : lb) d = std::max(d, distance2<N>(p, q));
    return std::sqrt(d);
  }

  static bool point_in_polygon(const std::vector<Vec2>& loop, const Vec2& p) {
    bool in = false;
    for (std::size_t i = 0, n = loop.size(); i + 1 < n; ++i) {
      const Vec2& a = loop[i];
      const Vec2& b = loop[i + 1];
      if ((a[1] > p[1]) != (b[1] > p[1])) {
        const double x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
        if (p[0] < x) in = !in;
      }
    }
    return in;
  }
};

template <int N>
struct EccentricityResult {
  double value = std::numeric_limits<double>::infinity();
  Ball<N> ball;
  std::size_t centers_evaluated = 0;
};

/// Upper estimate of E(A) = inf{M : B ⊂ A ⊂ MB}. Centres are searched coarse
/// to fine on lattices of pitch res * 2^k anchored at the bounding-box centre;
/// the lattices are nested, so halving res never increases the result.
template <int N>
EccentricityResult<N> eccentricity(const Region<N>& region, double search_resolution,
                                   const std::vector<Vec<N>>& hints = {}) {
  if (region.empty()) throw DomainError("eccentricity: empty region");
  if (!(search_resolution > 0.0)) throw DomainError("eccentricity: resolution must be positive");

  const Vec<N> anchor = region.bbox.center();
  double extent = 0.0;
  for (int i = 0; i < N; ++i) extent = std::max(extent, region.bbox.extent(i));
  if (!(extent > 0.0)) throw DomainError("eccentricity: degenerate region");

  int top_level = 0;
  while (search_resolution * std::ldexp(1.0, top_level + 1) <= extent / 8.0) ++top_level;

  EccentricityResult<N> result;
  using Key = std::array<long long, N>;
  struct Cand {
    double m;
    Key key;
    Vec<N> c;
  };
  std::map<Key, double> seen;
  std::vector<Cand> pool;
  const std::size_t keep = 8;

  auto eval = [&](const Vec<N>& c, const Key& key) {
    if (seen.count(key)) return;
    double m = std::numeric_limits<double>::infinity();
    if (region.contains(c)) {
      const double rin = region.inner_distance(c);
      if (rin > 0.0) m = region.outer_distance(c) / rin;
    }
    seen.emplace(key, m);
    ++result.centers_evaluated;
    if (std::isfinite(m)) {
      pool.push_back({m, key, c});
      if (m < result.value) {
        result.value = m;
        result.ball = Ball<N>(c, region.inner_distance(c));
      }
    }
  };
  auto at = [&](const Key& key) {
    Vec<N> c{};
    for (int i = 0; i < N; ++i) c[i] = anchor[i] + static_cast<double>(key[i]) * search_resolution;
    return c;
  };
  auto prune = [&]() {
    std::sort(pool.begin(), pool.end(),
              [](const Cand& a, const Cand& b) { return a.m < b.m || (a.m == b.m && a.key < b.key); });
    if (pool.size() > keep) pool.resize(keep);
  };

  // Hints are evaluated as given and seed the search at their nearest lattice point.
  std::vector<Key> hint_keys;
  for (std::size_t h = 0; h < hints.size(); ++h) {
    Key key{};
    key.fill(std::numeric_limits<long long>::min() + static_cast<long long>(h));
    eval(hints[h], key);
    for (int i = 0; i < N; ++i)
      key[i] = static_cast<long long>(std::llround((hints[h][i] - anchor[i]) / search_resolution));
    hint_keys.push_back(key);
  }
  for (const auto& key : hint_keys) eval(at(key), key);
  const auto is_hint = [](const Key& key) { return key[0] < std::numeric_limits<long long>::min() / 2; };

  const long long step0 = 1LL << top_level;
  std::array<long long, N> lo{}, hi{};
  for (int i = 0; i < N; ++i) {
    hi[i] = static_cast<long long>(std::floor(region.bbox.extent(i) / 2.0 / (search_resolution * step0)));
    lo[i] = -hi[i];
  }
  Key k = lo;
  while (true) {
    Key key{};
    for (int i = 0; i < N; ++i) key[i] = k[i] * step0;
    eval(at(key), key);
    int d = 0;
    while (d < N && ++k[d] > hi[d]) {
      k[d] = lo[d];
      ++d;
    }
    if (d == N) break;
  }
  prune();

  const int reach = N == 2 ? 2 : 1;
  for (int level = top_level - 1; level >= 0; --level) {
    const long long step = 1LL << level;
    const std::vector<Cand> current = pool;
    for (const auto& cand : current) {
      if (is_hint(cand.key)) continue;
      std::array<int, N> o{};
      o.fill(-reach);
      while (true) {
        Key key = cand.key;
        for (int i = 0; i < N; ++i) key[i] += o[i] * step;
        eval(at(key), key);
        int d = 0;
        while (d < N && ++o[d] > reach) {
          o[d] = -reach;
          ++d;
        }
        if (d == N) break;
      }
    }
    prune();
  }
  if (!std::isfinite(result.value)) throw DomainError("eccentricity: no admissible centre found");
  return result;
}

namespace detail {

template <int N>
struct Shape {
  std::vector<std::pair<Vec<N>, Vec<N>>> segments;
  std::vector<Vec<N>> points;
  std::function<bool(const Vec<N>&)> contains;
};

template <int N>
Shape<N> shape_of(const PolyCurve<N>& c) {
  Shape<N> s;
  s.points = c.vertices();
  for (std::size_t i = 0; i + 1 < c.vertices().size(); ++i)
    s.segments.emplace_back(c.vertices()[i], c.vertices()[i + 1]);
  return s;
}

template <int N>
Shape<N> shape_of(const Region<N>& r) {
  Shape<N> s;
  for (const auto& loop : r.boundary) {
    s.points.insert(s.points.end(), loop.begin(), loop.end());
    if (N == 2 && r.tolerance == 0.0)
      for (std::size_t i = 0; i + 1 < loop.size(); ++i) s.segments.emplace_back(loop[i], loop[i + 1]);
  }
  s.contains = r.contains;
  return s;
}

template <int N>
double shape_diameter(const Shape<N>& s) {
  double d = 0.0;
  for (std::size_t i = 0; i < s.points.size(); ++i)
    for (std::size_t j = i + 1; j < s.points.size(); ++j) d = std::max(d, distance2<N>(s.points[i], s.points[j]));
  return std::sqrt(d);
}

template <int N>
double shape_distance(const Shape<N>& a, const Shape<N>& b) {
  if (a.contains)
    for (const auto& p : b.points)
      if (a.contains(p)) return 0.0;
  if (b.contains)
    for (const auto& p : a.points)
      if (b.contains(p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  auto piece = [](const Shape<N>& s, std::size_t i) {
    return s.segments.empty() ? std::make_pair(s.points[i], s.points[i]) : s.segments[i];
  };
  const std::size_t na = a.segments.empty() ? a.points.size() : a.segments.size();
  const std::size_t nb = b.segments.empty() ? b.points.size() : b.segments.size();
  for (std::size_t i = 0; i < na; ++i) {
    const auto [a0, a1] = piece(a, i);
    for (std::size_t j = 0; j < nb; ++j) {
      const auto [b0, b1] = piece(b, j);
      best = std::min(best, segment_segment_distance<N>(a0, a1, b0, b1));
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

}  // namespace detail

/// Δ(F1, F2) = dist(F1, F2) / min(diam F1, diam F2).
template <int N, class A, class B>
double relative_distance(const A& f1, const B& f2) {
  const auto s1 = detail::shape_of<N>(f1);
  const auto s2 = detail::shape_of<N>(f2);
  const double d1 = detail::shape_diameter(s1);
  const double d2 = detail::shape_diameter(s2);
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("relative_distance: degenerate set");
  return detail::shape_distance(s1, s2) / std::min(d1, d2);
}

template <int N>
double relative_distance(const PolyCurve<N>& a, const PolyCurve<N>& b) {
  return relative_distance<N, PolyCurve<N>, PolyCurve<N>>(a, b);
}

/// ∫_γ ρ ds for a closed-form density, by adaptive Gauss–Kronrod per segment.
template <int N, class F>
  requires(!std::is_same_v<std::remove_cvref_t<F>, DensityField<N>>)
double line_integral(F&& rho, const PolyCurve<N>& gamma, double tol = 1e-12) {
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  const auto& v = gamma.vertices();
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double len = distance<N>(v[i], v[i + 1]);
    if (len == 0.0) continue;
    auto g = [&](double t) { return rho(lerp<N>(v[i], v[i + 1], t)); };
    total += len * gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 15, tol);
  }
  return total;
}

/// ∫_γ ρ ds for a piecewise-constant density: each segment is cut at grid
/// planes and every piece is charged the density of the cell it lies in.
template <int N>
double line_integral(const DensityField<N>& rho, const PolyCurve<N>& gamma) {
  const Grid<N>& g = rho.grid;
  double total = 0.0;
  const auto& v = gamma.vertices();
  std::vector<double> cuts;
  for (std::size_t s = 0; s + 1 < v.size(); ++s) {
    const Vec<N>& a = v[s];
    const Vec<N>& b = v[s + 1];
    const double len = distance<N>(a, b);
    if (len == 0.0) continue;
    cuts.assign({0.0, 1.0});
    for (int i = 0; i < N; ++i) {
      const double d = b[i] - a[i];
      if (d == 0.0) continue;
      const double u0 = (std::min(a[i], b[i]) - g.origin[i]) / g.h;
      const double u1 = (std::max(a[i], b[i]) - g.origin[i]) / g.h;
      for (double k = std::ceil(u0); k <= u1; k += 1.0) {
        const double t = (g.origin[i] + k * g.h - a[i]) / d;
        if (t > 0.0 && t < 1.0) cuts.push_back(t);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double dt = cuts[k + 1] - cuts[k];
      if (dt <= 0.0) continue;
      total += len * dt * rho.at(lerp<N>(a, b, 0.5 * (cuts[k] + cuts[k + 1])));
    }
  }
  return total;
}

}  // namespace exdist::geom
