#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/exact.hpp"
#include "exdist/geom.hpp"

namespace exdist::qhyp {

/// Bounded planar domain bounded by closed polygonal loops (outer loop first,
/// then holes). Membership is even-odd over all loops.
struct Domain {
  std::vector<std::vector<Vec2>> loops;

  static Domain polygon(std::vector<Vec2> loop) {
    if (loop.size() < 3) throw DomainError("domain polygon needs at least 3 vertices");
    if (loop.front() != loop.back()) loop.push_back(loop.front());
    return Domain{{std::move(loop)}};
  }

  static Domain disk(const Vec2& c, double r, int n = 512) {
    std::vector<Vec2> loop;
    for (int k = 0; k < n; ++k) {
      const double t = 2.0 * std::numbers::pi * k / n;
      loop.push_back({c[0] + r * std::cos(t), c[1] + r * std::sin(t)});
    }
    return polygon(std::move(loop));
  }

  static Domain square(const Vec2& lo, const Vec2& hi) {
    return polygon({lo, {hi[0], lo[1]}, hi, {lo[0], hi[1]}});
  }

  /// Square [-1,0] x [-1/2,1/2] with the cusp {0 <= x <= 1, |y| < exp(-rate x)/2}
  /// attached along its right side.
  static Domain cusp(double rate = 8.0, int n = 400) {
    std::vector<Vec2> loop{{-1.0, -0.5}, {0.0, -0.5}};
    for (int k = 1; k <= n; ++k) {
      const double x = static_cast<double>(k) / n;
      loop.push_back({x, -0.5 * std::exp(-rate * x)});
    }
    for (int k = n; k >= 1; --k) {
      const double x = static_cast<double>(k) / n;
      loop.push_back({x, 0.5 * std::exp(-rate * x)});
    }
    loop.push_back({0.0, 0.5});
    loop.push_back({-1.0, 0.5});
    return polygon(std::move(loop));
  }

  static Domain from_json(const nlohmann::json& j) {
    Domain d;
    const auto& ls = j.contains("loops") ? j.at("loops") : nlohmann::json::array({j.at("polygon")});
    for (const auto& l : ls) {
      std::vector<Vec2> loop;
      for (const auto& p : l) loop.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      if (loop.size() < 3) throw DomainError("domain loop needs at least 3 vertices");
      if (loop.front() != loop.back()) loop.push_back(loop.front());
      d.loops.push_back(std::move(loop));
    }
    if (d.loops.empty()) throw DomainError("domain has no boundary loop");
    return d;
  }

  nlohmann::json to_json() const {
    nlohmann::json ls = nlohmann::json::array();
    for (const auto& l : loops) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : l) pts.push_back({p[0], p[1]});
      ls.push_back(pts);
    }
    return {{"loops", ls}};
  }

  Box<2> bounds() const {
    Box<2> b = Box<2>::empty();
    for (const auto& l : loops)
      for (const auto& p : l) b.expand(p);
    return b;
  }

  bool contains(const Vec2& p) const {
    bool in = false;
    for (const auto& l : loops)
      if (geom::Region<2>::point_in_polygon(l, p)) in = !in;
    return in;
  }

  double boundary_distance(const Vec2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& l : loops)
      for (std::size_t i = 0; i + 1 < l.size(); ++i) best = std::min(best, point_segment_distance<2>(p, l[i], l[i + 1]));
    return best;
  }

  /// δ_Ω(p): distance to the boundary inside, 0 outside.
  double delta(const Vec2& p) const { return contains(p) ? boundary_distance(p) : 0.0; }

  double boundary_diameter() const {
    double d = 0.0;
    for (const auto& a : loops)
      for (const auto& b : loops)
        for (const auto& p : a)
          for (const auto& q : b) d = std::max(d, distance2<2>(p, q));
    return std::sqrt(d);
  }

  /// Points along the boundary at spacing at most `spacing` (vertices included).
  std::vector<Vec2> boundary_samples(double spacing) const {
    std::vector<Vec2> out;
    for (const auto& l : loops)
      for (std::size_t i = 0; i + 1 < l.size(); ++i) {
        const int k = std::max(1, static_cast<int>(std::ceil(distance<2>(l[i], l[i + 1]) / spacing)));
        for (int s = 0; s < k; ++s) out.push_back(lerp<2>(l[i], l[i + 1], static_cast<double>(s) / k));
      }
    return out;
  }
};

namespace detail {

inline bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    return (v > 0) - (v < 0);
  };
  auto on = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p[0], q[0]) <= r[0] && r[0] <= std::max(p[0], q[0]) && std::min(p[1], q[1]) <= r[1] &&
           r[1] <= std::max(p[1], q[1]);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  return (o1 == 0 && on(a, b, c)) || (o2 == 0 && on(a, b, d)) || (o3 == 0 && on(c, d, a)) ||
         (o4 == 0 && on(c, d, b));
}

inline double segment_box_distance(const Vec2& a, const Vec2& b, const Box<2>& q) {
  if (q.contains(a) || q.contains(b)) return 0.0;
  const Vec2 c[4] = {q.lo, {q.hi[0], q.lo[1]}, q.hi, {q.lo[0], q.hi[1]}};
  for (int k = 0; k < 4; ++k)
    if (segments_cross(a, b, c[k], c[(k + 1) % 4])) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    best = std::min(best, point_segment_distance<2>(c[k], a, b));
    best = std::min(best, point_segment_distance<2>(a, c[k], c[(k + 1) % 4]));
    best = std::min(best, point_segment_distance<2>(b, c[k], c[(k + 1) % 4]));
  }
  return best;
}

// Exact squared distance from point p to segment [a,b].
inline Rational point_segment_d2(const RPoint& p, const RPoint& a, const RPoint& b) {
  const Rational dx = b.x - a.x, dy = b.y - a.y;
  const Rational len2 = dx * dx + dy * dy;
  Rational t = len2 == 0 ? Rational(0) : ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  if (t < 0) t = 0;
  if (t > 1) t = 1;
  const Rational ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return ex * ex + ey * ey;
}

// Exact squared distance between a box and a segment that does not meet it.
inline Rational segment_box_d2(const Vec2& a, const Vec2& b, const Box<2>& q) {
  const RPoint A = exact(a), B = exact(b);
  const RPoint c[4] = {exact(q.lo), exact(Vec2{q.hi[0], q.lo[1]}), exact(q.hi), exact(Vec2{q.lo[0], q.hi[1]})};
  Rational best = point_segment_d2(c[0], A, B);
  for (int k = 0; k < 4; ++k) {
    best = std::min(best, point_segment_d2(c[k], A, B));
    best = std::min(best, point_segment_d2(A, c[k], c[(k + 1) % 4]));
    best = std::min(best, point_segment_d2(B, c[k], c[(k + 1) % 4]));
  }
  return best;
}

}  // namespace detail

/// Boundary distance with per-bucket candidate lists: a bucket keeps the
/// segments whose distance to it does not exceed the smallest farthest
/// distance of any segment, which contains the nearest segment of every point.
class DistanceIndex {
 public:
  explicit DistanceIndex(const Domain& d, int buckets = 64) : d_(&d) {
    const Box<2> bb = d.bounds();
    for (const auto& l : d.loops)
      for (std::size_t i = 0; i + 1 < l.size(); ++i) segs_.emplace_back(l[i], l[i + 1]);
    cell_ = std::max(bb.extent(0), bb.extent(1)) / buckets;
    lo_ = bb.lo;
    gx_ = static_cast<int>(std::ceil(bb.extent(0) / cell_)) + 1;
    gy_ = static_cast<int>(std::ceil(bb.extent(1) / cell_)) + 1;
    cand_.assign(static_cast<std::size_t>(gx_) * gy_, {});
    std::vector<double> dmin(segs_.size());
    for (int v = 0; v < gy_; ++v)
      for (int u = 0; u < gx_; ++u) {
        const Box<2> box{{lo_[0] + u * cell_, lo_[1] + v * cell_}, {lo_[0] + (u + 1) * cell_, lo_[1] + (v + 1) * cell_}};
        const Vec2 c[4] = {box.lo, {box.hi[0], box.lo[1]}, box.hi, {box.lo[0], box.hi[1]}};
        double bound = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < segs_.size(); ++k) {
          const auto& [a, b] = segs_[k];
          dmin[k] = detail::segment_box_distance(a, b, box);
          double far = 0.0;
          for (const auto& q : c) far = std::max(far, point_segment_distance<2>(q, a, b));
          bound = std::min(bound, far);
        }
        auto& list = cand_[static_cast<std::size_t>(v) * gx_ + u];
        for (std::size_t k = 0; k < segs_.size(); ++k)
          if (dmin[k] <= bound) list.push_back(static_cast<std::uint32_t>(k));
      }
  }

  double boundary_distance(const Vec2& p) const {
    const int u = static_cast<int>(std::floor((p[0] - lo_[0]) / cell_));
    const int v = static_cast<int>(std::floor((p[1] - lo_[1]) / cell_));
    double best = std::numeric_limits<double>::infinity();
    if (u < 0 || v < 0 || u >= gx_ || v >= gy_) {
      for (const auto& [a, b] : segs_) best = std::min(best, point_segment_distance<2>(p, a, b));
      return best;
    }
    for (auto k : cand_[static_cast<std::size_t>(v) * gx_ + u])
      best = std::min(best, point_segment_distance<2>(p, segs_[k].first, segs_[k].second));
    return best;
  }

  double delta(const Vec2& p) const { return d_->contains(p) ? boundary_distance(p) : 0.0; }

 private:
  const Domain* d_;
  std::vector<std::pair<Vec2, Vec2>> segs_;
  int gx_ = 1, gy_ = 1;
  double cell_ = 1.0;
  Vec2 lo_{};
  std::vector<std::vector<std::uint32_t>> cand_;
};

struct WhitneyCube {
  int level = 0;
  std::int64_t i = 0, j = 0;
  double side = 0.0;
  Box<2> box;
  double dist = 0.0;  // dist(Q, ∂Ω)
  double diameter() const { return side * std::numbers::sqrt2; }
  Vec2 center() const { return box.center(); }
};

struct WhitneyReport {
  std::size_t cubes = 0;
  std::size_t distance_ok = 0;  // diam <= dist <= 4 diam, decided exactly
  std::size_t pairs = 0;
  std::size_t ratio_ok = 0;     // adjacent side ratios in [1/4, 4]
  std::size_t truncated = 0;
  bool all() const { return distance_ok == cubes && ratio_ok == pairs; }

  nlohmann::json to_json() const {
    return {{"cubes", cubes}, {"distance_ok", distance_ok}, {"pairs", pairs}, {"ratio_ok", ratio_ok},
            {"truncated", truncated}, {"all", all()}};
  }
};

class WhitneyDecomposition {
 public:
  const std::vector<WhitneyCube>& cubes() const { return cubes_; }
  const std::vector<std::vector<std::uint32_t>>& adjacency() const { return adj_; }
  std::size_t truncated() const { return truncated_; }
  int max_depth() const { return max_depth_; }
  double root_side() const { return root_side_; }

  /// Cube containing p (closed, lowest index on ties), or -1.
  long locate(const Vec2& p) const {
    for (int L = 0; L <= max_depth_; ++L) {
      const double s = std::ldexp(root_side_, -L);
      const std::int64_t i = static_cast<std::int64_t>(std::floor((p[0] - origin_[0]) / s));
      const std::int64_t j = static_cast<std::int64_t>(std::floor((p[1] - origin_[1]) / s));
      const auto it = index_.find(key(L, i, j));
      if (it != index_.end()) return static_cast<long>(it->second);
    }
    return -1;
  }

  /// Exact check of diam(Q) <= dist(Q, ∂Ω) <= 4 diam(Q) for cube k.
  bool distance_invariant(const Domain& d, std::size_t k) const {
    const auto& q = cubes_[k];
    const double lo = q.diameter(), hi = 4.0 * q.diameter();
    const double rel = 1e-9;
    if (q.dist > lo * (1 + rel) && q.dist < hi * (1 - rel)) return true;
    if (q.dist < lo * (1 - rel) || q.dist > hi * (1 + rel)) return false;
    // Close call: decide with rationals. diam^2 = 2 side^2.
    Rational best = -1;
    for (const auto& l : d.loops)
      for (std::size_t s = 0; s + 1 < l.size(); ++s) {
        const double approx = detail::segment_box_distance(l[s], l[s + 1], q.box);
        if (approx > q.dist * (1 + 1e-6) + 1e-300) continue;
        const Rational v = detail::segment_box_d2(l[s], l[s + 1], q.box);
        if (best < 0 || v < best) best = v;
      }
    const Rational side = exact(q.side);
    const Rational diam2 = 2 * side * side;
    return best >= diam2 && best <= 16 * diam2;
  }

  WhitneyReport verify(const Domain& d) const {
    WhitneyReport rep;
    rep.cubes = cubes_.size();
    rep.truncated = truncated_;
    for (std::size_t k = 0; k < cubes_.size(); ++k) rep.distance_ok += distance_invariant(d, k);
    for (std::size_t a = 0; a < adj_.size(); ++a)
      for (auto b : adj_[a]) {
        if (b <= a) continue;
        ++rep.pairs;
        const double r = cubes_[a].side / cubes_[b].side;
        rep.ratio_ok += r >= 0.25 && r <= 4.0;
      }
    return rep;
  }

  /// Cube counts per level.
  std::vector<std::size_t> level_counts() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(max_depth_) + 1, 0);
    for (const auto& q : cubes_) ++out[static_cast<std::size_t>(q.level)];
    return out;
  }

 private:
  friend WhitneyDecomposition whitney_decompose(const Domain&, int);

  static std::uint64_t key(int L, std::int64_t i, std::int64_t j) {
    return (static_cast<std::uint64_t>(L) << 56) ^ (static_cast<std::uint64_t>(i & 0xFFFFFFF) << 28) ^
           static_cast<std::uint64_t>(j & 0xFFFFFFF);
  }

  void build_adjacency() {
    adj_.assign(cubes_.size(), {});
    for (std::size_t k = 0; k < cubes_.size(); ++k) {
      const auto& q = cubes_[k];
      // Probe points just outside each edge at the finest spacing along it.
      const int parts = 1 << std::max(0, std::min(2, max_depth_ - q.level));
      const double eps = std::ldexp(root_side_, -max_depth_ - 2);
      for (int e = 0; e < 4; ++e)
        for (int t = 0; t < parts; ++t) {
          const double u = (t + 0.5) / parts;
          Vec2 p;
          switch (e) {
            case 0: p = {q.box.hi[0] + eps, q.box.lo[1] + u * q.side}; break;
            case 1: p = {q.box.lo[0] - eps, q.box.lo[1] + u * q.side}; break;
            case 2: p = {q.box.lo[0] + u * q.side, q.box.hi[1] + eps}; break;
            default: p = {q.box.lo[0] + u * q.side, q.box.lo[1] - eps}; break;
          }
          const long n = locate(p);
          if (n < 0 || static_cast<std::size_t>(n) == k) continue;
          auto& a = adj_[k];
          if (std::find(a.begin(), a.end(), static_cast<std::uint32_t>(n)) == a.end()) {
            a.push_back(static_cast<std::uint32_t>(n));
            adj_[static_cast<std::size_t>(n)].push_back(static_cast<std::uint32_t>(k));
          }
        }
    }
    for (auto& a : adj_) {
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
    }
  }

  Vec2 origin_{};
  double root_side_ = 1.0;
  int max_depth_ = 0;
  std::size_t truncated_ = 0;
  std::vector<WhitneyCube> cubes_;
  std::vector<std::vector<std::uint32_t>> adj_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Maximal dyadic cubes Q ⊂ Ω with diam(Q) <= dist(Q, ∂Ω). Cubes still
/// undecided at max_depth are counted as truncated and not emitted. Cubes are
/// ordered lexicographically by (lower-left corner, side).
inline WhitneyDecomposition whitney_decompose(const Domain& d, int max_depth) {
  if (d.loops.empty()) throw DomainError("whitney_decompose: empty domain");
  if (max_depth < 1 || max_depth > 24) throw DomainError("whitney_decompose: max_depth must be in 1..24");
  const Box<2> bb = d.bounds();
  const double extent = std::max(bb.extent(0), bb.extent(1));
  if (!(extent > 0.0)) throw DomainError("whitney_decompose: empty domain");
  WhitneyDecomposition w;
  w.max_depth_ = max_depth;
  w.root_side_ = std::exp2(std::ceil(std::log2(extent)));
  w.origin_ = {std::floor(bb.lo[0] / w.root_side_) * w.root_side_, std::floor(bb.lo[1] / w.root_side_) * w.root_side_};

  std::vector<std::pair<Vec2, Vec2>> segs;
  for (const auto& l : d.loops)
    for (std::size_t i = 0; i + 1 < l.size(); ++i) segs.emplace_back(l[i], l[i + 1]);

  struct Task {
    int L;
    std::int64_t i, j;
    std::vector<std::uint32_t> near;  // segments that may matter for this cube
  };
  std::vector<Task> stack;
  {
    std::vector<std::uint32_t> all(segs.size());
    for (std::uint32_t s = 0; s < all.size(); ++s) all[s] = s;
    for (std::int64_t i = 0; i < 2; ++i)
      for (std::int64_t j = 0; j < 2; ++j) stack.push_back({0, i, j, all});
  }
  while (!stack.empty()) {
    Task t = std::move(stack.back());
    stack.pop_back();
    const double side = std::ldexp(w.root_side_, -t.L);
    Box<2> box{{w.origin_[0] + t.i * side, w.origin_[1] + t.j * side},
               {w.origin_[0] + (t.i + 1) * side, w.origin_[1] + (t.j + 1) * side}};
    if (box.lo[0] > bb.hi[0] || box.lo[1] > bb.hi[1] || box.hi[0] < bb.lo[0] || box.hi[1] < bb.lo[1]) continue;
    double dist = std::numeric_limits<double>::infinity();
    std::vector<double> per(t.near.size());
    for (std::size_t s = 0; s < t.near.size(); ++s) {
      per[s] = detail::segment_box_distance(segs[t.near[s]].first, segs[t.near[s]].second, box);
      dist = std::min(dist, per[s]);
    }
    const double diam = side * std::numbers::sqrt2;
    const bool inside = dist > 0.0 && d.contains(box.center());
    if (dist > 0.0 && !inside) continue;
    if (inside && diam <= dist && t.L > 0) {
      WhitneyCube q;
      q.level = t.L;
      q.i = t.i;
      q.j = t.j;
      q.side = side;
      q.box = box;
      q.dist = dist;
      w.cubes_.push_back(q);
      continue;
    }
    if (t.L == max_depth) {
      ++w.truncated_;
      continue;
    }
    // Children only need segments within dist + diam of this cube.
    std::vector<std::uint32_t> near;
    for (std::size_t s = 0; s < t.near.size(); ++s)
      if (per[s] <= dist + 2.0 * diam) near.push_back(t.near[s]);
    for (std::int64_t di = 0; di < 2; ++di)
      for (std::int64_t dj = 0; dj < 2; ++dj) stack.push_back({t.L + 1, 2 * t.i + di, 2 * t.j + dj, near});
  }
  std::sort(w.cubes_.begin(), w.cubes_.end(), [](const WhitneyCube& a, const WhitneyCube& b) {
    return std::tie(a.box.lo[0], a.box.lo[1], a.side) < std::tie(b.box.lo[0], b.box.lo[1], b.side);
  });
  for (std::size_t k = 0; k < w.cubes_.size(); ++k)
    w.index_[WhitneyDecomposition::key(w.cubes_[k].level, w.cubes_[k].i, w.cubes_[k].j)] = k;
  w.build_adjacency();
  return w;
}

/// Quasihyperbolic distances from one source on a node lattice of spacing h:
/// edges to lattice points within max-norm radius 2, weighted by
/// length / δ(midpoint). δ is tabulated on the half-spacing lattice, which
/// holds every edge midpoint.
class QhField {
 public:
  QhField(const Domain& d, const Vec2& source, double h) : h_(h), index_(d) {
    if (!(h > 0.0)) throw DomainError("quasihyperbolic grid spacing must be positive");
    if (!d.contains(source)) throw DomainError("quasihyperbolic source is not inside the domain");
    const Box<2> bb = d.bounds();
    origin_ = {bb.lo[0], bb.lo[1]};
    nx_ = static_cast<int>(std::ceil(bb.extent(0) / h)) + 1;
    ny_ = static_cast<int>(std::ceil(bb.extent(1) / h)) + 1;
    hx_ = 2 * nx_ - 1;
    hy_ = 2 * ny_ - 1;
    inv_.assign(static_cast<std::size_t>(hx_) * hy_, 0.0);
    for (int j = 0; j < hy_; ++j)
      for (int i = 0; i < hx_; ++i) {
        const double dl = index_.delta({origin_[0] + 0.5 * i * h_, origin_[1] + 0.5 * j * h_});
        inv_[static_cast<std::size_t>(j) * hx_ + i] = dl > 0.0 ? 1.0 / dl : 0.0;
      }
    source_ = source;
    run();
  }

  double spacing() const { return h_; }

  /// Distance to y, which is linked by straight segments to nearby nodes.
  double at(const Vec2& y, std::vector<Vec2>* path = nullptr) const {
    if (index_.delta(y) == 0.0) return std::numeric_limits<double>::infinity();
    if (y == source_) {
      if (path) *path = {y};
      return 0.0;
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t via = kNone;
    if (distance<2>(y, source_) <= 2.0 * h_) best = link(y, source_);
    for_near(y, [&](std::size_t k) {
      const double v = dist_[k] + link(y, node_of(k));
      if (v < best) {
        best = v;
        via = k;
      }
    });
    if (path) {
      path->clear();
      path->push_back(y);
      for (std::size_t k = via; k != kNone; k = pred_[k]) path->push_back(node_of(k));
      path->push_back(source_);
      std::reverse(path->begin(), path->end());
    }
    return best;
  }

  /// Midpoint-rule integral of k(x, source)^n over lattice cells with centre in Ω.
  double integral_power(double n) const {
    double sum = 0.0;
    for (int j = 0; j + 1 < ny_; ++j)
      for (int i = 0; i + 1 < nx_; ++i) {
        if (half_inv(2 * i + 1, 2 * j + 1) == 0.0) continue;
        const double v = at(node(i, j) + Vec2{0.5 * h_, 0.5 * h_});
        if (std::isfinite(v)) sum += std::pow(v, n) * h_ * h_;
      }
    return sum;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  double half_inv(int i, int j) const { return inv_[static_cast<std::size_t>(j) * hx_ + i]; }
  Vec2 node(int i, int j) const { return {origin_[0] + i * h_, origin_[1] + j * h_}; }
  Vec2 node_of(std::size_t k) const { return node(static_cast<int>(k % nx_), static_cast<int>(k / nx_)); }
  bool open(std::size_t k) const { return half_inv(2 * static_cast<int>(k % nx_), 2 * static_cast<int>(k / nx_)) > 0.0; }

  // Straight link weight with δ at the midpoint; infinite if the midpoint is outside.
  double link(const Vec2& a, const Vec2& b) const {
    const double dl = index_.delta(0.5 * (a + b));
    return dl > 0.0 ? distance<2>(a, b) / dl : std::numeric_limits<double>::infinity();
  }

  template <class F>
  void for_near(const Vec2& y, F&& f) const {
    const int ci = static_cast<int>(std::floor((y[0] - origin_[0]) / h_));
    const int cj = static_cast<int>(std::floor((y[1] - origin_[1]) / h_));
    for (int j = cj - 1; j <= cj + 2; ++j)
      for (int i = ci - 1; i <= ci + 2; ++i) {
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
        const std::size_t k = idx(i, j);
        if (open(k) && (seeding_ || std::isfinite(dist_[k]))) f(k);
      }
  }

  void run() {
    const std::size_t n = static_cast<std::size_t>(nx_) * ny_;
    dist_.assign(n, std::numeric_limits<double>::infinity());
    pred_.assign(n, kNone);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    seeding_ = true;
    for_near(source_, [&](std::size_t k) {
      const double v = link(source_, node_of(k));
      if (v < dist_[k]) {
        dist_[k] = v;
        heap.push({v, k});
      }
    });
    seeding_ = false;
    std::vector<std::array<int, 2>> stencil;
    for (int dj = -2; dj <= 2; ++dj)
      for (int di = -2; di <= 2; ++di)
        if ((di || dj) && std::gcd(std::abs(di), std::abs(dj)) == 1) stencil.push_back({di, dj});
    while (!heap.empty()) {
      const auto [dv, k] = heap.top();
      heap.pop();
      if (dv > dist_[k]) continue;
      const int i = static_cast<int>(k % nx_), j = static_cast<int>(k / nx_);
      for (const auto& s : stencil) {
        const int u = i + s[0], v = j + s[1];
        if (u < 0 || v < 0 || u >= nx_ || v >= ny_) continue;
        const std::size_t m = idx(u, v);
        if (!open(m)) continue;
        const double mid = half_inv(2 * i + s[0], 2 * j + s[1]);
        if (mid == 0.0) continue;
        // Knight moves must also keep the two lattice points they pass between.
        if (std::abs(s[0]) + std::abs(s[1]) == 3) {
          const int ai = i + (std::abs(s[0]) == 2 ? s[0] / 2 : 0), aj = j + (std::abs(s[1]) == 2 ? s[1] / 2 : 0);
          const int bi = i + (std::abs(s[0]) == 2 ? s[0] / 2 : s[0]), bj = j + (std::abs(s[1]) == 2 ? s[1] / 2 : s[1]);
          if (!open(idx(ai, aj)) || !open(idx(bi, bj))) continue;
        }
        const double w = h_ * std::hypot(s[0], s[1]) * mid;
        if (dv + w < dist_[m]) {
          dist_[m] = dv + w;
          pred_[m] = k;
          heap.push({dist_[m], m});
        }
      }
    }
  }

  double h_;
  DistanceIndex index_;
  Vec2 origin_{};
  int nx_ = 0, ny_ = 0, hx_ = 0, hy_ = 0;
  Vec2 source_{};
  bool seeding_ = false;
  std::vector<double> inv_;
  std::vector<double> dist_;
  std::vector<std::size_t> pred_;
};

struct QhResult {
  double value = 0.0;
  bool infeasible = false;
  geom::PolyCurve<2> geodesic;

  nlohmann::json to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : geodesic.vertices()) pts.push_back({p[0], p[1]});
    return {{"value", infeasible ? nlohmann::json(nullptr) : nlohmann::json(value)},
            {"infeasible", infeasible},
            {"geodesic", pts}};
  }
};

/// Quasihyperbolic distance k(x1, x2) on a lattice of spacing h. The search
/// always starts from the lexicographically smaller point, so the value is
/// symmetric in its arguments.
inline QhResult qh_distance(const Domain& d, const Vec2& x1, const Vec2& x2, double h) {
  if (!d.contains(x1) || !d.contains(x2)) throw DomainError("qh_distance: points must be interior");
  QhResult res;
  if (x1 == x2) {
    res.geodesic = geom::PolyCurve<2>({x1});
    return res;
  }
  const bool swap = x2 < x1;
  const Vec2 a = swap ? x2 : x1, b = swap ? x1 : x2;
  const QhField field(d, a, h);
  std::vector<Vec2> path;
  res.value = field.at(b, &path);
  if (!std::isfinite(res.value)) {
    res.infeasible = true;
    res.value = 0.0;
    res.geodesic = geom::PolyCurve<2>({x1});
    return res;
  }
  if (swap) std::reverse(path.begin(), path.end());
  res.geodesic = geom::PolyCurve<2>(path);
  return res;
}

/// Whitney cubes met by a curve, in order, with corner passages repaired by
/// inserting a cube adjacent to both neighbours.
inline std::vector<std::size_t> cube_chain(const WhitneyDecomposition& w, const geom::PolyCurve<2>& c) {
  std::vector<std::size_t> chain;
  double min_side = std::numeric_limits<double>::infinity();
  for (const auto& q : w.cubes()) min_side = std::min(min_side, q.side);
  const double step = min_side / 8.0;
  auto push = [&](long k) {
    if (k < 0) return;
    if (chain.empty() || chain.back() != static_cast<std::size_t>(k)) chain.push_back(static_cast<std::size_t>(k));
  };
  const double len = c.length();
  const int n = std::max(2, static_cast<int>(std::ceil(len / step)));
  for (int s = 0; s <= n; ++s) push(w.locate(c.at(len * s / n)));
  std::vector<std::size_t> out;
  const auto& adj = w.adjacency();
  for (std::size_t k = 0; k < chain.size(); ++k) {
    if (!out.empty()) {
      const auto& a = adj[out.back()];
      if (!std::binary_search(a.begin(), a.end(), static_cast<std::uint32_t>(chain[k]))) {
        for (auto m : a) {
          const auto& b = adj[m];
          if (std::binary_search(b.begin(), b.end(), static_cast<std::uint32_t>(chain[k]))) {
            out.push_back(m);
            break;
          }
        }
      }
    }
    out.push_back(chain[k]);
  }
  return out;
}

struct ShadowRecord {
  std::size_t cube = 0;
  std::vector<std::uint32_t> samples;  // indices into Shadows::boundary
  double s = 0.0;                      // diam SH(Q)
};

struct Shadows {
  std::vector<Vec2> boundary;
  std::vector<ShadowRecord> records;  // one per Whitney cube
  std::size_t root = 0;
  std::vector<long> parent;           // shortest-path tree, -1 at the root
};

/// Shadow of each Whitney cube with respect to the shortest-path tree from
/// the cube containing x0 (quasihyperbolic edge weights, ties to the smaller
/// cube index). Boundary samples are spaced at the finest cube side.
inline Shadows shadows(const Domain& d, const WhitneyDecomposition& w, const Vec2& x0) {
  if (!d.contains(x0)) throw DomainError("shadows: base point must be interior");
  const auto& cubes = w.cubes();
  const long root = w.locate(x0);
  if (root < 0) throw DomainError("shadows: base point is not in a Whitney cube");
  Shadows out;
  out.root = static_cast<std::size_t>(root);
  const std::size_t n = cubes.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  out.parent.assign(n, -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  const DistanceIndex index(d);
  std::vector<double> inv(n);
  for (std::size_t k = 0; k < n; ++k) inv[k] = 1.0 / index.boundary_distance(cubes[k].center());
  dist[out.root] = 0.0;
  heap.push({0.0, out.root});
  while (!heap.empty()) {
    const auto [dv, k] = heap.top();
    heap.pop();
    if (dv > dist[k]) continue;
    for (auto m : w.adjacency()[k]) {
      const double wgt = distance<2>(cubes[k].center(), cubes[m].center()) * 0.5 * (inv[k] + inv[m]);
      const double nv = dv + wgt;
      if (nv < dist[m] || (nv == dist[m] && out.parent[m] > static_cast<long>(k))) {
        const bool improve = nv < dist[m];
        dist[m] = nv;
        out.parent[m] = static_cast<long>(k);
        if (improve) heap.push({nv, m});
      }
    }
  }
  double min_side = std::numeric_limits<double>::infinity();
  for (const auto& q : cubes) min_side = std::min(min_side, q.side);
  out.boundary = d.boundary_samples(min_side);
  out.records.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.records[k].cube = k;

  // Nearest cube to each boundary sample, via a bucket grid of cube boxes.
  const Box<2> bb = d.bounds();
  const double cell = std::max(min_side * 4.0, std::max(bb.extent(0), bb.extent(1)) / 256.0);
  const int gx = static_cast<int>(std::ceil(bb.extent(0) / cell)) + 1, gy = static_cast<int>(std::ceil(bb.extent(1) / cell)) + 1;
  std::vector<std::vector<std::uint32_t>> grid(static_cast<std::size_t>(gx) * gy);
  auto gi = [&](double v, double lo, int g) { return std::clamp(static_cast<int>(std::floor((v - lo) / cell)), 0, g - 1); };
  for (std::size_t k = 0; k < n; ++k) {
    const auto& b = cubes[k].box;
    for (int v = gi(b.lo[1], bb.lo[1], gy); v <= gi(b.hi[1], bb.lo[1], gy); ++v)
      for (int u = gi(b.lo[0], bb.lo[0], gx); u <= gi(b.hi[0], bb.lo[0], gx); ++u)
        grid[static_cast<std::size_t>(v) * gx + u].push_back(static_cast<std::uint32_t>(k));
  }
  auto box_dist = [](const Box<2>& b, const Vec2& p) {
    const double dx = std::max({b.lo[0] - p[0], 0.0, p[0] - b.hi[0]});
    const double dy = std::max({b.lo[1] - p[1], 0.0, p[1] - b.hi[1]});
    return std::hypot(dx, dy);
  };
  for (std::uint32_t s = 0; s < out.boundary.size(); ++s) {
    const Vec2& p = out.boundary[s];
    const int u0 = gi(p[0], bb.lo[0], gx), v0 = gi(p[1], bb.lo[1], gy);
    double best = std::numeric_limits<double>::infinity();
    long pick = -1;
    for (int ring = 0; ring <= std::max(gx, gy); ++ring) {
      for (int v = v0 - ring; v <= v0 + ring; ++v)
        for (int u = u0 - ring; u <= u0 + ring; ++u) {
          if (std::max(std::abs(u - u0), std::abs(v - v0)) != ring || u < 0 || v < 0 || u >= gx || v >= gy) continue;
          for (auto k : grid[static_cast<std::size_t>(v) * gx + u]) {
            const double dd = box_dist(cubes[k].box, p);
            if (dd < best || (dd == best && static_cast<long>(k) < pick)) {
              best = dd;
              pick = k;
            }
          }
        }
      if (pick >= 0 && best <= ring * cell) break;
    }
    for (long k = pick; k >= 0; k = out.parent[static_cast<std::size_t>(k)]) {
      out.records[static_cast<std::size_t>(k)].samples.push_back(s);
      if (static_cast<std::size_t>(k) == out.root) break;
    }
  }
  for (auto& r : out.records) {
    if (r.samples.size() < 2) continue;
    std::vector<Vec2> pts;
    for (auto s : r.samples) pts.push_back(out.boundary[s]);
    std::vector<std::uint32_t> all(pts.size());
    for (std::uint32_t k = 0; k < all.size(); ++k) all[k] = k;
    // Convex hull then all pairs.
    std::sort(pts.begin(), pts.end());
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t h = 0;
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
      return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (h >= 2 && cross(hull[h - 2], hull[h - 1], pts[i]) <= 0) --h;
      hull[h++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = h + 1; i-- > 0;) {
      while (h >= t && cross(hull[h - 2], hull[h - 1], pts[i]) <= 0) --h;
      hull[h++] = pts[i];
    }
    hull.resize(h > 1 ? h - 1 : h);
    double d2 = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i)
      for (std::size_t j = i + 1; j < hull.size(); ++j) d2 = std::max(d2, distance2<2>(hull[i], hull[j]));
    r.s = std::sqrt(d2);
  }
  return out;
}

struct ShadowSumLevel {
  int depth = 0;
  double spacing = 0.0;
  double lhs = 0.0;  // Σ s(Q)^n
  double rhs = 0.0;  // ∫ k(x, x0)^n dx
  double ratio() const { return rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity(); }
  std::size_t cubes = 0;
};

struct ShadowSum {
  std::vector<ShadowSumLevel> levels;

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& l : levels)
      t.push_back({{"depth", l.depth}, {"spacing", l.spacing}, {"lhs", l.lhs}, {"rhs", l.rhs},
                   {"ratio", l.ratio()}, {"cubes", l.cubes}});
    return {{"levels", t}};
  }
};

/// Σ_Q s(Q)^2 against ∫_Ω k(x, x0)^2 dx at the given Whitney depths; the
/// lattice spacing for k follows the finest cube side of each level.
inline ShadowSum shadow_sum_diagnostic(const Domain& d, const Vec2& x0, const std::vector<int>& depths,
                                       double n = 2.0) {
  ShadowSum out;
  for (int depth : depths) {
    const auto w = whitney_decompose(d, depth);
    const auto sh = shadows(d, w, x0);
    ShadowSumLevel lvl;
    lvl.depth = depth;
    lvl.cubes = w.cubes().size();
    for (const auto& r : sh.records) lvl.lhs += std::pow(r.s, n);
    lvl.spacing = std::ldexp(w.root_side(), -depth);
    const QhField field(d, x0, lvl.spacing);
    lvl.rhs = field.integral_power(n);
    out.levels.push_back(lvl);
  }
  return out;
}

}  // namespace exdist::qhyp
