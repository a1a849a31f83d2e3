#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/exact.hpp"
#include "exdist/lineset.hpp"
#include "exdist/vec.hpp"

namespace exdist::geom {

/// Result of intersecting a set with a closed segment.
struct SegmentHit {
  IntersectionKind kind = IntersectionKind::empty;
  std::vector<Vec2> points;  // isolated points (finite case)
  double length = 0.0;       // 1-measure of the intersection

  std::size_t count() const { return points.size(); }

  void merge(const SegmentHit& o) {
    if (o.kind == IntersectionKind::empty) return;
    kind = std::max(kind, o.kind);
    length += o.length;
    for (const auto& p : o.points) {
      bool dup = false;
      for (const auto& q : points)
        if (distance<2>(p, q) <= 1e-12 * (1.0 + std::fabs(p[0]) + std::fabs(p[1]))) {
          dup = true;
          break;
        }
      if (!dup) points.push_back(p);
    }
    if (kind != IntersectionKind::finite) points.clear();
  }
};

/// Closed set in the line (dimension 1, embedded as R x {0}) or in the plane
/// with exact membership, box and segment tests.
class SetModel {
 public:
  virtual ~SetModel() = default;
  virtual std::string kind() const = 0;
  virtual int dimension() const { return 2; }
  virtual bool contains(const Vec2& p) const = 0;
  /// Whether the set meets the closed box.
  virtual bool intersects_box(const Box<2>& b) const = 0;
  /// Exact classification of the set intersected with the closed segment [a, b].
  virtual SegmentHit intersect_segment(const Vec2& a, const Vec2& b) const = 0;
  virtual Box<2> bounds() const = 0;
  virtual double diameter() const = 0;
  /// Lebesgue measure in the ambient dimension.
  virtual double measure() const = 0;
  /// Hausdorff (n-1)-measure when known, NaN otherwise.
  virtual double codim1_measure() const { return std::numeric_limits<double>::quiet_NaN(); }
  virtual nlohmann::json to_json() const = 0;
};

using SetPtr = std::shared_ptr<const SetModel>;

namespace detail {

inline Rational rmax(const Rational& a, const Rational& b) { return a < b ? b : a; }
inline Rational rmin(const Rational& a, const Rational& b) { return a < b ? a : b; }

inline Vec2 to_vec(const RPoint& p) { return {to_double(p.x), to_double(p.y)}; }

/// Exact intersection of closed segments [a,b] and [c,d].
inline SegmentHit segment_segment(const RPoint& a, const RPoint& b, const RPoint& c, const RPoint& d) {
  SegmentHit hit;
  const int o1 = sgn(orient(a, b, c)), o2 = sgn(orient(a, b, d));
  const int o3 = sgn(orient(c, d, a)), o4 = sgn(orient(c, d, b));
  const bool ab_point = a.x == b.x && a.y == b.y;
  const bool cd_point = c.x == d.x && c.y == d.y;
  auto on = [](const RPoint& p, const RPoint& q, const RPoint& r) {
    return sgn(orient(p, q, r)) == 0 && rmin(p.x, q.x) <= r.x && r.x <= rmax(p.x, q.x) && rmin(p.y, q.y) <= r.y &&
           r.y <= rmax(p.y, q.y);
  };
  if (ab_point || cd_point) {
    const RPoint& p = ab_point ? a : c;
    const bool inside = ab_point ? (cd_point ? (a.x == c.x && a.y == c.y) : on(c, d, a)) : on(a, b, c);
    if (inside) {
      hit.kind = IntersectionKind::finite;
      hit.points.push_back(to_vec(p));
    }
    return hit;
  }
  if (o1 == 0 && o2 == 0) {
    // Collinear: project on the dominant axis.
    const bool use_x = a.x != b.x;
    auto key = [&](const RPoint& p) { return use_x ? p.x : p.y; };
    const Rational lo = rmax(rmin(key(a), key(b)), rmin(key(c), key(d)));
    const Rational hi = rmin(rmax(key(a), key(b)), rmax(key(c), key(d)));
    if (lo > hi) return hit;
    const Rational span = key(b) - key(a);
    auto at = [&](const Rational& k) {
      const Rational t = (k - key(a)) / span;
      return RPoint{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    };
    if (lo == hi) {
      hit.kind = IntersectionKind::finite;
      hit.points.push_back(to_vec(at(lo)));
    } else {
      hit.kind = IntersectionKind::positive_length;
      const RPoint p = at(lo), q = at(hi);
      hit.length = distance<2>(to_vec(p), to_vec(q));
    }
    return hit;
  }
  if (o1 * o2 <= 0 && o3 * o4 <= 0) {
    const Rational den = (b.x - a.x) * (d.y - c.y) - (b.y - a.y) * (d.x - c.x);
    const Rational t = ((c.x - a.x) * (d.y - c.y) - (c.y - a.y) * (d.x - c.x)) / den;
    hit.kind = IntersectionKind::finite;
    hit.points.push_back(to_vec(RPoint{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}));
  }
  return hit;
}

/// Sign of u + v*sqrt(D) for rational u, v and D >= 0.
inline int sign_plus_root(const Rational& u, const Rational& v, const Rational& D) {
  const int su = sgn(u), sv = sgn(v);
  if (sv == 0 || sgn(D) == 0) return su;
  if (su == 0) return sv;
  if (su == sv) return su;
  const Rational lhs = u * u, rhs = v * v * D;
  if (lhs == rhs) return 0;
  return lhs > rhs ? su : sv;
}

inline nlohmann::json rat_json(const Rational& r) {
  if (r.get_den() == 1 && abs(r.get_num()) < mpz_class("9007199254740992")) return r.get_d();
  return exdist::to_string(r);
}

inline Rational rat_from_json(const nlohmann::json& j) {
  if (j.is_string()) return rational_from_string(j.get<std::string>());
  if (j.is_number()) return exact(j.get<double>());
  throw DomainError("expected a number or a rational string");
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Finite union of points, closed segments and circles in the plane.
class PrimitiveSet final : public SetModel {
 public:
  struct Circle {
    Vec2 center;
    double radius;
  };

  PrimitiveSet() = default;

  PrimitiveSet& add_point(const Vec2& p) {
    points_.push_back(p);
    return *this;
  }
  PrimitiveSet& add_segment(const Vec2& a, const Vec2& b) {
    segments_.emplace_back(a, b);
    return *this;
  }
  PrimitiveSet& add_circle(const Vec2& c, double r) {
    if (!(r > 0.0)) throw DomainError("circle radius must be positive");
    circles_.push_back({c, r});
    return *this;
  }

  std::string kind() const override { return "primitives"; }

  bool contains(const Vec2& p) const override {
    const RPoint P = exact(p);
    for (const auto& q : points_)
      if (q == p) return true;
    for (const auto& [a, b] : segments_) {
      const RPoint A = exact(a), B = exact(b);
      if (sgn(orient(A, B, P)) == 0 && detail::rmin(A.x, B.x) <= P.x && P.x <= detail::rmax(A.x, B.x) &&
          detail::rmin(A.y, B.y) <= P.y && P.y <= detail::rmax(A.y, B.y))
        return true;
    }
    for (const auto& c : circles_) {
      const Rational dx = P.x - exact(c.center[0]), dy = P.y - exact(c.center[1]), r = exact(c.radius);
      if (dx * dx + dy * dy == r * r) return true;
    }
    return false;
  }

  bool intersects_box(const Box<2>& b) const override {
    for (const auto& p : points_)
      if (b.contains(p)) return true;
    const RPoint c00 = exact(Vec2{b.lo[0], b.lo[1]}), c10 = exact(Vec2{b.hi[0], b.lo[1]});
    const RPoint c11 = exact(Vec2{b.hi[0], b.hi[1]}), c01 = exact(Vec2{b.lo[0], b.hi[1]});
    for (const auto& [a, e] : segments_) {
      if (b.contains(a) || b.contains(e)) return true;
      const RPoint A = exact(a), E = exact(e);
      for (const auto& [p, q] : {std::pair{c00, c10}, std::pair{c10, c11}, std::pair{c11, c01}, std::pair{c01, c00}})
        if (detail::segment_segment(A, E, p, q).kind != IntersectionKind::empty) return true;
    }
    for (const auto& c : circles_) {
      const Rational cx = exact(c.center[0]), cy = exact(c.center[1]), r2 = exact(c.radius) * exact(c.radius);
      Rational near2 = 0, far2 = 0;
      for (int i = 0; i < 2; ++i) {
        const Rational lo = exact(b.lo[i]) - (i == 0 ? cx : cy);
        const Rational hi = exact(b.hi[i]) - (i == 0 ? cx : cy);
        const Rational nearest = lo > 0 ? lo : (hi < 0 ? hi : Rational(0));
        near2 += nearest * nearest;
        far2 += detail::rmax(lo * lo, hi * hi);
      }
      if (near2 <= r2 && r2 <= far2) return true;
    }
    return false;
  }

  SegmentHit intersect_segment(const Vec2& a, const Vec2& b) const override {
    SegmentHit out;
    const RPoint A = exact(a), B = exact(b);
    for (const auto& p : points_) out.merge(detail::segment_segment(A, B, exact(p), exact(p)));
    for (const auto& [p, q] : segments_) out.merge(detail::segment_segment(A, B, exact(p), exact(q)));
    for (const auto& c : circles_) out.merge(circle_hit(A, B, c));
    return out;
  }

  Box<2> bounds() const override {
    Box<2> b = Box<2>::empty();
    for (const auto& p : points_) b.expand(p);
    for (const auto& [p, q] : segments_) {
      b.expand(p);
      b.expand(q);
    }
    for (const auto& c : circles_) {
      b.expand({c.center[0] - c.radius, c.center[1] - c.radius});
      b.expand({c.center[0] + c.radius, c.center[1] + c.radius});
    }
    return b;
  }

  double diameter() const override {
    // Each primitive is summarised by a centre and a radius of reach.
    std::vector<std::pair<Vec2, double>> parts;
    for (const auto& p : points_) parts.emplace_back(p, 0.0);
    for (const auto& [p, q] : segments_) {
      parts.emplace_back(p, 0.0);
      parts.emplace_back(q, 0.0);
    }
    for (const auto& c : circles_) parts.emplace_back(c.center, c.radius);
    double d = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (std::size_t j = i; j < parts.size(); ++j) {
        const double dij = distance<2>(parts[i].first, parts[j].first);
        if (i == j)
          d = std::max(d, 2.0 * parts[i].second);
        else
          d = std::max(d, dij + parts[i].second + parts[j].second);
      }
    return d;
  }

  double measure() const override { return 0.0; }

  double codim1_measure() const override {
    double s = 0.0;
    for (const auto& [p, q] : segments_) s += distance<2>(p, q);
    for (const auto& c : circles_) s += 2.0 * std::numbers::pi * c.radius;
    return s;
  }

  nlohmann::json to_json() const override {
    nlohmann::json j{{"kind", kind()}};
    j["points"] = points_;
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& [p, q] : segments_) segs.push_back({p, q});
    j["segments"] = segs;
    nlohmann::json circ = nlohmann::json::array();
    for (const auto& c : circles_) circ.push_back({{"center", c.center}, {"radius", c.radius}});
    j["circles"] = circ;
    return j;
  }

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<std::pair<Vec2, Vec2>>& segments() const { return segments_; }
  const std::vector<Circle>& circles() const { return circles_; }

 private:
  static SegmentHit circle_hit(const RPoint& A, const RPoint& B, const Circle& c) {
    SegmentHit hit;
    const Rational cx = exact(c.center[0]), cy = exact(c.center[1]), r = exact(c.radius);
    const Rational dx = B.x - A.x, dy = B.y - A.y;
    const Rational fx = A.x - cx, fy = A.y - cy;
    const Rational qa = dx * dx + dy * dy;
    const Rational qb = 2 * (fx * dx + fy * dy);
    const Rational qc = fx * fx + fy * fy - r * r;
    if (qa == 0) {
      if (qc == 0) {
        hit.kind = IntersectionKind::finite;
        hit.points.push_back(detail::to_vec(A));
      }
      return hit;
    }
    const Rational D = qb * qb - 4 * qa * qc;
    if (D < 0) return hit;
    // Roots t = (-qb ± sqrt(D)) / (2 qa); keep those in [0, 1].
    const double Dd = std::sqrt(to_double(D));
    for (int s : {-1, 1}) {
      if (D == 0 && s == 1) break;
      const int lo = detail::sign_plus_root(-qb, Rational(s), D);              // 2 qa t >= 0
      const int hi = detail::sign_plus_root(-qb - 2 * qa, Rational(s), D);     // 2 qa t - 2 qa <= 0
      if (lo >= 0 && hi <= 0) {
        const double t = (-to_double(qb) + s * Dd) / (2.0 * to_double(qa));
        hit.points.push_back({to_double(A.x) + t * to_double(dx), to_double(A.y) + t * to_double(dy)});
      }
    }
    if (!hit.points.empty()) hit.kind = IntersectionKind::finite;
    return hit;
  }

  std::vector<Vec2> points_;
  std::vector<std::pair<Vec2, Vec2>> segments_;
  std::vector<Circle> circles_;
};

// ---------------------------------------------------------------------------

inline nlohmann::json lineset_to_json(const LineSet& s) {
  if (const auto* iu = dynamic_cast<const IntervalUnion*>(&s)) {
    nlohmann::json iv = nlohmann::json::array();
    for (const auto& [a, b] : iu->intervals()) iv.push_back({detail::rat_json(a), detail::rat_json(b)});
    return {{"kind", "intervals"}, {"intervals", iv}};
  }
  const auto& c = dynamic_cast<const CantorLine&>(s);
  nlohmann::json rule;
  switch (c.rule().kind) {
    case RemovalRule::Kind::constant: rule = {{"kind", "constant"}, {"fraction", exdist::to_string(c.rule().fraction)}}; break;
    case RemovalRule::Kind::power: rule = {{"kind", "power"}, {"base", c.rule().base}}; break;
    case RemovalRule::Kind::list: {
      nlohmann::json fs = nlohmann::json::array();
      for (const auto& f : c.rule().fractions) fs.push_back(exdist::to_string(f));
      rule = {{"kind", "list"}, {"fractions", fs}};
      break;
    }
  }
  return {{"kind", "cantor"},
          {"base", {detail::rat_json(c.lower()), detail::rat_json(c.upper())}},
          {"rule", rule},
          {"depth", c.depth()}};
}

inline LineSetPtr lineset_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "intervals") {
    std::vector<RInterval> iv;
    for (const auto& e : j.at("intervals"))
      iv.emplace_back(detail::rat_from_json(e.at(0)), detail::rat_from_json(e.at(1)));
    return std::make_shared<IntervalUnion>(std::move(iv));
  }
  if (kind == "point") {
    const Rational x = detail::rat_from_json(j.at("at"));
    return std::make_shared<IntervalUnion>(std::vector<RInterval>{{x, x}});
  }
  if (kind == "cantor") {
    const auto& r = j.at("rule");
    const auto rk = r.at("kind").get<std::string>();
    RemovalRule rule;
    if (rk == "constant")
      rule = RemovalRule::constant_rule(detail::rat_from_json(r.at("fraction")));
    else if (rk == "power")
      rule = RemovalRule::power_rule(r.at("base").get<long>());
    else if (rk == "list") {
      std::vector<Rational> fs;
      for (const auto& f : r.at("fractions")) fs.push_back(detail::rat_from_json(f));
      rule = RemovalRule::list_rule(std::move(fs));
    } else {
      throw DomainError("unknown removal rule '" + rk + "'");
    }
    const auto& base = j.at("base");
    return std::make_shared<CantorLine>(detail::rat_from_json(base.at(0)), detail::rat_from_json(base.at(1)),
                                        std::move(rule), j.at("depth").get<int>());
  }
  throw DomainError("unknown line set kind '" + kind + "'");
}

/// A closed subset of the real line, seen as the set S x {0} in the plane.
class LineSetModel final : public SetModel {
 public:
  explicit LineSetModel(LineSetPtr s) : set_(std::move(s)) {}

  std::string kind() const override { return "line"; }
  int dimension() const override { return 1; }
  const LineSet& line() const { return *set_; }
  const LineSetPtr& line_ptr() const { return set_; }

  bool contains(const Vec2& p) const override { return p[1] == 0.0 && set_->contains(exact(p[0])); }

  bool intersects_box(const Box<2>& b) const override {
    if (b.lo[1] > 0.0 || b.hi[1] < 0.0) return false;
    return set_->intersects(exact(b.lo[0]), exact(b.hi[0]));
  }

  SegmentHit intersect_segment(const Vec2& a, const Vec2& b) const override {
    SegmentHit hit;
    if (a[1] == 0.0 && b[1] == 0.0) {
      const Rational lo = exact(std::min(a[0], b[0])), hi = exact(std::max(a[0], b[0]));
      const LineSlice s = set_->slice(lo, hi);
      hit.kind = s.kind;
      hit.length = s.measure;
      for (const auto& x : s.points) hit.points.push_back({to_double(x), 0.0});
      return hit;
    }
    if ((a[1] > 0.0 && b[1] > 0.0) || (a[1] < 0.0 && b[1] < 0.0)) return hit;
    const RPoint A = exact(a), B = exact(b);
    const Rational x = A.x + (B.x - A.x) * (-A.y) / (B.y - A.y);
    if (set_->contains(x)) {
      hit.kind = IntersectionKind::finite;
      hit.points.push_back({to_double(x), 0.0});
    }
    return hit;
  }

  Box<2> bounds() const override {
    return {{to_double(set_->lower()), 0.0}, {to_double(set_->upper()), 0.0}};
  }
  double diameter() const override { return to_double(set_->upper() - set_->lower()); }
  double measure() const override { return set_->limit_measure(); }
  double codim1_measure() const override {
    if (!set_->is_simple()) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(set_->approximant().size());
  }
  nlohmann::json to_json() const override { return {{"kind", kind()}, {"set", lineset_to_json(*set_)}}; }

 private:
  LineSetPtr set_;
};

// ---------------------------------------------------------------------------

/// Product G x F of two closed subsets of the line.
class ProductSet final : public SetModel {
 public:
  ProductSet(LineSetPtr g, LineSetPtr f) : g_(std::move(g)), f_(std::move(f)) {}

  std::string kind() const override { return "product"; }
  const LineSet& first() const { return *g_; }
  const LineSet& second() const { return *f_; }

  bool contains(const Vec2& p) const override { return g_->contains(exact(p[0])) && f_->contains(exact(p[1])); }

  bool intersects_box(const Box<2>& b) const override {
    return g_->intersects(exact(b.lo[0]), exact(b.hi[0])) && f_->intersects(exact(b.lo[1]), exact(b.hi[1]));
  }

  SegmentHit intersect_segment(const Vec2& a, const Vec2& b) const override {
    const RPoint A = exact(a), B = exact(b);
    SegmentHit hit;
    if (A.x == B.x && A.y == B.y) {
      if (contains(a)) {
        hit.kind = IntersectionKind::finite;
        hit.points.push_back(a);
      }
      return hit;
    }
    if (A.y == B.y) return axis_hit(*g_, *f_, A.y, detail::rmin(A.x, B.x), detail::rmax(A.x, B.x), false);
    if (A.x == B.x) return axis_hit(*f_, *g_, A.x, detail::rmin(A.y, B.y), detail::rmax(A.y, B.y), true);
    if (g_->is_simple()) return oblique(A, B, *g_, *f_, false);
    if (f_->is_simple()) return oblique(A, B, *f_, *g_, true);
    if (!approximants_meet(A, B))
      return hit;
    throw UnsupportedError("oblique segment against a product of two Cantor-type sets");
  }

  Box<2> bounds() const override {
    return {{to_double(g_->lower()), to_double(f_->lower())}, {to_double(g_->upper()), to_double(f_->upper())}};
  }
  double diameter() const override { return bounds().diameter(); }
  double measure() const override { return g_->limit_measure() * f_->limit_measure(); }
  Rational measure_at_depth() const { return g_->measure_at_depth() * f_->measure_at_depth(); }

  double codim1_measure() const override {
    auto points_only = [](const LineSet& s) {
      if (!s.is_simple()) return false;
      for (const auto& [a, b] : s.approximant())
        if (a != b) return false;
      return true;
    };
    if (points_only(*g_) && f_->is_simple()) return g_->approximant().size() * f_->limit_measure();
    if (points_only(*f_) && g_->is_simple()) return f_->approximant().size() * g_->limit_measure();
    return std::numeric_limits<double>::quiet_NaN();
  }

  nlohmann::json to_json() const override {
    return {{"kind", kind()}, {"x", lineset_to_json(*g_)}, {"y", lineset_to_json(*f_)}};
  }

 private:
  // Segment along a line where the coordinate of `fixed_set` equals `at`.
  static SegmentHit axis_hit(const LineSet& along, const LineSet& fixed_set, const Rational& at, const Rational& lo,
                             const Rational& hi, bool vertical) {
    SegmentHit hit;
    if (!fixed_set.contains(at)) return hit;
    const LineSlice s = along.slice(lo, hi);
    hit.kind = s.kind;
    hit.length = s.measure;
    for (const auto& x : s.points)
      hit.points.push_back(vertical ? Vec2{to_double(at), to_double(x)} : Vec2{to_double(x), to_double(at)});
    return hit;
  }

  // Oblique segment; `simple` is the exactly-known factor along axis `simple_is_y`.
  static SegmentHit oblique(const RPoint& A, const RPoint& B, const LineSet& simple, const LineSet& other,
                            bool simple_is_y) {
    SegmentHit out;
    const Rational s0 = simple_is_y ? A.y : A.x, s1 = simple_is_y ? B.y : B.x;
    const Rational o0 = simple_is_y ? A.x : A.y, o1 = simple_is_y ? B.x : B.y;
    const Rational ds = s1 - s0, dox = o1 - o0;
    const double seg_len = distance<2>(detail::to_vec(A), detail::to_vec(B));
    auto point_at = [&](const Rational& t) {
      return Vec2{to_double(A.x + t * (B.x - A.x)), to_double(A.y + t * (B.y - A.y))};
    };
    for (const auto& [g0, g1] : simple.approximant()) {
      Rational t0 = (g0 - s0) / ds, t1 = (g1 - s0) / ds;
      if (t1 < t0) std::swap(t0, t1);
      t0 = detail::rmax(t0, Rational(0));
      t1 = detail::rmin(t1, Rational(1));
      if (t0 > t1) continue;
      SegmentHit piece;
      if (t0 == t1) {
        if (other.contains(o0 + t0 * dox)) {
          piece.kind = IntersectionKind::finite;
          piece.points.push_back(point_at(t0));
        }
      } else {
        Rational y0 = o0 + t0 * dox, y1 = o0 + t1 * dox;
        if (y1 < y0) std::swap(y0, y1);
        const LineSlice s = other.slice(y0, y1);
        piece.kind = s.kind;
        piece.length = s.measure * seg_len / std::fabs(to_double(dox));
        for (const auto& y : s.points) piece.points.push_back(point_at((y - o0) / dox));
      }
      out.merge(piece);
    }
    return out;
  }

  bool approximants_meet(const RPoint& A, const RPoint& B) const {
    const Rational dx = B.x - A.x, dy = B.y - A.y;
    std::vector<RInterval> tg, tf;
    for (const auto& [a, b] : g_->approximant()) {
      Rational t0 = (a - A.x) / dx, t1 = (b - A.x) / dx;
      if (t1 < t0) std::swap(t0, t1);
      tg.emplace_back(detail::rmax(t0, Rational(0)), detail::rmin(t1, Rational(1)));
    }
    for (const auto& [a, b] : f_->approximant()) {
      Rational t0 = (a - A.y) / dy, t1 = (b - A.y) / dy;
      if (t1 < t0) std::swap(t0, t1);
      tf.emplace_back(detail::rmax(t0, Rational(0)), detail::rmin(t1, Rational(1)));
    }
    for (const auto& [a, b] : tg) {
      if (a > b) continue;
      for (const auto& [c, d] : tf)
        if (c <= d && a <= d && c <= b) return true;
    }
    return false;
  }

  LineSetPtr g_;
  LineSetPtr f_;
};

// ---------------------------------------------------------------------------

using RPolygon = std::vector<RPoint>;

namespace detail {

inline Rational polygon_area2(const RPolygon& p) {
  Rational s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    s += a.x * b.y - a.y * b.x;
  }
  return s;
}

inline void make_ccw_convex(RPolygon& p) {
  if (p.size() < 3) throw DomainError("polygon needs at least 3 vertices");
  if (polygon_area2(p) < 0) std::reverse(p.begin(), p.end());
  if (polygon_area2(p) == 0) throw DomainError("degenerate polygon");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (sgn(orient(p[i], p[(i + 1) % p.size()], p[(i + 2) % p.size()])) < 0)
      throw DomainError("packing polygons must be convex");
}

// Interiors of convex CCW polygons are disjoint iff some edge line separates them.
inline bool interiors_disjoint(const RPolygon& a, const RPolygon& b) {
  auto separates = [](const RPolygon& p, const RPolygon& q) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& u = p[i];
      const auto& v = p[(i + 1) % p.size()];
      bool all_out = true;
      for (const auto& x : q)
        if (sgn(orient(u, v, x)) > 0) {
          all_out = false;
          break;
        }
      if (all_out) return true;
    }
    return false;
  };
  return separates(a, b) || separates(b, a);
}

inline bool inside_closed(const RPolygon& p, const RPoint& x) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (sgn(orient(p[i], p[(i + 1) % p.size()], x)) < 0) return false;
  return true;
}

inline bool inside_open(const RPolygon& p, const RPoint& x) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (sgn(orient(p[i], p[(i + 1) % p.size()], x)) <= 0) return false;
  return true;
}

// Sutherland–Hodgman clip of a convex polygon by the closed half-plane left of (u, v).
inline RPolygon clip(const RPolygon& poly, const RPoint& u, const RPoint& v) {
  RPolygon out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const Rational fa = orient(u, v, a), fb = orient(u, v, b);
    if (fa >= 0) out.push_back(a);
    if ((fa > 0 && fb < 0) || (fa < 0 && fb > 0)) {
      const Rational t = fa / (fa - fb);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

// Parameter set {t in [0,1] : A + t(B-A) in the polygon}, closed (strict=false)
// or open (strict=true); empty when lo > hi (or lo >= hi when strict).
inline std::pair<Rational, Rational> segment_window(const RPolygon& p, const RPoint& A, const RPoint& B, bool strict,
                                                    bool& nonempty) {
  Rational lo = 0, hi = 1;
  bool lo_open = false, hi_open = false;
  nonempty = true;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    // f(t) = orient(u, v, A) + t * (orient(u, v, B) - orient(u, v, A)) must be >= 0 (> 0 when strict).
    const Rational f0 = orient(u, v, A);
    const Rational slope = orient(u, v, B) - f0;
    if (slope == 0) {
      if (f0 < 0 || (strict && f0 == 0)) {
        nonempty = false;
        return {lo, hi};
      }
      continue;
    }
    const Rational t = -f0 / slope;
    if (slope > 0) {
      if (t > lo || (t == lo && strict)) {
        lo = t;
        lo_open = strict;
      }
    } else {
      if (t < hi || (t == hi && strict)) {
        hi = t;
        hi_open = strict;
      }
    }
  }
  if (lo > hi || (lo == hi && (lo_open || hi_open))) nonempty = false;
  return {lo, hi};
}

}  // namespace detail

/// Residual set of a packing: closure of a convex region D0 minus pairwise
/// disjoint open convex polygons D_i inside it.
class PackingResidual final : public SetModel {
 public:
  PackingResidual(RPolygon outer, std::vector<RPolygon> packed) : outer_(std::move(outer)), packed_(std::move(packed)) {
    detail::make_ccw_convex(outer_);
    for (auto& p : packed_) {
      detail::make_ccw_convex(p);
      for (const auto& v : p)
        if (!detail::inside_closed(outer_, v)) throw DomainError("packed region is not inside the outer region");
    }
    for (std::size_t i = 0; i < packed_.size(); ++i)
      for (std::size_t j = i + 1; j < packed_.size(); ++j)
        if (!detail::interiors_disjoint(packed_[i], packed_[j]))
          throw DomainError("packed regions " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    boundary_bound_ = compute_boundary_bound();
  }

  std::string kind() const override { return "packing"; }

  bool contains(const Vec2& p) const override {
    const RPoint P = exact(p);
    if (!detail::inside_closed(outer_, P)) return false;
    for (const auto& d : packed_)
      if (detail::inside_open(d, P)) return false;
    return true;
  }

  bool intersects_box(const Box<2>& b) const override {
    RPolygon poly = outer_;
    const RPoint c00 = exact(Vec2{b.lo[0], b.lo[1]}), c10 = exact(Vec2{b.hi[0], b.lo[1]});
    const RPoint c11 = exact(Vec2{b.hi[0], b.hi[1]}), c01 = exact(Vec2{b.lo[0], b.hi[1]});
    for (const auto& [u, v] : {std::pair{c00, c10}, std::pair{c10, c11}, std::pair{c11, c01}, std::pair{c01, c00}}) {
      if (u.x == v.x && u.y == v.y) continue;
      poly = detail::clip(poly, u, v);
      if (poly.empty()) return false;
    }
    // A connected closed piece lies in the union of disjoint open sets only if it lies in one.
    for (const auto& d : packed_) {
      bool all_in = true;
      for (const auto& x : poly)
        if (!detail::inside_open(d, x)) {
          all_in = false;
          break;
        }
      if (all_in) return false;
    }
    return true;
  }

  SegmentHit intersect_segment(const Vec2& a, const Vec2& b) const override {
    SegmentHit hit;
    const RPoint A = exact(a), B = exact(b);
    if (A.x == B.x && A.y == B.y) {
      if (contains(a)) {
        hit.kind = IntersectionKind::finite;
        hit.points.push_back(a);
      }
      return hit;
    }
    bool ok = false;
    const auto [t0, t1] = detail::segment_window(outer_, A, B, false, ok);
    if (!ok) return hit;
    std::vector<RInterval> holes;
    for (const auto& d : packed_) {
      bool open_ok = false;
      const auto w = detail::segment_window(d, A, B, true, open_ok);
      if (open_ok) holes.push_back(w);
    }
    std::sort(holes.begin(), holes.end(), [](const RInterval& x, const RInterval& y) { return x.first < y.first; });
    // Closed pieces of [t0, t1] outside the open holes.
    std::vector<RInterval> pieces;
    Rational cur = t0;
    for (const auto& [h0, h1] : holes) {
      if (h1 <= cur) continue;
      if (h0 >= t1) break;
      if (h0 >= cur) pieces.emplace_back(cur, h0);
      cur = detail::rmax(cur, h1);
      if (cur > t1) break;
    }
    if (cur <= t1) pieces.emplace_back(cur, t1);
    const double len = distance<2>(a, b);
    auto at = [&](const Rational& t) {
      return Vec2{to_double(A.x + t * (B.x - A.x)), to_double(A.y + t * (B.y - A.y))};
    };
    for (const auto& [p0, p1] : pieces) {
      SegmentHit piece;
      if (p0 == p1) {
        piece.kind = IntersectionKind::finite;
        piece.points.push_back(at(p0));
      } else {
        piece.kind = IntersectionKind::positive_length;
        piece.length = to_double(p1 - p0) * len;
      }
      hit.merge(piece);
    }
    return hit;
  }

  Box<2> bounds() const override {
    Box<2> b = Box<2>::empty();
    for (const auto& v : outer_) b.expand(detail::to_vec(v));
    return b;
  }

  double diameter() const override {
    // Vertices of the outer polygon remain in the residual (packed sets are open).
    double d = 0.0;
    for (const auto& p : outer_)
      for (const auto& q : outer_) d = std::max(d, distance<2>(detail::to_vec(p), detail::to_vec(q)));
    return d;
  }

  Rational exact_area() const {
    Rational s = detail::polygon_area2(outer_);
    for (const auto& p : packed_) s -= detail::polygon_area2(p);
    return s / 2;
  }
  double measure() const override { return to_double(exact_area()); }

  /// Largest |∂D_i ∩ ∂D_j| over pairs (the outer boundary included); -1 when
  /// some pair shares a boundary segment.
  long boundary_intersection_bound() const { return boundary_bound_; }

  const RPolygon& outer() const { return outer_; }
  const std::vector<RPolygon>& packed() const { return packed_; }

  nlohmann::json to_json() const override {
    auto poly = [](const RPolygon& p) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& v : p) a.push_back({detail::rat_json(v.x), detail::rat_json(v.y)});
      return a;
    };
    nlohmann::json packed = nlohmann::json::array();
    for (const auto& p : packed_) packed.push_back(poly(p));
    return {{"kind", kind()}, {"outer", poly(outer_)}, {"packed", packed},
            {"boundary_intersection_bound", boundary_bound_}};
  }

 private:
  long compute_boundary_bound() const {
    std::vector<const RPolygon*> all{&outer_};
    for (const auto& p : packed_) all.push_back(&p);
    long worst = 0;
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        const long n = boundary_meet(*all[i], *all[j]);
        if (n < 0) return -1;
        worst = std::max(worst, n);
      }
    return worst;
  }

  static long boundary_meet(const RPolygon& a, const RPolygon& b) {
    std::vector<Vec2> pts;
    SegmentHit all;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        const auto h = detail::segment_segment(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()]);
        if (h.kind == IntersectionKind::positive_length) return -1;
        all.merge(h);
      }
    return static_cast<long>(all.points.size());
  }

  RPolygon outer_;
  std::vector<RPolygon> packed_;
  long boundary_bound_ = 0;
};

/// Reconstructs a SetModel from its JSON record.
inline SetPtr set_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "primitives") {
    auto s = std::make_shared<PrimitiveSet>();
    for (const auto& p : j.value("points", nlohmann::json::array())) s->add_point(p.get<Vec2>());
    for (const auto& e : j.value("segments", nlohmann::json::array()))
      s->add_segment(e.at(0).get<Vec2>(), e.at(1).get<Vec2>());
    for (const auto& c : j.value("circles", nlohmann::json::array()))
      s->add_circle(c.at("center").get<Vec2>(), c.at("radius").get<double>());
    return s;
  }
  if (kind == "line") return std::make_shared<LineSetModel>(lineset_from_json(j.at("set")));
  if (kind == "product")
    return std::make_shared<ProductSet>(lineset_from_json(j.at("x")), lineset_from_json(j.at("y")));
  if (kind == "packing") {
    auto poly = [](const nlohmann::json& a) {
      RPolygon p;
      for (const auto& v : a) p.push_back({detail::rat_from_json(v.at(0)), detail::rat_from_json(v.at(1))});
      return p;
    };
    std::vector<RPolygon> packed;
    for (const auto& p : j.at("packed")) packed.push_back(poly(p));
    return std::make_shared<PackingResidual>(poly(j.at("outer")), std::move(packed));
  }
  throw DomainError("unknown set kind '" + kind + "'");
}

}  // namespace exdist::geom
