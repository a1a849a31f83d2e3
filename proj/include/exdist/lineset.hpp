#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "exdist/exact.hpp"

namespace exdist::geom {

/// Raised when a set/curve combination cannot be classified exactly.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IntersectionKind { empty, finite, infinite_null_length, positive_length };

inline const char* to_string(IntersectionKind k) {
  switch (k) {
    case IntersectionKind::empty: return "empty";
    case IntersectionKind::finite: return "finite";
    case IntersectionKind::infinite_null_length: return "infinite-nulllength";
    case IntersectionKind::positive_length: return "positive-length";
  }
  return "?";
}

/// Intersection of a closed subset of the line with a closed interval.
struct LineSlice {
  IntersectionKind kind = IntersectionKind::empty;
  std::vector<Rational> points;  // isolated points when kind == finite
  double measure = 0.0;          // 1-measure of the slice (limit set)

  void merge(const LineSlice& o) {
    if (o.kind == IntersectionKind::empty) return;
    points.insert(points.end(), o.points.begin(), o.points.end());
    measure += o.measure;
    kind = std::max(kind, o.kind);
  }
};

using RInterval = std::pair<Rational, Rational>;

/// Closed subset of the real line with exact slicing.
class LineSet {
 public:
  virtual ~LineSet() = default;

  /// Exact classification of the set intersected with [a, b] (a <= b).
  virtual LineSlice slice(const Rational& a, const Rational& b) const = 0;
  /// Membership at the represented depth.
  virtual bool contains(const Rational& x) const = 0;
  /// Closed intervals covering the set (exact for finite unions, depth approximant otherwise).
  virtual std::vector<RInterval> approximant() const = 0;
  /// True when the set is exactly a finite union of closed intervals and points.
  virtual bool is_simple() const = 0;
  virtual Rational measure_at_depth() const = 0;
  virtual double limit_measure() const = 0;
  virtual Rational lower() const = 0;
  virtual Rational upper() const = 0;

  /// Whether [a, b] meets the set (for Cantor sets: the depth approximant).
  virtual bool intersects(const Rational& a, const Rational& b) const {
    if (a == b) return contains(a);
    return slice(a, b).kind != IntersectionKind::empty;
  }
};

using LineSetPtr = std::shared_ptr<const LineSet>;

/// Finite union of closed intervals; degenerate intervals are points.
class IntervalUnion final : public LineSet {
 public:
  explicit IntervalUnion(std::vector<RInterval> intervals) : intervals_(std::move(intervals)) {
    for (auto& [a, b] : intervals_)
      if (b < a) std::swap(a, b);
    std::sort(intervals_.begin(), intervals_.end(),
              [](const RInterval& x, const RInterval& y) { return x.first < y.first; });
    std::vector<RInterval> merged;
    for (const auto& iv : intervals_) {
      if (!merged.empty() && iv.first <= merged.back().second) {
        if (iv.second > merged.back().second) merged.back().second = iv.second;
      } else {
        merged.push_back(iv);
      }
    }
    intervals_ = std::move(merged);
    if (intervals_.empty()) throw DomainError("IntervalUnion: empty set");
  }

  LineSlice slice(const Rational& a, const Rational& b) const override {
    LineSlice out;
    for (const auto& [lo, hi] : intervals_) {
      if (hi < a || lo > b) continue;
      const Rational s = lo > a ? lo : a;
      const Rational e = hi < b ? hi : b;
      if (s == e) {
        out.points.push_back(s);
        out.kind = std::max(out.kind, IntersectionKind::finite);
      } else {
        out.measure += to_double(e - s);
        out.kind = IntersectionKind::positive_length;
      }
    }
    if (out.kind == IntersectionKind::positive_length) out.points.clear();
    return out;
  }

  bool contains(const Rational& x) const override {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), x,
                               [](const Rational& v, const RInterval& iv) { return v < iv.first; });
    if (it == intervals_.begin()) return false;
    --it;
    return x <= it->second;
  }

  std::vector<RInterval> approximant() const override { return intervals_; }
  bool is_simple() const override { return true; }

  Rational measure_at_depth() const override {
    Rational m = 0;
    for (const auto& [a, b] : intervals_) m += b - a;
    return m;
  }
  double limit_measure() const override { return to_double(measure_at_depth()); }
  Rational lower() const override { return intervals_.front().first; }
  Rational upper() const override { return intervals_.back().second; }

  const std::vector<RInterval>& intervals() const { return intervals_; }

 private:
  std::vector<RInterval> intervals_;
};

/// Removal rule for Cantor constructions: fraction of each interval's length
/// removed (as an open middle piece) at level k >= 1.
struct RemovalRule {
  enum class Kind { constant, power, list };
  Kind kind = Kind::constant;
  Rational fraction = rational(1, 3);  // constant
  long base = 4;                        // power: f_k = base^{-k}
  std::vector<Rational> fractions;      // list: f_1..f_m, then f_m repeats

  static RemovalRule constant_rule(Rational f) {
    RemovalRule r;
    r.kind = Kind::constant;
    r.fraction = std::move(f);
    return r;
  }
  static RemovalRule power_rule(long b) {
    RemovalRule r;
    r.kind = Kind::power;
    r.base = b;
    return r;
  }
  static RemovalRule list_rule(std::vector<Rational> fs) {
    RemovalRule r;
    r.kind = Kind::list;
    r.fractions = std::move(fs);
    return r;
  }

  Rational at(int level) const {
    switch (kind) {
      case Kind::constant: return fraction;
      case Kind::power: {
        mpz_class d = 1;
        for (int i = 0; i < level; ++i) d *= base;
        Rational f(mpz_class(1), d);
        f.canonicalize();
        return f;
      }
      case Kind::list: {
        const auto i = static_cast<std::size_t>(level - 1);
        return fractions[std::min(i, fractions.size() - 1)];
      }
    }
    return fraction;
  }

  void validate() const {
    auto check = [](const Rational& f) {
      if (f <= 0 || f >= 1) throw DomainError("removal fraction must lie in (0,1)");
    };
    switch (kind) {
      case Kind::constant: check(fraction); break;
      case Kind::power:
        if (base < 2) throw DomainError("power rule base must be >= 2");
        break;
      case Kind::list:
        if (fractions.empty()) throw DomainError("empty fraction list");
        for (const auto& f : fractions) check(f);
        break;
    }
  }

  /// Product over k > level of (1 - f_k); zero when the removals do not decay.
  double tail_product(int level) const {
    if (kind != Kind::power) return 0.0;
    double p = 1.0;
    for (int k = level + 1; k < level + 200; ++k) {
      const double f = std::pow(static_cast<double>(base), -k);
      if (f < 1e-18) break;
      p *= 1.0 - f;
    }
    return p;
  }
};

/// Limit set of a Cantor construction on a base interval. Slices of
/// non-degenerate intervals are exact for the limit set; point membership is
/// decided at the represented depth.
class CantorLine final : public LineSet {
 public:
  CantorLine(Rational lo, Rational hi, RemovalRule rule, int depth)
      : lo_(std::move(lo)), hi_(std::move(hi)), rule_(std::move(rule)), depth_(depth) {
    if (!(lo_ < hi_)) throw DomainError("Cantor base interval must have positive length");
    if (depth_ < 0) throw DomainError("Cantor depth must be >= 0");
    rule_.validate();
  }

  LineSlice slice(const Rational& a, const Rational& b) const override {
    if (a == b) {
      LineSlice out;
      if (contains(a)) {
        out.kind = IntersectionKind::finite;
        out.points.push_back(a);
      }
      return out;
    }
    LineSlice out;
    walk(a, b, lo_, hi_, 0, out);
    if (out.kind != IntersectionKind::finite) out.points.clear();
    return out;
  }

  bool contains(const Rational& x) const override {
    if (x < lo_ || x > hi_) return false;
    Rational u = lo_, v = hi_;
    for (int k = 1; k <= depth_; ++k) {
      const Rational keep = (1 - rule_.at(k)) * (v - u) / 2;
      if (x <= u + keep) {
        v = u + keep;
      } else if (x >= v - keep) {
        u = v - keep;
      } else {
        return false;
      }
    }
    return true;
  }

  std::vector<RInterval> approximant() const override {
    std::vector<RInterval> cur{{lo_, hi_}};
    for (int k = 1; k <= depth_; ++k) {
      std::vector<RInterval> next;
      next.reserve(cur.size() * 2);
      const Rational f = rule_.at(k);
      for (const auto& [u, v] : cur) {
        const Rational keep = (1 - f) * (v - u) / 2;
        next.emplace_back(u, u + keep);
        next.emplace_back(v - keep, v);
      }
      cur = std::move(next);
    }
    return cur;
  }

  bool is_simple() const override { return false; }

  bool intersects(const Rational& a, const Rational& b) const override { return meets(a, b, lo_, hi_, 0); }

  Rational measure_at_depth() const override {
    Rational m = hi_ - lo_;
    for (int k = 1; k <= depth_; ++k) m *= 1 - rule_.at(k);
    return m;
  }

  double limit_measure() const override {
    return to_double(hi_ - lo_) * level_product(0) * rule_.tail_product(depth_) /
           (depth_ > 0 ? 1.0 : 1.0);
  }

  Rational lower() const override { return lo_; }
  Rational upper() const override { return hi_; }

  const RemovalRule& rule() const { return rule_; }
  int depth() const { return depth_; }

 private:
  // Product of (1 - f_k) for level < k <= depth.
  double level_product(int level) const {
    double p = 1.0;
    for (int k = level + 1; k <= depth_; ++k) p *= 1.0 - to_double(rule_.at(k));
    return p;
  }

  double limit_fraction(int level) const {
    if (rule_.kind != RemovalRule::Kind::power) return 0.0;
    return level < depth_ ? level_product(level) * rule_.tail_product(depth_)
                          : rule_.tail_product(level);
  }

  bool meets(const Rational& a, const Rational& b, const Rational& u, const Rational& v, int level) const {
    if (v < a || u > b) return false;
    if (level == depth_ || (a <= u && v <= b)) return true;
    const Rational keep = (1 - rule_.at(level + 1)) * (v - u) / 2;
    return meets(a, b, u, u + keep, level + 1) || meets(a, b, v - keep, v, level + 1);
  }

  void walk(const Rational& a, const Rational& b, const Rational& u, const Rational& v, int level,
            LineSlice& out) const {
    if (v < a || u > b) return;
    if (a <= u && v <= b) {
      const double m = to_double(v - u) * limit_fraction(level);
      out.measure += m;
      out.kind = std::max(out.kind, m > 0.0 ? IntersectionKind::positive_length
                                            : IntersectionKind::infinite_null_length);
      return;
    }
    if (v == a || u == b) {
      // Endpoints are never removed.
      out.points.push_back(v == a ? v : u);
      out.kind = std::max(out.kind, IntersectionKind::finite);
      return;
    }
    if (level > depth_ + 400) {
      // Pieces this deep carry no measure at double precision.
      if (out.kind >= IntersectionKind::infinite_null_length) return;
      throw UnsupportedError("Cantor slice did not resolve");
    }
    const Rational keep = (1 - rule_.at(level + 1)) * (v - u) / 2;
    walk(a, b, u, u + keep, level + 1, out);
    walk(a, b, v - keep, v, level + 1, out);
  }

  Rational lo_;
  Rational hi_;
  RemovalRule rule_;
  int depth_;
};

}  // namespace exdist::geom
