#pragma once

#include <gmpxx.h>

#include <cmath>
#include <string>

#include "exdist/vec.hpp"

namespace exdist {

/// Exact rational number. Every finite double converts exactly.
using Rational = mpq_class;

inline Rational exact(double v) {
  if (!std::isfinite(v)) throw DomainError("exact(): non-finite value");
  Rational r(v);
  r.canonicalize();
  return r;
}

inline Rational rational(long num, long den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline double to_double(const Rational& r) { return r.get_d(); }

inline std::string to_string(const Rational& r) { return r.get_str(); }

inline Rational rational_from_string(const std::string& s) {
  Rational r(s);
  r.canonicalize();
  return r;
}

inline int sign(const Rational& r) { return sgn(r); }

struct RPoint {
  Rational x;
  Rational y;
};

inline RPoint exact(const Vec2& p) { return {exact(p[0]), exact(p[1])}; }

/// Twice the signed area of triangle (a, b, c).
inline Rational orient(const RPoint& a, const RPoint& b, const RPoint& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Sign of the orientation of (a, b, c) with a floating-point filter and an exact fallback.
inline int orient_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double l = (b[0] - a[0]) * (c[1] - a[1]);
  const double r = (b[1] - a[1]) * (c[0] - a[0]);
  const double det = l - r;
  const double bound = 1e-14 * (std::fabs(l) + std::fabs(r));
  if (det > bound) return 1;
  if (det < -bound) return -1;
  return sgn(orient(exact(a), exact(b), exact(c)));
}

}  // namespace exdist
