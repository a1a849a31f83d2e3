#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace exdist {

/// Thrown when an operation's inputs fall outside its domain of definition.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when paired data (maps, families, correspondences) disagree.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <int N>
using Vec = std::array<double, N>;

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

template <std::size_t N>
constexpr std::array<double, N> operator+(const std::array<double, N>& a, const std::array<double, N>& b) {
  std::array<double, N> r{};
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + b[i];
  return r;
}

template <std::size_t N>
constexpr std::array<double, N> operator-(const std::array<double, N>& a, const std::array<double, N>& b) {
  std::array<double, N> r{};
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] - b[i];
  return r;
}

template <std::size_t N>
constexpr std::array<double, N> operator*(double s, const std::array<double, N>& a) {
  std::array<double, N> r{};
  for (std::size_t i = 0; i < N; ++i) r[i] = s * a[i];
  return r;
}

template <std::size_t N>
constexpr double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t N>
inline double norm(const std::array<double, N>& a) {
  return std::sqrt(dot(a, a));
}

template <std::size_t N>
inline double distance(const std::array<double, N>& a, const std::array<double, N>& b) {
  return norm<N>(a - b);
}

template <std::size_t N>
constexpr double distance2(const std::array<double, N>& a, const std::array<double, N>& b) {
  const std::array<double, N> d = a - b;
  return dot(d, d);
}

template <std::size_t N>
constexpr std::array<double, N> lerp(const std::array<double, N>& a, const std::array<double, N>& b, double t) {
  std::array<double, N> r{};
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + t * (b[i] - a[i]);
  return r;
}

/// Area of the unit sphere S^{n-1}: 2*pi for n = 2, 4*pi for n = 3.
inline double unit_sphere_area(int n) {
  switch (n) {
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default:
      return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
  }
}

/// Distance from p to the closed segment [a, b].
template <std::size_t N>
inline double point_segment_distance(const std::array<double, N>& p, const std::array<double, N>& a, const std::array<double, N>& b) {
  const std::array<double, N> ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance<N>(p, lerp<N>(a, b, t));
}

/// Distance between closed segments [a0,a1] and [b0,b1].
template <std::size_t N>
inline double segment_segment_distance(const std::array<double, N>& a0, const std::array<double, N>& a1, const std::array<double, N>& b0,
                                       const std::array<double, N>& b1) {
  // Closest points of two segments; degenerate and parallel cases fall back to
  // endpoint projections, which are always among the candidates.
  const std::array<double, N> d1 = a1 - a0;
  const std::array<double, N> d2 = b1 - b0;
  const std::array<double, N> r = a0 - b0;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);
  double best = std::min({point_segment_distance<N>(a0, b0, b1), point_segment_distance<N>(a1, b0, b1),
                          point_segment_distance<N>(b0, a0, a1), point_segment_distance<N>(b1, a0, a1)});
  if (a <= 0.0 || e <= 0.0) return best;
  const double c = dot(d1, r);
  const double b = dot(d1, d2);
  const double denom = a * e - b * b;
  if (denom > 1e-14 * a * e) {
    const double s = (b * f - c * e) / denom;
    const double t = (a * f - b * c) / denom;
    if (s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0) {
      best = std::min(best, distance<N>(lerp<N>(a0, a1, s), lerp<N>(b0, b1, t)));
    }
  }
  return best;
}

/// Axis-aligned box [lo, hi].
template <int N>
struct Box {
  Vec<N> lo{};
  Vec<N> hi{};

  static Box empty() {
    Box b;
    b.lo.fill(std::numeric_limits<double>::infinity());
    b.hi.fill(-std::numeric_limits<double>::infinity());
    return b;
  }

  bool is_empty() const { return lo[0] > hi[0]; }

  void expand(const Vec<N>& p) {
    for (int i = 0; i < N; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }

  Vec<N> center() const { return 0.5 * (lo + hi); }

  double extent(int i) const { return hi[i] - lo[i]; }

  double diameter() const { return is_empty() ? 0.0 : distance<N>(lo, hi); }

  bool contains(const Vec<N>& p) const {
    for (int i = 0; i < N; ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }
};

}  // namespace exdist
