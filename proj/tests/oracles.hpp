#pragma once

// Independent reference values used by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using P2 = std::array<double, 2>;

inline double ring_modulus(int n, double r, double R) {
  const double L = std::log(R / r);
  return n == 2 ? 2.0 * std::numbers::pi / L : 4.0 * std::numbers::pi / (L * L);
}

inline double rectangle_modulus(double length, double width) { return width / length; }

inline double square_ring_bound(double r, double R) { return 0.25 * std::log(R / r); }

/// Quasihyperbolic distance in the disk of radius R from its centre to a
/// point at distance t: the radial integral of 1/(R - s).
inline double disk_qh_from_centre(double R, double t) { return std::log(R / (R - t)); }

inline double middle_thirds_measure(int depth) { return std::pow(2.0 / 3.0, depth); }

/// Length kept by the Cantor construction removing 4^{-k} at level k.
inline double fat_cantor_measure(int depth, double length = 1.0) {
  double m = length;
  for (int k = 1; k <= depth; ++k) m *= 1.0 - std::pow(4.0, -k);
  return m;
}

inline double fat_cantor_limit(double length = 1.0) { return fat_cantor_measure(60, length); }

/// Brute-force eccentricity of a region given by membership and boundary
/// samples: centres on a lattice of the given pitch, ball radii from the
/// boundary samples.
inline double eccentricity(const std::function<bool(const P2&)>& inside, const std::vector<P2>& boundary,
                           double pitch) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& p : boundary) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  double best = 1e300;
  for (double x = x0; x <= x1; x += pitch)
    for (double y = y0; y <= y1; y += pitch) {
      if (!inside({x, y})) continue;
      double lo = 1e300, hi = 0.0;
      for (const auto& p : boundary) {
        const double d = std::hypot(p[0] - x, p[1] - y);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      if (lo > 0.0) best = std::min(best, hi / lo);
    }
  return best;
}

inline std::vector<P2> ellipse_boundary(double a, double b, int n) {
  std::vector<P2> v;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    v.push_back({a * std::cos(t), b * std::sin(t)});
  }
  return v;
}

inline std::vector<P2> rectangle_boundary(double w, double h, int per_side) {
  std::vector<P2> v;
  for (int k = 0; k < per_side; ++k) {
    const double s = static_cast<double>(k) / per_side;
    v.push_back({s * w, 0.0});
    v.push_back({w, s * h});
    v.push_back({w - s * w, h});
    v.push_back({0.0, h - s * h});
  }
  return v;
}

/// Ratio of singular values of the central-difference Jacobian of f at x.
inline double jacobian_distortion(const std::function<P2(const P2&)>& f, const P2& x, double eps = 1e-6) {
  const P2 fxp = f({x[0] + eps, x[1]}), fxm = f({x[0] - eps, x[1]});
  const P2 fyp = f({x[0], x[1] + eps}), fym = f({x[0], x[1] - eps});
  const double a = (fxp[0] - fxm[0]) / (2 * eps), c = (fxp[1] - fxm[1]) / (2 * eps);
  const double b = (fyp[0] - fym[0]) / (2 * eps), d = (fyp[1] - fym[1]) / (2 * eps);
  const double s = a * a + b * b + c * c + d * d, det = std::fabs(a * d - b * c);
  const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * det * det));
  const double smax = std::sqrt(0.5 * (s + disc)), smin = std::sqrt(0.5 * (s - disc));
  return smax / smin;
}

struct Disk {
  P2 c;
  double r;
};

/// Fraction of `samples` points drawn uniformly from the union of `in` that
/// are covered by the union of `cover`.
inline double covered_fraction(const std::vector<Disk>& in, const std::vector<Disk>& cover, int samples,
                               unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, in.size() - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int hit = 0;
  for (int k = 0; k < samples; ++k) {
    const auto& d = in[pick(rng)];
    double x, y;
    do {
      x = u(rng);
      y = u(rng);
    } while (x * x + y * y >= 1.0);
    const P2 p{d.c[0] + d.r * x, d.c[1] + d.r * y};
    for (const auto& q : cover)
      if (std::hypot(p[0] - q.c[0], p[1] - q.c[1]) < q.r) {
        ++hit;
        break;
      }
  }
  return static_cast<double>(hit) / samples;
}

}  // namespace oracle
