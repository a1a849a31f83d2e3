#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "exdist/vec.hpp"

namespace exdist {

using Index = std::array<int, 3>;

/// Axis-aligned cell grid: cell i covers origin + h*[i, i+1).
template <int N>
struct Grid {
  Vec<N> origin{};
  double h = 1.0;
  std::array<int, N> shape{};

  std::size_t size() const {
    std::size_t s = 1;
    for (int i = 0; i < N; ++i) s *= static_cast<std::size_t>(shape[i]);
    return s;
  }

  std::size_t index(const std::array<int, N>& c) const {
    std::size_t k = 0;
    for (int i = N - 1; i >= 0; --i) k = k * static_cast<std::size_t>(shape[i]) + static_cast<std::size_t>(c[i]);
    return k;
  }

  std::array<int, N> coords(std::size_t k) const {
    std::array<int, N> c{};
    for (int i = 0; i < N; ++i) {
      c[i] = static_cast<int>(k % static_cast<std::size_t>(shape[i]));
      k /= static_cast<std::size_t>(shape[i]);
    }
    return c;
  }

  bool inside(const std::array<int, N>& c) const {
    for (int i = 0; i < N; ++i)
      if (c[i] < 0 || c[i] >= shape[i]) return false;
    return true;
  }

  Vec<N> center(std::size_t k) const {
    const auto c = coords(k);
    Vec<N> p{};
    for (int i = 0; i < N; ++i) p[i] = origin[i] + (c[i] + 0.5) * h;
    return p;
  }

  Box<N> cell_box(std::size_t k) const {
    const auto c = coords(k);
    Box<N> b;
    for (int i = 0; i < N; ++i) {
      b.lo[i] = origin[i] + c[i] * h;
      b.hi[i] = origin[i] + (c[i] + 1) * h;
    }
    return b;
  }

  /// Cell containing p (half-open convention); false when p is outside the grid.
  bool locate(const Vec<N>& p, std::array<int, N>& c) const {
    for (int i = 0; i < N; ++i) {
      c[i] = static_cast<int>(std::floor((p[i] - origin[i]) / h));
      if (c[i] == shape[i] && p[i] == origin[i] + shape[i] * h) c[i] = shape[i] - 1;
    }
    return inside(c);
  }

  double cell_volume() const { return std::pow(h, N); }

  /// Square grid of `cells` per side covering the cube [lo, hi]^N.
  static Grid cube(double lo, double hi, int cells) {
    Grid g;
    g.origin.fill(lo);
    g.h = (hi - lo) / cells;
    g.shape.fill(cells);
    return g;
  }

  bool operator==(const Grid&) const = default;
};

/// Nonnegative piecewise-constant density on a grid, with exponent p.
template <int N>
struct DensityField {
  Grid<N> grid;
  std::vector<double> values;
  double exponent = N;

  DensityField() = default;
  DensityField(Grid<N> g, double fill, double p = N)
      : grid(std::move(g)), values(grid.size(), fill), exponent(p) {}

  /// Density at p; zero outside the grid.
  double at(const Vec<N>& p) const {
    std::array<int, N> c;
    if (!grid.locate(p, c)) return 0.0;
    return values[grid.index(c)];
  }

  double energy() const {
    double s = 0.0;
    for (double v : values) s += std::pow(v, exponent);
    return s * grid.cell_volume();
  }

  void validate() const {
    if (values.size() != grid.size()) throw DomainError("density size does not match grid");
    for (double v : values)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("density must be finite and nonnegative");
  }
};

/// Neighbour offsets of the full Moore stencil (8 in 2D, 26 in 3D).
template <int N>
std::vector<std::array<int, N>> moore_offsets() {
  std::vector<std::array<int, N>> out;
  std::array<int, N> o{};
  const int total = N == 2 ? 9 : 27;
  for (int k = 0; k < total; ++k) {
    int m = k;
    bool zero = true;
    for (int i = 0; i < N; ++i) {
      o[i] = m % 3 - 1;
      m /= 3;
      if (o[i] != 0) zero = false;
    }
    if (!zero) out.push_back(o);
  }
  return out;
}

}  // namespace exdist
