#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/setmodel.hpp"

namespace exdist::geom {

/// Normalising constant c(s) in c(s) Σ diam(U_j)^s.
enum class ContentNormalization {
  cube,  // s^{-s/2}: a cube of diameter d has volume c(n) d^n
  ball,  // π^{s/2} / (2^s Γ(s/2 + 1)): volume of a ball of diameter d
};

inline double content_constant(double s, ContentNormalization norm = ContentNormalization::cube) {
  if (s == 0.0) return 1.0;
  if (norm == ContentNormalization::cube) return std::pow(s, -0.5 * s);
  return std::pow(std::numbers::pi, 0.5 * s) / (std::pow(2.0, s) * std::tgamma(0.5 * s + 1.0));
}

struct ContentResult {
  double value = 0.0;
  std::size_t nodes = 0;
  int levels = 0;
  bool truncated = false;  // node budget stopped the refinement

  nlohmann::json to_json() const {
    return {{"value", value}, {"nodes", nodes}, {"levels", levels}, {"truncated", truncated}};
  }
};

/// Upper estimate of the Hausdorff δ-content H^s_δ(E) from covers by dyadic
/// cubes in the dimension of E. The cube tree is refined breadth-first while
/// the node budget allows; each cube then costs the cheaper of itself (when
/// its diameter is below δ) and its children.
inline ContentResult hausdorff_content(const SetModel& set, double s, double delta, std::size_t budget = 200000,
                                       ContentNormalization norm = ContentNormalization::cube) {
  if (!(s >= 0.0)) throw DomainError("content exponent must be >= 0");
  if (!(delta > 0.0)) throw DomainError("content gauge must be > 0");
  ContentResult res;
  const Box<2> bb = set.bounds();
  if (bb.is_empty()) return res;
  const int dim = set.dimension();
  const std::size_t fan = dim == 1 ? 2 : 4;
  const double extent = std::max(bb.extent(0), dim == 2 ? bb.extent(1) : 0.0);
  const double side0 = extent > 0.0 ? std::exp2(std::ceil(std::log2(extent))) : 1.0;
  const double c = content_constant(s, norm);
  const double sqrt_dim = std::sqrt(static_cast<double>(dim));

  struct Node {
    std::int64_t i, j;
    std::uint32_t parent;
  };
  auto cell_box = [&](const Node& n, double side) {
    Box<2> b;
    b.lo = {n.i * side, dim == 2 ? n.j * side : 0.0};
    b.hi = {(n.i + 1) * side, dim == 2 ? (n.j + 1) * side : 0.0};
    return b;
  };

  std::vector<std::vector<Node>> levels(1);
  {
    const auto first = [&](double lo) { return static_cast<std::int64_t>(std::floor(lo / side0)); };
    const auto last = [&](double lo, double hi) {
      return std::max(first(lo), static_cast<std::int64_t>(std::ceil(hi / side0)) - 1);
    };
    const std::int64_t i0 = first(bb.lo[0]), i1 = last(bb.lo[0], bb.hi[0]);
    const std::int64_t j0 = dim == 2 ? first(bb.lo[1]) : 0, j1 = dim == 2 ? last(bb.lo[1], bb.hi[1]) : 0;
    for (std::int64_t i = i0; i <= i1; ++i)
      for (std::int64_t j = j0; j <= j1; ++j) {
        const Node n{i, j, 0};
        if (set.intersects_box(cell_box(n, side0))) levels[0].push_back(n);
      }
  }
  res.nodes = levels[0].size();
  double side = side0;
  while (!levels.back().empty()) {
    const auto& cur = levels.back();
    if (res.nodes + fan * cur.size() > budget) {
      res.truncated = side * sqrt_dim >= delta;
      break;
    }
    const double half = 0.5 * side;
    std::vector<Node> next;
    for (std::uint32_t p = 0; p < cur.size(); ++p)
      for (std::int64_t di = 0; di < 2; ++di)
        for (std::int64_t dj = 0; dj < (dim == 2 ? 2 : 1); ++dj) {
          const Node n{2 * cur[p].i + di, 2 * cur[p].j + dj, p};
          if (set.intersects_box(cell_box(n, half))) next.push_back(n);
        }
    res.nodes += next.size();
    levels.push_back(std::move(next));
    side = half;
  }
  if (levels.back().empty()) levels.pop_back();
  res.levels = static_cast<int>(levels.size());

  // Bottom-up minimum. A cube at or above the gauge counts as its 2^{jd}
  // subcubes of diameter below δ.
  std::vector<double> cost;
  for (int L = static_cast<int>(levels.size()) - 1; L >= 0; --L) {
    const double diam = std::ldexp(side0, -L) * sqrt_dim;
    const int j = diam < delta ? 0 : static_cast<int>(std::floor(std::log2(diam / delta))) + 1;
    const double own = std::ldexp(1.0, j * dim) * c * std::pow(std::ldexp(diam, -j), s);
    std::vector<double> below(levels[L].size(), 0.0);
    std::vector<std::uint8_t> has(levels[L].size(), 0);
    if (L + 1 < static_cast<int>(levels.size()))
      for (std::size_t k = 0; k < levels[L + 1].size(); ++k) {
        below[levels[L + 1][k].parent] += cost[k];
        has[levels[L + 1][k].parent] = 1;
      }
    for (std::size_t k = 0; k < below.size(); ++k) below[k] = has[k] ? std::min(own, below[k]) : own;
    cost = std::move(below);
  }
  for (double v : cost) res.value += v;
  return res;
}

}  // namespace exdist::geom
