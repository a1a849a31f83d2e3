#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "exdist/vec.hpp"

namespace exdist {

/// A named self-map of the plane. Linear maps carry their singular values.
struct PlaneMap {
  std::string name;
  std::function<Vec2(const Vec2&)> f;
  bool linear = false;
  double sigma_max = 1.0;
  double sigma_min = 1.0;

  Vec2 operator()(const Vec2& p) const { return f(p); }
};

inline const std::vector<std::string>& plane_map_names() {
  static const std::vector<std::string> names{"identity", "diag21", "rotscale", "radial-square", "cusp"};
  return names;
}

/// identity; diag21: (x, y) -> (2x, y); rotscale: rotation by 0.5 rad scaled
/// by 1.5; radial-square: z -> z|z|; cusp: (x, y) -> (x, sign(y)|y|^{1/2}),
/// which is not quasiconformal near the x-axis.
inline PlaneMap plane_map(const std::string& name) {
  if (name == "identity") return {name, [](const Vec2& p) { return p; }, true, 1.0, 1.0};
  if (name == "diag21") return {name, [](const Vec2& p) { return Vec2{2.0 * p[0], p[1]}; }, true, 2.0, 1.0};
  if (name == "rotscale") {
    const double c = 1.5 * std::cos(0.5), s = 1.5 * std::sin(0.5);
    return {name, [c, s](const Vec2& p) { return Vec2{c * p[0] - s * p[1], s * p[0] + c * p[1]}; }, true, 1.5, 1.5};
  }
  if (name == "radial-square") return {name, [](const Vec2& p) { return norm(p) * p; }};
  if (name == "cusp")
    return {name, [](const Vec2& p) { return Vec2{p[0], std::copysign(std::sqrt(std::fabs(p[1])), p[1])}; }};
  throw DomainError("unknown map '" + name + "'");
}

}  // namespace exdist
