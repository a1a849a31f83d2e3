#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/geom.hpp"
#include "exdist/modfam.hpp"
#include "exdist/setmodel.hpp"

namespace exdist::sets {

using geom::IntersectionKind;
using geom::PolyCurve;
using geom::RemovalRule;
using geom::SegmentHit;
using geom::SetPtr;

struct CantorSpec {
  Rational lo = 0;
  Rational hi = 1;
  RemovalRule rule = RemovalRule::constant_rule(rational(1, 3));
  int depth = 0;

  static CantorSpec middle_thirds(int depth) { return {0, 1, RemovalRule::constant_rule(rational(1, 3)), depth}; }
  /// Removes the fraction 4^{-k} at level k; the limit has positive length.
  static CantorSpec fat(int depth, Rational lo = 0, Rational hi = 1) {
    return {std::move(lo), std::move(hi), RemovalRule::power_rule(4), depth};
  }

  nlohmann::json to_json() const {
    return geom::lineset_to_json(geom::CantorLine(lo, hi, rule, depth));
  }
};

/// Cantor set on the line with exact interval bookkeeping.
inline std::shared_ptr<const geom::LineSetModel> make_cantor(const CantorSpec& spec) {
  return std::make_shared<const geom::LineSetModel>(
      std::make_shared<const geom::CantorLine>(spec.lo, spec.hi, spec.rule, spec.depth));
}

/// Closed interval [a, b] (a point when a = b) as a set on the line.
inline std::shared_ptr<const geom::LineSetModel> make_interval(const Rational& a, const Rational& b) {
  return std::make_shared<const geom::LineSetModel>(
      std::make_shared<const geom::IntervalUnion>(std::vector<geom::RInterval>{{a, b}}));
}

/// Planar product G x F of two sets on the line.
inline SetPtr product_set(const SetPtr& g, const SetPtr& f) {
  const auto* lg = dynamic_cast<const geom::LineSetModel*>(g.get());
  const auto* lf = dynamic_cast<const geom::LineSetModel*>(f.get());
  if (!lg || !lf) throw DomainError("product_set needs two sets on the line");
  return std::make_shared<const geom::ProductSet>(lg->line_ptr(), lf->line_ptr());
}

struct PackingSpec {
  geom::RPolygon outer;
  std::vector<geom::RPolygon> packed;
};

/// Closure of the outer region minus the packed open regions. Overlapping
/// packed regions raise DomainError.
inline std::shared_ptr<const geom::PackingResidual> packing_residual(const PackingSpec& spec) {
  return std::make_shared<const geom::PackingResidual>(spec.outer, spec.packed);
}

inline geom::RPolygon rect(const Rational& x0, const Rational& y0, const Rational& x1, const Rational& y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

/// Carpet of the given generation on [0,1]^2: at each generation the open
/// middle ninth of every remaining square is removed.
inline PackingSpec carpet_spec(int generation) {
  if (generation < 0) throw DomainError("generation must be >= 0");
  PackingSpec spec{rect(0, 0, 1, 1), {}};
  struct Sq {
    Rational x, y, s;
  };
  std::vector<Sq> cur{{0, 0, 1}};
  for (int g = 0; g < generation; ++g) {
    std::vector<Sq> next;
    for (const auto& q : cur) {
      const Rational t = q.s / 3;
      spec.packed.push_back(rect(q.x + t, q.y + t, q.x + 2 * t, q.y + 2 * t));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (i != 1 || j != 1) next.push_back({q.x + i * t, q.y + j * t, t});
    }
    cur = std::move(next);
  }
  return spec;
}

/// Gasket of the given generation in the triangle (0,0), (1,0), (1/2,1):
/// every remaining triangle loses its open middle (midpoint) triangle.
inline PackingSpec gasket_spec(int generation) {
  if (generation < 0) throw DomainError("generation must be >= 0");
  const geom::RPolygon base{{0, 0}, {1, 0}, {rational(1, 2), 1}};
  PackingSpec spec{base, {}};
  std::vector<geom::RPolygon> cur{base};
  auto mid = [](const RPoint& a, const RPoint& b) { return RPoint{(a.x + b.x) / 2, (a.y + b.y) / 2}; };
  for (int g = 0; g < generation; ++g) {
    std::vector<geom::RPolygon> next;
    for (const auto& t : cur) {
      const RPoint ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      spec.packed.push_back({ab, bc, ca});
      next.push_back({t[0], ab, ca});
      next.push_back({ab, t[1], bc});
      next.push_back({ca, bc, t[2]});
    }
    cur = std::move(next);
  }
  return spec;
}

struct IntersectionClass {
  IntersectionKind kind = IntersectionKind::empty;
  std::size_t count = 0;  // distinct points in the finite case
  double length = 0.0;
  std::vector<SegmentHit> segments;

  std::string label() const { return geom::to_string(kind); }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& h : segments) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : h.points) pts.push_back({p[0], p[1]});
      per.push_back({{"class", geom::to_string(h.kind)}, {"length", h.length}, {"points", pts}});
    }
    return {{"class", label()}, {"count", count}, {"length", length}, {"segments", per}};
  }
};

/// Exact per-segment classification of |γ| ∩ E, aggregated over γ.
inline IntersectionClass curve_intersection_class(const geom::SetModel& e, const PolyCurve<2>& gamma) {
  IntersectionClass out;
  SegmentHit total;
  const auto& v = gamma.vertices();
  if (v.size() == 1) {
    SegmentHit h;
    if (e.contains(v[0])) {
      h.kind = IntersectionKind::finite;
      h.points.push_back(v[0]);
    }
    out.segments.push_back(h);
    total.merge(h);
  }
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    SegmentHit h = e.intersect_segment(v[i], v[i + 1]);
    out.segments.push_back(h);
    total.merge(h);
  }
  out.kind = total.kind;
  out.length = total.length;
  out.count = out.kind == IntersectionKind::finite ? total.count() : 0;
  return out;
}

/// Marks the open cells whose closed square meets E as obstacles. Returns the
/// number of F1/F2 cells that meet E.
inline std::size_t rasterize(const geom::SetModel& e, modfam::GridScene<2>& scene) {
  std::size_t flagged = 0;
  for (std::size_t c = 0; c < scene.grid.size(); ++c) {
    if (scene.role[c] == modfam::CellRole::outside) continue;
    if (!e.intersects_box(scene.grid.cell_box(c))) continue;
    if (scene.role[c] == modfam::CellRole::open)
      scene.obstacle[c] = 1;
    else
      ++flagged;
  }
  return flagged;
}

struct ProbeEntry {
  std::string mode;
  int budget = -1;
  double value = 0.0;
  double lower = 0.0;
  bool infeasible = false;
  double seconds = 0.0;
};

struct ProbeResult {
  ProbeEntry full;
  ProbeEntry avoid;
  std::vector<ProbeEntry> budgets;
  std::size_t obstacle_cells = 0;
  std::size_t flagged_boundary_cells = 0;
  double tol = 0.0;

  double ratio(const ProbeEntry& e) const { return full.value > 0.0 ? e.value / full.value : 0.0; }

  /// avoid <= budget(K) <= budget(K+1) <= full, each step with slack 2·tol·full.
  bool ordered() const {
    const double slack = 2.0 * tol * full.value;
    double prev = avoid.value;
    for (const auto& b : budgets) {
      if (b.value < prev - slack) return false;
      prev = b.value;
    }
    return prev <= full.value + slack;
  }

  nlohmann::json to_json() const {
    auto one = [&](const ProbeEntry& e) {
      return nlohmann::json{{"mode", e.mode},     {"budget", e.budget},         {"value", e.value},
                            {"lower", e.lower},   {"infeasible", e.infeasible}, {"ratio", ratio(e)},
                            {"seconds", e.seconds}};
    };
    nlohmann::json bs = nlohmann::json::array();
    for (const auto& b : budgets) bs.push_back(one(b));
    return {{"mod_full", one(full)},
            {"mod_avoid", one(avoid)},
            {"mod_budget", bs},
            {"obstacle_cells", obstacle_cells},
            {"flagged_boundary_cells", flagged_boundary_cells},
            {"ordered", ordered()}};
  }
};

/// Discrete moduli of the scene with E rasterised as an obstacle, solved
/// without constraint, avoiding E, and with each crossing budget K.
inline ProbeResult cned_probe(const geom::SetModel& e, modfam::GridScene<2> scene, const std::vector<int>& budgets,
                              const modfam::SolverOptions& opts = {}) {
  ProbeResult res;
  res.tol = opts.tol;
  res.flagged_boundary_cells = rasterize(e, scene);
  res.obstacle_cells = scene.obstacle_count();
  auto solve = [&](const modfam::CurveConstraint& c) {
    const auto r = modfam::discrete_modulus(scene, c, opts);
    ProbeEntry out;
    out.mode = c.mode == modfam::CurveConstraint::Mode::budget ? "budget" : c.name();
    out.budget = c.mode == modfam::CurveConstraint::Mode::budget ? c.budget : -1;
    out.infeasible = r.infeasible;
    out.value = r.infeasible ? 0.0 : r.value;
    out.lower = r.infeasible ? 0.0 : r.lower;
    out.seconds = r.seconds;
    return out;
  };
  res.full = solve(modfam::CurveConstraint::unconstrained());
  res.avoid = solve(modfam::CurveConstraint::avoid());
  for (int k : budgets) res.budgets.push_back(solve(modfam::CurveConstraint::with_budget(k)));
  return res;
}

}  // namespace exdist::sets
