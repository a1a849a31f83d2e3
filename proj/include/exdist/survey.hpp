#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/geom.hpp"
#include "exdist/setmodel.hpp"

namespace exdist::modfam {

/// Measure estimate for F_N = {parameters with at least N intersections}.
struct SurveyRow {
  int N = 0;
  std::size_t hits = 0;
  double measure = 0.0;  // estimated m*(F_N)
  double ci_lo = 0.0;    // 95% Wilson interval, scaled to measure
  double ci_hi = 0.0;
  double n_times_measure() const { return N * measure; }
};

struct SurveyResult {
  std::vector<SurveyRow> rows;
  std::size_t samples = 0;
  double domain_measure = 0.0;  // measure of the sampled parameter region
  std::size_t infinite = 0;     // samples whose intersection is infinite
  double first_bound = 0.0;     // F1 bound: max{ℓ, diam E} diam E (translations), min{r, diam E} (radial)
  double scale = 0.0;           // ℓ(γ) H¹(E) (translations), r^{-1} H¹(E) (radial)

  double max_n_times_measure() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.n_times_measure());
    return m;
  }

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& r : rows)
      t.push_back({{"N", r.N},
                   {"hits", r.hits},
                   {"measure", r.measure},
                   {"ci", {r.ci_lo, r.ci_hi}},
                   {"N_times_measure", r.n_times_measure()}});
    return {{"rows", t},
            {"samples", samples},
            {"domain_measure", domain_measure},
            {"infinite", infinite},
            {"first_bound", first_bound},
            {"scale", scale},
            {"max_N_times_measure", max_n_times_measure()}};
  }
};

namespace detail {

inline std::pair<double, double> wilson(std::size_t k, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  const double z = 1.959963984540054, p = static_cast<double>(k) / n, z2n = z * z / n;
  const double centre = (p + 0.5 * z2n) / (1.0 + z2n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + 0.25 * z2n / n) / (1.0 + z2n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Intersection count of E with a polygonal path; SIZE_MAX when infinite.
inline std::size_t count_hits(const geom::SetModel& e, const std::vector<Vec2>& path) {
  geom::SegmentHit total;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) total.merge(e.intersect_segment(path[i], path[i + 1]));
  if (total.kind == geom::IntersectionKind::empty) return 0;
  if (total.kind != geom::IntersectionKind::finite) return std::numeric_limits<std::size_t>::max();
  return total.count();
}

inline void fill_rows(SurveyResult& res, const std::vector<std::size_t>& counts, int n_max) {
  for (int N = 1; N <= n_max; ++N) {
    SurveyRow row;
    row.N = N;
    for (auto c : counts) row.hits += c >= static_cast<std::size_t>(N);
    const auto [lo, hi] = wilson(row.hits, counts.size());
    row.measure = res.domain_measure * static_cast<double>(row.hits) / counts.size();
    row.ci_lo = res.domain_measure * lo;
    row.ci_hi = res.domain_measure * hi;
    res.rows.push_back(row);
  }
  for (auto c : counts) res.infinite += c == std::numeric_limits<std::size_t>::max();
}

}  // namespace detail

/// Monte Carlo estimate of the measure of translations x with
/// |(γ + x) ∩ E| >= N, N = 1..n_max. Translations are drawn from the box of
/// those x for which γ + x can meet the bounding box of E.
inline SurveyResult translation_survey(const geom::SetModel& e, const geom::PolyCurve<2>& gamma, int n_max,
                                       std::size_t samples, std::uint64_t seed = 1) {
  if (!(gamma.length() > 0.0)) throw DomainError("translation survey needs a non-constant curve");
  if (n_max < 1 || samples == 0) throw DomainError("translation survey needs N_max >= 1 and samples >= 1");
  SurveyResult res;
  res.samples = samples;
  const Box<2> eb = e.bounds();
  Box<2> gb = Box<2>::empty();
  for (const auto& v : gamma.vertices()) gb.expand(v);
  const Vec2 lo{eb.lo[0] - gb.hi[0], eb.lo[1] - gb.hi[1]};
  const Vec2 hi{eb.hi[0] - gb.lo[0], eb.hi[1] - gb.lo[1]};
  res.domain_measure = (hi[0] - lo[0]) * (hi[1] - lo[1]);
  const double diam = e.diameter();
  res.first_bound = std::max(gamma.length(), diam) * diam;
  res.scale = gamma.length() * e.codim1_measure();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo[0], hi[0]), uy(lo[1], hi[1]);
  std::vector<std::size_t> counts(samples);
  std::vector<Vec2> path(gamma.vertices().size());
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec2 x{ux(rng), uy(rng)};
    for (std::size_t i = 0; i < path.size(); ++i) path[i] = gamma.vertices()[i] + x;
    counts[k] = detail::count_hits(e, path);
  }
  detail::fill_rows(res, counts, n_max);
  return res;
}

/// Monte Carlo estimate of the arc measure of directions w ∈ S¹ for which the
/// segment {x + t w : r <= t <= R} meets E at least N times.
inline SurveyResult radial_survey(const geom::SetModel& e, const Vec2& x, double r, double R, int n_max,
                                  std::size_t samples, std::uint64_t seed = 1) {
  if (!(r > 0.0 && r < R)) throw DomainError("radial survey needs 0 < r < R");
  if (n_max < 1 || samples == 0) throw DomainError("radial survey needs N_max >= 1 and samples >= 1");
  SurveyResult res;
  res.samples = samples;
  res.domain_measure = 2.0 * std::numbers::pi;
  res.first_bound = std::min(r, e.diameter());
  res.scale = e.codim1_measure() / r;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, 2.0 * std::numbers::pi);
  std::vector<std::size_t> counts(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = ut(rng);
    const Vec2 w{std::cos(t), std::sin(t)};
    counts[k] = detail::count_hits(e, {x + r * w, x + R * w});
  }
  detail::fill_rows(res, counts, n_max);
  return res;
}

}  // namespace exdist::modfam
