#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/content.hpp"
#include "exdist/cover.hpp"
#include "exdist/distort.hpp"
#include "exdist/io.hpp"
#include "exdist/maps.hpp"
#include "exdist/modfam.hpp"
#include "exdist/qhyp.hpp"
#include "exdist/sets.hpp"
#include "exdist/survey.hpp"

namespace exdist::experiments {

using nlohmann::json;

inline constexpr const char* kSchema = "exdist.results/1";

/// Invalid configuration; `path` names the offending key, e.g. "params.scene.r".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what) : std::runtime_error(what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Typed, validated view of a JSON object inside a config.
class Params {
 public:
  Params(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "'" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& raw() const { return *j_; }

  const json& at(const std::string& key) const {
    if (!has(key)) throw ConfigError(key_path(key), "missing required key '" + key_path(key) + "'");
    return j_->at(key);
  }

  template <class T>
  T req(const std::string& key) const {
    return convert<T>(at(key), key);
  }

  template <class T>
  T get(const std::string& key, const T& fallback) const {
    return has(key) ? convert<T>(j_->at(key), key) : fallback;
  }

  Params sub(const std::string& key) const { return Params(at(key), key_path(key)); }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) throw ConfigError(key_path(it.key()), "unknown key '" + key_path(it.key()) + "'");
    }
  }

  void fail(const std::string& key, const std::string& msg) const { throw ConfigError(key_path(key), msg); }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    const double v = fallback && !has(key) ? *fallback : req<double>(key);
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "'" + key_path(key) + "' must be a positive number");
    return v;
  }

 private:
  template <class T>
  T convert(const json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(key_path(key), "'" + key_path(key) + "' has the wrong type");
    }
  }

  const json* j_;
  std::string path_;
};

struct Config {
  std::string name;
  std::string kind;
  std::string anchor;
  std::optional<std::uint64_t> seed;
  double tol = 1e-2;
  json params = json::object();
  std::filesystem::path base_dir;  // resolves relative file references

  static const std::vector<std::string>& kinds() {
    static const std::vector<std::string> k{"modulus", "covering", "distortion", "quasihyperbolic", "sets-probe",
                                            "survey"};
    return k;
  }

  static bool stochastic(const std::string& kind) { return kind == "covering" || kind == "survey"; }

  static Config from_json(const json& j, std::filesystem::path base = {}) {
    Params p(j, "");
    p.only({"name", "kind", "anchor", "description", "seed", "tol", "params"});
    Config c;
    c.name = p.get<std::string>("name", "unnamed");
    c.kind = p.req<std::string>("kind");
    if (std::find(kinds().begin(), kinds().end(), c.kind) == kinds().end())
      p.fail("kind", "unknown experiment kind '" + c.kind + "'");
    c.anchor = p.get<std::string>("anchor", "");
    if (p.has("seed")) {
      const auto& s = p.at("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        p.fail("seed", "'seed' must be a non-negative integer");
      c.seed = s.get<std::uint64_t>();
    }
    c.tol = p.get<double>("tol", 1e-2);
    if (!(c.tol > 0.0 && c.tol < 1.0)) p.fail("tol", "'tol' must lie in (0, 1)");
    if (p.has("params")) c.params = p.sub("params").raw();
    c.base_dir = std::move(base);
    return c;
  }

  json to_json() const {
    json j = {{"name", name}, {"kind", kind}, {"anchor", anchor}, {"tol", tol}, {"params", params}};
    if (seed) j["seed"] = *seed;
    return j;
  }
};

struct Outcome {
  json results;
  std::string csv;
  std::string svg;
  std::vector<std::string> breaches;  // invariant violations detected during the run
};

namespace detail {

inline double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Vec2 vec2(const Params& p, const std::string& key, std::optional<Vec2> fallback = std::nullopt) {
  if (!p.has(key) && fallback) return *fallback;
  const auto v = p.req<std::vector<double>>(key);
  if (v.size() != 2) p.fail(key, "'" + p.key_path(key) + "' must be a point [x, y]");
  return {v[0], v[1]};
}

inline std::vector<int> int_list(const Params& p, const std::string& key, std::vector<int> fallback = {}) {
  std::vector<int> v = p.has(key) && p.at(key).is_number() ? std::vector<int>{p.req<int>(key)}
                                                            : p.get<std::vector<int>>(key, fallback);
  if (v.empty()) p.fail(key, "'" + p.key_path(key) + "' must not be empty");
  return v;
}

inline json check(const std::string& name, bool pass, json observed, json expected) {
  return {{"name", name}, {"pass", pass}, {"observed", std::move(observed)}, {"expected", std::move(expected)}};
}

// ---------------------------------------------------------------------------
// Scenes

template <int N>
modfam::GridScene<N> make_scene(const Params& sp, int cells, const std::filesystem::path& base) {
  const auto type = sp.req<std::string>("type");
  if (type == "file") {
    sp.only({"type", "path"});
    const auto path = base / sp.req<std::string>("path");
    try {
      return modfam::scene_from_json<N>(json::parse(io::read_file(path)));
    } catch (const json::exception& e) {
      sp.fail("path", "cannot parse scene file " + path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
      sp.fail("path", e.what());
    }
  }
  if (type == "annulus") {
    sp.only({"type", "r", "R", "circle_obstacle"});
    const double r = sp.positive("r"), R = sp.positive("R");
    if (!(r < R)) sp.fail("R", "annulus needs r < R");
    auto s = modfam::annulus_scene<N>(r, R, cells);
    if (sp.has("circle_obstacle")) {
      if constexpr (N == 2)
        modfam::add_circle_obstacle(s, sp.positive("circle_obstacle"));
      else
        sp.fail("circle_obstacle", "circle obstacles are planar only");
    }
    return s;
  }
  if constexpr (N == 2) {
    if (type == "rectangle") {
      sp.only({"type", "length", "width"});
      return modfam::rectangle_scene(sp.positive("length"), sp.positive("width"), cells);
    }
    if (type == "square-ring") {
      sp.only({"type", "r", "R"});
      const double r = sp.positive("r"), R = sp.positive("R");
      if (!(r < R)) sp.fail("R", "square ring needs r < R");
      return modfam::square_ring_scene(r, R, cells);
    }
    if (type == "gap-wall") {
      sp.only({"type", "r", "R"});
      const double r = sp.positive("r"), R = sp.positive("R");
      if (!(r < R)) sp.fail("R", "gap wall needs r < R");
      return modfam::gap_wall_scene(r, R, cells);
    }
  }
  sp.fail("type", "unknown or unsupported scene type '" + type + "'");
  return {};
}

inline modfam::CurveConstraint make_constraint(const Params& p) {
  const auto mode = p.get<std::string>("constraint", "unconstrained");
  if (mode == "unconstrained") return modfam::CurveConstraint::unconstrained();
  if (mode == "avoid") return modfam::CurveConstraint::avoid();
  if (mode == "budget") {
    const int k = p.req<int>("budget");
    if (k < 0) p.fail("budget", "'budget' must be >= 0");
    return modfam::CurveConstraint::with_budget(k);
  }
  p.fail("constraint", "constraint must be unconstrained, avoid or budget");
  return {};
}

/// Block-averaged density heatmap of a planar scene.
inline std::string density_svg(const modfam::GridScene<2>& s, const DensityField<2>& rho) {
  const auto& g = s.grid;
  Box<2> world{g.origin, {g.origin[0] + g.shape[0] * g.h, g.origin[1] + g.shape[1] * g.h}};
  io::Svg svg(world);
  const int block = std::max(1, (std::max(g.shape[0], g.shape[1]) + 127) / 128);
  double top = 0.0;
  for (double v : rho.values) top = std::max(top, v);
  for (int j = 0; j < g.shape[1]; j += block)
    for (int i = 0; i < g.shape[0]; i += block) {
      double sum = 0.0;
      int n = 0, roles[4] = {0, 0, 0, 0};
      for (int b = j; b < std::min(j + block, g.shape[1]); ++b)
        for (int a = i; a < std::min(i + block, g.shape[0]); ++a) {
          const std::size_t c = g.index({a, b});
          sum += rho.values[c];
          ++n;
          ++roles[static_cast<int>(s.role[c])];
        }
      const Box<2> b{{g.origin[0] + i * g.h, g.origin[1] + j * g.h},
                     {g.origin[0] + std::min(i + block, g.shape[0]) * g.h,
                      g.origin[1] + std::min(j + block, g.shape[1]) * g.h}};
      if (roles[2] * 2 > n)
        svg.rect(b, "#d62728");
      else if (roles[3] * 2 > n)
        svg.rect(b, "#2ca02c");
      else if (roles[1] * 2 > n)
        svg.rect(b, io::Svg::ramp(top > 0.0 ? sum / n / top : 0.0));
    }
  return svg.str();
}

// ---------------------------------------------------------------------------
// modulus

template <int N>
json modulus_level(const modfam::GridScene<N>& scene, const modfam::CurveConstraint& c,
                   const modfam::SolverOptions& opts, int cells, Outcome& out, modfam::ModulusResult<N>* keep) {
  auto r = modfam::discrete_modulus(scene, c, opts);
  std::size_t violations = 0;
  if (!r.infeasible) {
    const auto curves = r.witness_curves();
    violations = modfam::admissible_check(r.density, curves, opts.tol).size();
    if (violations) out.breaches.push_back(std::to_string(violations) + " witness paths have rho-length below 1 - tol");
  }
  json j = {{"cells", cells},
            {"value", r.infeasible ? 0.0 : r.value},
            {"lower", r.lower},
            {"gap", r.gap},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"infeasible", r.infeasible},
            {"obstacle_cells", scene.obstacle_count()},
            {"witnesses", r.witnesses.size()},
            {"witness_violations", violations},
            {"seconds", r.seconds}};
  if (keep) *keep = std::move(r);
  return j;
}

template <int N>
void run_modulus_ladder(const Config& cfg, const Params& p, Outcome& out) {
  const auto sp = p.sub("scene");
  const auto cells = int_list(p, "cells");
  const auto constraint = make_constraint(p);
  modfam::SolverOptions opts;
  opts.tol = cfg.tol;
  const auto type = sp.req<std::string>("type");

  io::Csv csv({"cells", "value", "lower", "gap", "iterations", "infeasible"});
  json levels = json::array();
  modfam::ModulusResult<N> finest;
  modfam::GridScene<N> finest_scene;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (cells[k] < 8) p.fail("cells", "grid sizes must be at least 8");
    auto scene = make_scene<N>(sp, cells[k], cfg.base_dir);
    const bool last = k + 1 == cells.size();
    json lvl = modulus_level<N>(scene, constraint, opts, cells[k], out, last ? &finest : nullptr);
    csv.row(cells[k], lvl["value"].get<double>(), lvl["lower"].get<double>(), lvl["gap"].get<double>(),
            lvl["iterations"].get<int>(), lvl["infeasible"].get<bool>());
    levels.push_back(std::move(lvl));
    if (last) finest_scene = std::move(scene);
  }

  json res = {{"dimension", N}, {"constraint", constraint.name()}, {"levels", levels}};
  json checks = json::array();
  const double final_value = levels.back()["value"];
  if (type == "annulus" && !sp.has("circle_obstacle")) {
    const double exact = modfam::ring_modulus_exact(N, sp.req<double>("r"), sp.req<double>("R"));
    json errs = json::array();
    for (const auto& l : levels) errs.push_back((l["value"].get<double>() - exact) / exact);
    res["oracle"] = {{"kind", "analytic ring modulus"}, {"value", exact}};
    res["relative_errors"] = errs;
    checks.push_back(check("within 10% of the ring modulus", std::fabs(errs.back().get<double>()) <= 0.1,
                           errs.back(), 0.1));
    if (errs.size() >= 2) {
      bool dec = true;
      for (std::size_t i = 1; i < errs.size(); ++i)
        dec = dec && std::fabs(errs[i].get<double>()) < std::fabs(errs[i - 1].get<double>());
      checks.push_back(check("error decreases under refinement", dec, errs, "strictly decreasing |error|"));
    }
  } else if (type == "rectangle") {
    const double exact = sp.req<double>("width") / sp.req<double>("length");
    res["oracle"] = {{"kind", "analytic rectangle modulus"}, {"value", exact}};
    res["relative_error"] = (final_value - exact) / exact;
    checks.push_back(check("within 10% of width/length", std::fabs(final_value - exact) <= 0.1 * exact, final_value,
                           exact));
  } else if (type == "square-ring") {
    const double bound = modfam::square_ring_lower_bound(sp.req<double>("r"), sp.req<double>("R"));
    res["oracle"] = {{"kind", "square ring lower bound"}, {"value", bound}};
    checks.push_back(check("at least (1/4) log(R/r) - tol", final_value >= bound - cfg.tol, final_value, bound));
  } else if (type == "gap-wall") {
    json ratios = json::array();
    bool ok = levels.size() >= 2;
    for (std::size_t i = 1; i < levels.size(); ++i) {
      const double prev = levels[i - 1]["value"], cur = levels[i]["value"];
      const double q = prev > 0.0 ? cur / prev : 0.0;
      ratios.push_back(q);
      ok = ok && q <= 0.7;
    }
    res["refinement_ratios"] = ratios;
    checks.push_back(check("value drops by at least 30% per doubling", ok, ratios, "<= 0.7"));
  }
  if (levels.back()["infeasible"].get<bool>()) res["note"] = "empty curve family: modulus 0";
  res["checks"] = checks;
  out.results["result"] = res;
  out.csv = csv.str();
  if constexpr (N == 2)
    if (!finest.infeasible) out.svg = density_svg(finest_scene, finest.density);
}

/// Annulus r < |x| < R split at rho on one shared grid.
inline void run_reciprocal(const Config& cfg, const Params& p, Outcome& out) {
  const double r = p.positive("r"), rho = p.positive("rho"), R = p.positive("R");
  if (!(r < rho && rho < R)) p.fail("rho", "need r < rho < R");
  const int cells = p.req<int>("cells");
  if (cells < 16) p.fail("cells", "'cells' must be at least 16");
  const auto whole = modfam::annulus_scene<2>(r, R, cells);
  auto inner = whole, outer = whole;
  for (std::size_t c = 0; c < whole.grid.size(); ++c) {
    if (whole.role[c] == modfam::CellRole::outside) continue;
    const double t = norm(whole.grid.center(c));
    if (whole.role[c] != modfam::CellRole::f1 && t >= rho) inner.role[c] = modfam::CellRole::f2;
    if (whole.role[c] != modfam::CellRole::f2 && t < rho) outer.role[c] = modfam::CellRole::f1;
  }
  modfam::SolverOptions opts;
  opts.tol = cfg.tol;
  const auto c = modfam::CurveConstraint::unconstrained();
  json parts = json::object();
  io::Csv csv({"part", "value", "lower", "gap", "reciprocal"});
  double v[3];
  const char* names[3] = {"whole", "inner", "outer"};
  const modfam::GridScene<2>* scenes[3] = {&whole, &inner, &outer};
  for (int i = 0; i < 3; ++i) {
    json lvl = modulus_level<2>(*scenes[i], c, opts, cells, out, nullptr);
    v[i] = lvl["value"];
    lvl["reciprocal"] = v[i] > 0.0 ? 2.0 * std::numbers::pi / v[i] : 0.0;
    csv.row(std::string(names[i]), v[i], lvl["lower"].get<double>(), lvl["gap"].get<double>(),
            lvl["reciprocal"].get<double>());
    parts[names[i]] = std::move(lvl);
  }
  const double two_pi = 2.0 * std::numbers::pi;
  const double disc = two_pi / v[0] - two_pi / v[1] - two_pi / v[2];
  out.results["result"] = {
      {"parts", parts},
      {"discrepancy", disc},
      {"bound", 3.0 * cfg.tol},
      {"oracle", {{"kind", "log-additivity of the ring modulus"},
                  {"reciprocals", {std::log(R / r), std::log(rho / r), std::log(R / rho)}}}},
      {"checks", json::array({check("|2pi/md(whole) - 2pi/md(inner) - 2pi/md(outer)| <= 3 tol",
                                    std::fabs(disc) <= 3.0 * cfg.tol, disc, 3.0 * cfg.tol)})}};
  out.csv = csv.str();
}

inline void run_modulus(const Config& cfg, Outcome& out) {
  const Params p(cfg.params, "params");
  const auto study = p.get<std::string>("study", "ladder");
  if (study == "reciprocal") {
    p.only({"study", "r", "rho", "R", "cells"});
    run_reciprocal(cfg, p, out);
    return;
  }
  if (study != "ladder") p.fail("study", "study must be ladder or reciprocal");
  p.only({"study", "scene", "cells", "constraint", "budget", "dimension"});
  const int n = p.get<int>("dimension", 2);
  if (n == 2)
    run_modulus_ladder<2>(cfg, p, out);
  else if (n == 3)
    run_modulus_ladder<3>(cfg, p, out);
  else
    p.fail("dimension", "dimension must be 2 or 3");
}

// ---------------------------------------------------------------------------
// covering

inline std::vector<std::string> string_list(const Params& p, const std::string& key, std::vector<std::string> fb) {
  if (p.has(key) && p.at(key).is_string()) return {p.req<std::string>(key)};
  auto v = p.get<std::vector<std::string>>(key, fb);
  if (v.empty()) p.fail(key, "'" + p.key_path(key) + "' must not be empty");
  return v;
}

inline std::vector<double> double_list(const Params& p, const std::string& key, std::vector<double> fb) {
  if (p.has(key) && p.at(key).is_number()) return {p.req<double>(key)};
  auto v = p.get<std::vector<double>>(key, fb);
  if (v.empty()) p.fail(key, "'" + p.key_path(key) + "' must not be empty");
  return v;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void run_covering(const Config& cfg, Outcome& out) {
  const Params p(cfg.params, "params");
  p.only({"maps", "M", "families_per_combo", "pairs", "lattice", "min_radius", "max_radius"});
  const auto maps = string_list(p, "maps", {"identity"});
  const auto Ms = double_list(p, "M", {4.0});
  const int families = p.get<int>("families_per_combo", 1);
  if (families < 1) p.fail("families_per_combo", "'families_per_combo' must be >= 1");
  cover::RandomFamilyOptions fo;
  fo.pairs = static_cast<std::size_t>(p.get<int>("pairs", 25));
  fo.lattice = p.get<int>("lattice", 129);
  fo.min_radius = p.get<double>("min_radius", fo.min_radius);
  fo.max_radius = p.get<double>("max_radius", fo.max_radius);
  if (fo.pairs < 1) p.fail("pairs", "'pairs' must be >= 1");
  for (double M : Ms)
    if (!(M >= 2.0)) p.fail("M", "egg-yolk constants must be >= 2");
  std::vector<PlaneMap> fmaps;
  for (const auto& m : maps) {
    try {
      fmaps.push_back(plane_map(m));
    } catch (const DomainError& e) {
      p.fail("maps", e.what());
    }
    if (!fmaps.back().linear) p.fail("maps", "covering families need a linear map, got '" + m + "'");
  }

  const std::uint64_t seed = *cfg.seed;
  io::Csv csv({"map", "M", "family", "seed", "pairs_in", "pairs_out", "achieved_M", "achieved_M_range",
               "union_equal", "image_correspondence", "domain_yolks_disjoint", "range_yolks_disjoint"});
  json combos = json::array(), skipped = json::array();
  std::size_t runs = 0, passed = 0;
  bool agg[4] = {true, true, true, true};
  json example;
  std::map<std::string, std::vector<std::pair<double, double>>> medians;  // map -> (M, median)
  std::size_t combo_index = 0;
  for (double M : Ms)
    for (const auto& f : fmaps) {
      ++combo_index;
      if (2.0 * f.sigma_max > M * f.sigma_min) {
        skipped.push_back({{"map", f.name}, {"M", M}, {"reason", "no disk family is M-egg-yolk on both sides"}});
        continue;
      }
      fo.M = M;
      std::vector<double> achieved;
      std::size_t ok = 0;
      for (int k = 0; k < families; ++k) {
        const std::uint64_t s = seed * 1000003ULL + combo_index * 1000ULL + static_cast<std::uint64_t>(k);
        const auto fam = cover::random_disk_family(f, s, fo);
        cover::CoverResult cr;
        try {
          cr = cover::egg_yolk_cover(fam);
        } catch (const ConsistencyError& e) {
          out.breaches.push_back(std::string("egg-yolk cover: ") + e.what());
          continue;
        }
        const bool all = cr.post.all();
        ++runs;
        passed += all;
        ok += all;
        agg[0] = agg[0] && cr.post.union_equal;
        agg[1] = agg[1] && cr.post.image_correspondence;
        agg[2] = agg[2] && cr.post.domain_yolks_disjoint;
        agg[3] = agg[3] && cr.post.range_yolks_disjoint;
        const double a = std::max(cr.achieved_M, cr.achieved_M_range);
        achieved.push_back(a);
        csv.row(f.name, M, k, static_cast<std::size_t>(s), fam.size(), cr.regions.size(), cr.achieved_M,
                cr.achieved_M_range, cr.post.union_equal, cr.post.image_correspondence, cr.post.domain_yolks_disjoint,
                cr.post.range_yolks_disjoint);
        if (example.is_null()) {
          example = cr.to_json(fam);
          example["map"] = f.name;
          example["M"] = M;
          io::Svg svg(Box<2>{{-0.05, -0.05}, {1.05, 1.05}});
          for (const auto& b : fam.yolks) svg.circle(b.center, b.radius, "#bbbbbb");
          for (std::size_t j = 0; j < cr.yolks.size(); ++j) {
            svg.circle(cr.yolks[j].center, cr.yolks[j].radius, "#1f77b4");
            svg.circle(cr.yolks[j].center, 2.0 * cr.yolks[j].radius, "#1f77b4");
          }
          out.svg = svg.str();
        }
        if (!all) out.breaches.push_back("egg-yolk postcondition violated for " + f.name + " M=" + io::Csv::cell(M));
      }
      const double med = median(achieved);
      medians[f.name].push_back({M, med});
      combos.push_back({{"map", f.name},
                        {"M", M},
                        {"runs", achieved.size()},
                        {"passed", ok},
                        {"median_achieved_M", med},
                        {"max_achieved_M", achieved.empty() ? 0.0 : *std::max_element(achieved.begin(), achieved.end())},
                        {"auxiliary_bound", M * (M + 1.0)}});
    }
  json monotone = json::object();
  bool all_monotone = true;
  for (auto& [name, v] : medians) {
    std::sort(v.begin(), v.end());
    bool mono = true;
    for (std::size_t i = 1; i < v.size(); ++i) mono = mono && v[i].second >= v[i - 1].second;
    monotone[name] = mono;
    all_monotone = all_monotone && mono;
  }
  auto tag = [](bool b) { return b ? "verified" : "violated"; };
  out.results["result"] = {
      {"runs", runs},
      {"passed", passed},
      {"postconditions",
       {{"union_equal", tag(agg[0])},
        {"image_correspondence", tag(agg[1])},
        {"domain_yolks_disjoint", tag(agg[2])},
        {"range_yolks_disjoint", tag(agg[3])}}},
      {"combos", combos},
      {"skipped", skipped},
      {"medians_monotone_in_M", monotone},
      {"example", example},
      {"checks", json::array({check("postconditions hold on every run", runs > 0 && passed == runs, passed, runs),
                              check("median achieved constant monotone in M", all_monotone, monotone, true)})}};
  out.csv = csv.str();
}

// ---------------------------------------------------------------------------
// distortion

inline std::optional<double> expected_H(const PlaneMap& f, const Vec2& x) {
  if (f.linear) return f.sigma_max / f.sigma_min;
  if (f.name == "radial-square" && norm(x) > 0.0) return 2.0;
  return std::nullopt;
}

inline void run_distortion(const Config& cfg, Outcome& out) {
  const Params p(cfg.params, "params");
  p.only({"maps", "domain", "cells", "probes", "probe_box", "ladder", "ecc_radius", "resolution", "rings"});
  const auto maps = string_list(p, "maps", {"identity"});
  const auto dom = p.get<std::vector<double>>("domain", {0.0, 0.0, 1.0, 1.0});
  if (dom.size() != 4 || !(dom[0] < dom[2] && dom[1] < dom[3])) p.fail("domain", "'domain' must be [x0, y0, x1, y1]");
  const Box<2> box{{dom[0], dom[1]}, {dom[2], dom[3]}};
  const int cells = p.get<int>("cells", 128);
  if (cells < 8) p.fail("cells", "'cells' must be at least 8");
  const int probes = p.get<int>("probes", 5);
  if (probes < 0) p.fail("probes", "'probes' must be >= 0");
  const auto pb = p.get<std::vector<double>>("probe_box", {0.3, 0.3, 0.7, 0.7});
  if (pb.size() != 4) p.fail("probe_box", "'probe_box' must be [x0, y0, x1, y1]");
  const auto ladder = p.get<std::vector<double>>("ladder", {0.1, 0.05, 0.03});
  const double ecc_r = p.get<double>("ecc_radius", 0.05);
  distort::EccentricOptions eo;
  eo.resolution = p.get<double>("resolution", eo.resolution);
  if (!(eo.resolution > 0.0)) p.fail("resolution", "'resolution' must be positive");

  io::Csv csv({"map", "x", "y", "H", "E", "E_balls", "E_pullbacks", "H_expected"});
  json per_map = json::array(), checks = json::array();
  std::optional<distort::SampledMap> first;
  for (const auto& name : maps) {
    PlaneMap f;
    try {
      f = plane_map(name);
    } catch (const DomainError& e) {
      p.fail("maps", e.what());
    }
    const auto m = distort::SampledMap::from_function(box, cells, f.f);
    m.validate();
    json rows = json::array();
    double hmin = INFINITY, hmax = 0.0, emin = INFINITY, emax = 0.0;
    bool h_ok = true, e_ok = true;
    for (int a = 0; a < probes; ++a)
      for (int b = 0; b < probes; ++b) {
        const double s = probes == 1 ? 0.5 : static_cast<double>(a) / (probes - 1);
        const double t = probes == 1 ? 0.5 : static_cast<double>(b) / (probes - 1);
        const Vec2 x{pb[0] + s * (pb[2] - pb[0]), pb[1] + t * (pb[3] - pb[1])};
        distort::DistortionProbe pr;
        distort::EccentricEstimate ee;
        try {
          pr = distort::metric_distortion(m, x, ladder);
          ee = distort::eccentric_distortion(m, x, ecc_r, eo);
        } catch (const DomainError& e) {
          p.fail("probe_box", std::string("probe point rejected: ") + e.what());
        }
        const auto hx = expected_H(f, x);
        hmin = std::min(hmin, pr.H);
        hmax = std::max(hmax, pr.H);
        emin = std::min(emin, ee.value);
        emax = std::max(emax, ee.value);
        if (hx) {
          h_ok = h_ok && std::fabs(pr.H - *hx) <= 0.05 * *hx;
          e_ok = e_ok && ee.value <= *hx * 1.05;
        }
        rows.push_back({{"x", x}, {"metric", pr.to_json()}, {"eccentric", ee.to_json()}});
        csv.row(name, x[0], x[1], pr.H, ee.value, ee.balls, ee.pullbacks, hx ? *hx : NAN);
      }
    json mj = {{"map", name}, {"probes", rows}};
    if (!rows.empty()) mj["summary"] = {{"H_min", hmin}, {"H_max", hmax}, {"E_min", emin}, {"E_max", emax}};
    const auto hx = expected_H(f, {0.5, 0.5});
    if (!rows.empty() && hx && f.linear) {
      mj["oracle"] = {{"kind", "singular value ratio"}, {"H", *hx}};
      checks.push_back(check(name + ": H within 5% at every probe", h_ok, json::array({hmin, hmax}), *hx));
      checks.push_back(check(name + ": eccentric estimate <= H + 5% at every probe", e_ok, emax, *hx * 1.05));
    }
    if (p.has("rings")) {
      const auto rp = p.sub("rings");
      rp.only({"count", "center", "outer", "factor", "ratio", "cells_short_side", "C1"});
      const int count = rp.get<int>("count", 10);
      const Vec2 c = vec2(rp, "center", Vec2{0.5, 0.5});
      const double outer = rp.positive("outer", 0.4), factor = rp.positive("factor", 0.8);
      const double ratio = rp.get<double>("ratio", std::numbers::e);
      if (!(ratio > 1.0)) rp.fail("ratio", "'ratio' must exceed 1");
      if (count < 1) rp.fail("count", "'count' must be >= 1");
      std::vector<distort::Ring> rings;
      for (int k = 0; k < count; ++k) {
        const double R = outer * std::pow(factor, k);
        rings.push_back({c, R / ratio, R});
      }
      const double C1 = rp.get<double>("C1", modfam::ring_modulus_exact(2, 1.0, ratio));
      modfam::SolverOptions so;
      so.tol = cfg.tol;
      const auto q = distort::ring_qc_test(m, rings, C1, so, rp.get<int>("cells_short_side", 64));
      mj["ring_qc"] = q.to_json();
      for (const auto& row : q.rows)
        if (!row.error.empty()) mj["ring_qc"]["errors"].push_back(row.error);
      if (f.linear) {
        const double K = f.sigma_max / f.sigma_min;
        const double bound = K * C1 * (1.0 + 2.0 * cfg.tol);
        checks.push_back(check(name + ": C2 <= K C1 + 2 tol", q.C2_observed <= bound, q.C2_observed, bound));
      } else {
        json series = json::array();
        bool grows = true;
        for (std::size_t i = 0; i < q.rows.size(); ++i) {
          series.push_back(q.rows[i].image_modulus);
          if (i) grows = grows && q.rows[i].image_modulus >= q.rows[i - 1].image_modulus * (1.0 - cfg.tol);
        }
        mj["ring_qc"]["grows_as_rings_shrink"] = grows;
      }
    }
    per_map.push_back(std::move(mj));
    if (!first) first = m;
  }
  out.results["result"] = {{"maps", per_map}, {"checks", checks}};
  out.csv = csv.str();
  if (first) {
    io::Svg svg(first->image_bounds());
    const int n = 16;
    for (int k = 0; k <= n; ++k) {
      std::vector<Vec2> h, v;
      for (int s = 0; s <= 64; ++s) {
        const double a = static_cast<double>(k) / n, b = static_cast<double>(s) / 64;
        h.push_back((*first)(Vec2{box.lo[0] + b * box.extent(0), box.lo[1] + a * box.extent(1)}));
        v.push_back((*first)(Vec2{box.lo[0] + a * box.extent(0), box.lo[1] + b * box.extent(1)}));
      }
      svg.polyline(h, "#1f77b4");
      svg.polyline(v, "#1f77b4");
    }
    out.svg = svg.str();
  }
}

// ---------------------------------------------------------------------------
// quasihyperbolic

inline qhyp::Domain make_domain(const Params& dp) {
  const auto type = dp.req<std::string>("type");
  if (type == "disk") {
    dp.only({"type", "center", "radius", "samples"});
    return qhyp::Domain::disk(vec2(dp, "center", Vec2{0.0, 0.0}), dp.positive("radius", 1.0),
                              dp.get<int>("samples", 512));
  }
  if (type == "square") {
    dp.only({"type", "lo", "hi"});
    return qhyp::Domain::square(vec2(dp, "lo", Vec2{0.0, 0.0}), vec2(dp, "hi", Vec2{1.0, 1.0}));
  }
  if (type == "cusp") {
    dp.only({"type", "rate", "samples"});
    return qhyp::Domain::cusp(dp.positive("rate", 8.0), dp.get<int>("samples", 400));
  }
  if (type == "polygon") {
    dp.only({"type", "loops"});
    try {
      return qhyp::Domain::from_json(dp.raw());
    } catch (const std::exception& e) {
      dp.fail("loops", std::string("invalid polygon domain: ") + e.what());
    }
  }
  dp.fail("type", "unknown domain type '" + type + "'");
  return {};
}

inline void run_quasihyperbolic(const Config& cfg, Outcome& out) {
  const Params p(cfg.params, "params");
  p.only({"domain", "distances", "spacing", "symmetry", "whitney_depth", "x0", "shadow_depths"});
  const auto dp = p.sub("domain");
  const auto d = make_domain(dp);
  json res = {{"domain", dp.raw()}}, checks = json::array();
  io::Csv csv({"level", "i", "j", "x0", "y0", "side", "dist", "s"});

  const double h = p.get<double>("spacing", 1.0 / 128);
  if (!(h > 0.0)) p.fail("spacing", "'spacing' must be positive");
  json dists = json::array();
  std::vector<Vec2> geodesic;
  if (p.has("distances")) {
    const auto& arr = p.at("distances");
    if (!arr.is_array()) p.fail("distances", "'distances' must be a list of point pairs");
    for (const auto& pair : arr) {
      Vec2 a, b;
      try {
        a = pair.at(0).get<Vec2>();
        b = pair.at(1).get<Vec2>();
      } catch (const json::exception&) {
        p.fail("distances", "each distance entry must be [[x1, y1], [x2, y2]]");
      }
      if (!d.contains(a) || !d.contains(b)) p.fail("distances", "distance endpoints must be interior points");
      const auto t0 = std::chrono::steady_clock::now();
      const auto q = qhyp::qh_distance(d, a, b, h);
      json e = {{"x1", a}, {"x2", b}, {"value", q.value}, {"infeasible", q.infeasible}, {"seconds", since(t0)}};
      if (p.get<bool>("symmetry", false)) {
        const double back = qhyp::qh_distance(d, b, a, h).value;
        e["reverse"] = back;
        checks.push_back(check("qh distance symmetric", back == q.value, back, q.value));
      }
      if (dp.req<std::string>("type") == "disk") {
        const Vec2 c = vec2(dp, "center", Vec2{0.0, 0.0});
        const double R = dp.get<double>("radius", 1.0);
        if (a == c || b == c) {
          const double t = distance<2>(a == c ? b : a, c);
          const double exact = std::log(R / (R - t));
          e["oracle"] = {{"kind", "radial integral of 1/(R - t)"}, {"value", exact}};
          e["relative_error"] = exact > 0.0 ? (q.value - exact) / exact : 0.0;
          checks.push_back(
              check("qh distance within 5% of log(R/(R-|x|))", std::fabs(q.value - exact) <= 0.05 * exact, q.value, exact));
        }
      }
      if (geodesic.empty()) geodesic = q.geodesic.vertices();
      dists.push_back(std::move(e));
    }
  }
  res["distances"] = dists;

  std::optional<qhyp::WhitneyDecomposition> w;
  if (p.has("whitney_depth")) {
    const int depth = p.req<int>("whitney_depth");
    if (depth < 1 || depth > 14) p.fail("whitney_depth", "'whitney_depth' must lie in 1..14");
    w = qhyp::whitney_decompose(d, depth);
    const auto rep = w->verify(d);
    json lc = json::array();
    for (auto c : w->level_counts()) lc.push_back(c);
    res["whitney"] = {{"depth", depth}, {"report", rep.to_json()}, {"level_counts", lc}};
    checks.push_back(check("Whitney invariants hold for every cube and adjacent pair", rep.all(),
                           json::array({rep.distance_ok, rep.ratio_ok}), json::array({rep.cubes, rep.pairs})));
    if (!rep.all()) out.breaches.push_back("Whitney invariant violated");
    std::vector<double> s(w->cubes().size(), NAN);
    if (p.has("x0")) {
      const Vec2 x0 = vec2(p, "x0");
      if (!d.contains(x0)) p.fail("x0", "'x0' must be interior");
      const auto sh = qhyp::shadows(d, *w, x0);
      double smax = 0.0, leaf_ratio = 0.0;
      const double bd = d.boundary_diameter();
      bool bounded = true;
      for (std::size_t k = 0; k < sh.records.size(); ++k) {
        s[k] = sh.records[k].s;
        smax = std::max(smax, s[k]);
        bounded = bounded && s[k] <= bd * (1.0 + 1e-12);
        const auto& q = w->cubes()[k];
        if (q.level == depth) leaf_ratio = std::max(leaf_ratio, s[k] / q.side);
      }
      res["shadows"] = {{"x0", x0},
                        {"boundary_samples", sh.boundary.size()},
                        {"root_s", sh.records[sh.root].s},
                        {"root_samples", sh.records[sh.root].samples.size()},
                        {"boundary_diameter", bd},
                        {"max_s", smax},
                        {"max_s_over_side_finest", leaf_ratio}};
      checks.push_back(check("s(Q) <= diam of the boundary", bounded, smax, bd));
    }
    for (std::size_t k = 0; k < w->cubes().size(); ++k) {
      const auto& q = w->cubes()[k];
      csv.row(q.level, static_cast<long>(q.i), static_cast<long>(q.j), q.box.lo[0], q.box.lo[1], q.side, q.dist, s[k]);
    }
    Box<2> world = d.bounds();
    io::Svg svg(world);
    double smax = 0.0;
    for (double v : s)
      if (std::isfinite(v)) smax = std::max(smax, v);
    for (std::size_t k = 0; k < w->cubes().size(); ++k)
      svg.rect(w->cubes()[k].box, std::isfinite(s[k]) && smax > 0 ? io::Svg::ramp(s[k] / smax) : "#ffffff", "#888888");
    for (const auto& l : d.loops) svg.polyline(l, "#000000", true);
    if (!geodesic.empty()) svg.polyline(geodesic, "#d62728");
    out.svg = svg.str();
  }

  if (p.has("shadow_depths")) {
    const auto depths = int_list(p, "shadow_depths");
    for (int dd : depths)
      if (dd < 1 || dd > 12) p.fail("shadow_depths", "shadow depths must lie in 1..12");
    const Vec2 x0 = vec2(p, "x0");
    if (!d.contains(x0)) p.fail("x0", "'x0' must be interior");
    const auto t0 = std::chrono::steady_clock::now();
    const auto ss = qhyp::shadow_sum_diagnostic(d, x0, depths);
    json sj = ss.to_json();
    sj["seconds"] = since(t0);
    if (ss.levels.size() >= 2) {
      const auto& a = ss.levels[ss.levels.size() - 2];
      const auto& b = ss.levels.back();
      sj["lhs_growth"] = b.lhs / a.lhs;
      sj["rhs_growth"] = b.rhs / a.rhs;
      sj["ratio_change"] = b.ratio() / a.ratio();
    }
    res["shadow_sum"] = sj;
    if (!w) {
      io::Csv t({"depth", "spacing", "cubes", "lhs", "rhs", "ratio"});
      for (const auto& l : ss.levels) t.row(l.depth, l.spacing, l.cubes, l.lhs, l.rhs, l.ratio());
      csv = t;
    }
  }
  res["checks"] = checks;
  out.results["result"] = res;
  out.csv = csv.str();
}

// ---------------------------------------------------------------------------
// sets

inline geom::SetPtr make_set(const Params& sp) {
  const auto type = sp.req<std::string>("type");
  if (type == "point") {
    sp.only({"type", "at"});
    auto s = std::make_shared<geom::PrimitiveSet>();
    s->add_point(vec2(sp, "at"));
    return s;
  }
  if (type == "circle") {
    sp.only({"type", "center", "radius"});
    auto s = std::make_shared<geom::PrimitiveSet>();
    s->add_circle(vec2(sp, "center", Vec2{0.0, 0.0}), sp.positive("radius"));
    return s;
  }
  if (type == "parallel-segments") {
    sp.only({"type", "count", "spacing", "length", "origin"});
    const int n = sp.get<int>("count", 10);
    if (n < 1) sp.fail("count", "'count' must be >= 1");
    const double gap = sp.positive("spacing", 0.1), len = sp.positive("length", 1.0);
    const Vec2 o = vec2(sp, "origin", Vec2{0.0, 0.0});
    auto s = std::make_shared<geom::PrimitiveSet>();
    for (int i = 0; i < n; ++i) s->add_segment({o[0], o[1] + i * gap}, {o[0] + len, o[1] + i * gap});
    return s;
  }
  if (type == "cantor") {
    sp.only({"type", "rule", "depth", "lo", "hi", "times"});
    const auto rule = sp.get<std::string>("rule", "thirds");
    const int depth = sp.get<int>("depth", 8);
    if (depth < 0 || depth > 24) sp.fail("depth", "'depth' must lie in 0..24");
    Rational lo, hi;
    try {
      lo = rational_from_string(sp.get<std::string>("lo", "0"));
      hi = rational_from_string(sp.get<std::string>("hi", "1"));
    } catch (const std::exception&) {
      sp.fail("lo", "'lo' and 'hi' must be rational strings such as \"1/2\"");
    }
    if (!(lo < hi)) sp.fail("hi", "need lo < hi");
    sets::CantorSpec spec;
    if (rule == "thirds")
      spec = {lo, hi, geom::RemovalRule::constant_rule(rational(1, 3)), depth};
    else if (rule == "fat")
      spec = sets::CantorSpec::fat(depth, lo, hi);
    else
      sp.fail("rule", "rule must be thirds or fat");
    const auto c = sets::make_cantor(spec);
    const auto times = sp.get<std::string>("times", "none");
    if (times == "none") return c;
    if (times == "interval") return sets::product_set(c, sets::make_interval(0, 1));
    if (times == "self") return sets::product_set(c, c);
    sp.fail("times", "times must be none, interval or self");
  }
  if (type == "carpet" || type == "gasket") {
    sp.only({"type", "generation"});
    const int g = sp.get<int>("generation", 3);
    if (g < 0 || g > 6) sp.fail("generation", "'generation' must lie in 0..6");
    return sets::packing_residual(type == "carpet" ? sets::carpet_spec(g) : sets::gasket_spec(g));
  }
  if (type == "model") {
    sp.only({"type", "model"});
    try {
      return geom::set_from_json(sp.at("model"));
    } catch (const std::exception& e) {
      sp.fail("model", std::string("invalid set model: ") + e.what());
    }
  }
  sp.fail("type", "unknown set type '" + type + "'");
  return nullptr;
}

inline void run_sets(const Config& cfg, Outcome& out) {
  const Params p(cfg.params, "params");
  p.only({"set", "probe", "classify", "content"});
  const auto sp = p.sub("set");
  const auto e = make_set(sp);
  json res = {{"set", e->to_json()},
              {"kind", e->kind()},
              {"measure", e->measure()},
              {"diameter", e->diameter()}},
       checks = json::array();
  if (const auto* pr = dynamic_cast<const geom::PackingResidual*>(e.get())) {
    res["exact_area"] = to_string(pr->exact_area());
    res["boundary_intersection_bound"] = pr->boundary_intersection_bound();
  }
  io::Csv csv({"section", "key", "value"});

  if (p.has("probe")) {
    const auto pp = p.sub("probe");
    pp.only({"scene", "cells", "budgets"});
    const int cells = pp.req<int>("cells");
    auto scene = make_scene<2>(pp.sub("scene"), cells, cfg.base_dir);
    const auto budgets = int_list(pp, "budgets", {1});
    for (int k : budgets)
      if (k < 0) pp.fail("budgets", "budgets must be >= 0");
    modfam::SolverOptions so;
    so.tol = cfg.tol;
    const auto r = sets::cned_probe(*e, scene, budgets, so);
    res["probe"] = r.to_json();
    res["probe"]["cells"] = cells;
    checks.push_back(check("avoid <= budget(K) <= budget(K+1) <= full", r.ordered(), r.ordered(), true));
    if (!r.ordered()) out.breaches.push_back("probe ordering violated");
    csv.row(std::string("probe"), std::string("full"), r.full.value);
    csv.row(std::string("probe"), std::string("avoid"), r.avoid.value);
    for (const auto& b : r.budgets) csv.row(std::string("probe"), "budget(" + std::to_string(b.budget) + ")", b.value);
  }
  if (p.has("classify")) {
    json cls = json::array();
    for (const auto& cv : p.at("classify")) {
      std::vector<Vec2> v;
      try {
        v = cv.get<std::vector<Vec2>>();
      } catch (const json::exception&) {
        p.fail("classify", "each curve must be a vertex list [[x, y], ...]");
      }
      if (v.empty()) p.fail("classify", "curves need at least one vertex");
      try {
        const auto c = sets::curve_intersection_class(*e, geom::PolyCurve<2>(v));
        cls.push_back(c.to_json());
        csv.row(std::string("classify"), std::to_string(cls.size() - 1), c.label());
      } catch (const geom::UnsupportedError& ex) {
        cls.push_back({{"class", "unsupported"}, {"error", ex.what()}});
        csv.row(std::string("classify"), std::to_string(cls.size() - 1), std::string("unsupported"));
      }
    }
    res["classify"] = cls;
  }
  if (p.has("content")) {
    const auto cp = p.sub("content");
    cp.only({"s", "deltas", "budget", "normalization"});
    const double s = cp.req<double>("s");
    if (!(s >= 0.0)) cp.fail("s", "'s' must be >= 0");
    const auto deltas = cp.req<std::vector<double>>("deltas");
    const auto budget = static_cast<std::size_t>(cp.get<int>("budget", 50000));
    const auto nm = cp.get<std::string>("normalization", "cube");
    if (nm != "cube" && nm != "ball") cp.fail("normalization", "normalization must be cube or ball");
    const auto norm = nm == "cube" ? geom::ContentNormalization::cube : geom::ContentNormalization::ball;
    json rows = json::array();
    for (double dl : deltas) {
      if (!(dl > 0.0)) cp.fail("deltas", "gauges must be positive");
      const auto c = geom::hausdorff_content(*e, s, dl, budget, norm);
      json r = c.to_json();
      r["delta"] = dl;
      rows.push_back(r);
      csv.row(std::string("content"), io::Csv::cell(dl), c.value);
    }
    res["content"] = {{"s", s}, {"normalization", nm}, {"rows", rows}};
  }
  res["checks"] = checks;
  out.results["result"] = res;
  out.csv = csv.str();
}

// ---------------------------------------------------------------------------
// survey

inline void run_survey(const Config& cfg, Outcome& out) {
  const Params p(cfg.params, "params");
  p.only({"type", "set", "gamma", "n_max", "samples", "x", "r", "R", "factor"});
  const auto e = make_set(p.sub("set"));
  const auto type = p.get<std::string>("type", "translation");
  const int n_max = p.get<int>("n_max", 16);
  const int samples = p.get<int>("samples", 100000);
  const double factor = p.get<double>("factor", 4.0);
  if (n_max < 1) p.fail("n_max", "'n_max' must be >= 1");
  if (samples < 1) p.fail("samples", "'samples' must be >= 1");
  modfam::SurveyResult s;
  if (type == "translation") {
    const geom::PolyCurve<2> gamma(p.req<std::vector<Vec2>>("gamma"));
    if (!(gamma.length() > 0.0)) p.fail("gamma", "'gamma' must be a non-constant curve");
    s = modfam::translation_survey(*e, gamma, n_max, static_cast<std::size_t>(samples), *cfg.seed);
  } else if (type == "radial") {
    const double r = p.positive("r"), R = p.positive("R");
    if (!(r < R)) p.fail("R", "need r < R");
    s = modfam::radial_survey(*e, vec2(p, "x"), r, R, n_max, static_cast<std::size_t>(samples), *cfg.seed);
  } else {
    p.fail("type", "survey type must be translation or radial");
  }
  json res = s.to_json(), checks = json::array();
  res["type"] = type;
  res["factor"] = factor;
  if (std::isfinite(s.scale)) {
    res["bound"] = factor * s.scale;
    checks.push_back(check("max N m(F_N) <= factor x scale", s.max_n_times_measure() <= factor * s.scale,
                           s.max_n_times_measure(), factor * s.scale));
  }
  res["checks"] = checks;
  out.results["result"] = res;
  io::Csv csv({"N", "hits", "measure", "ci_lo", "ci_hi", "N_times_measure"});
  for (const auto& r : s.rows) csv.row(r.N, r.hits, r.measure, r.ci_lo, r.ci_hi, r.n_times_measure());
  out.csv = csv.str();
}

}  // namespace detail

/// Runs one experiment. Throws ConfigError for invalid parameters.
inline Outcome run(const Config& cfg) {
  if (Config::stochastic(cfg.kind) && !cfg.seed) throw ConfigError("seed", "'" + cfg.kind + "' experiments need a seed");
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (cfg.kind == "modulus")
      detail::run_modulus(cfg, out);
    else if (cfg.kind == "covering")
      detail::run_covering(cfg, out);
    else if (cfg.kind == "distortion")
      detail::run_distortion(cfg, out);
    else if (cfg.kind == "quasihyperbolic")
      detail::run_quasihyperbolic(cfg, out);
    else if (cfg.kind == "sets-probe")
      detail::run_sets(cfg, out);
    else if (cfg.kind == "survey")
      detail::run_survey(cfg, out);
    else
      throw ConfigError("kind", "unknown experiment kind '" + cfg.kind + "'");
  } catch (const DomainError& e) {
    throw ConfigError("params", e.what());
  }
  json j = {{"schema", kSchema}, {"config", cfg.to_json()}, {"anchor", cfg.anchor}};
  j["result"] = std::move(out.results["result"]);
  j["invariants"] = {{"ok", out.breaches.empty()}, {"breaches", out.breaches}};
  j["seconds"] = detail::since(t0);
  out.results = std::move(j);
  return out;
}

/// Writes results.json, data.csv, figure.svg (when present) and the
/// timing sidecar timings.json into `dir`.
inline void write(Outcome out, const std::filesystem::path& dir) {
  json timings = io::extract_timings(out.results);
  io::atomic_write(dir / "results.json", out.results.dump(2) + "\n");
  io::atomic_write(dir / "timings.json", timings.dump(2) + "\n");
  io::atomic_write(dir / "data.csv", out.csv);
  if (!out.svg.empty()) io::atomic_write(dir / "figure.svg", out.svg);
}

// ---------------------------------------------------------------------------
// Bundled configurations

inline const std::vector<json>& catalog() {
  static const std::vector<json> c = [] {
    const double e = std::numbers::e;
    std::vector<json> v;
    auto add = [&](const char* name, const char* kind, const char* anchor, const char* desc, json params,
                   std::optional<std::uint64_t> seed = std::nullopt, double tol = 1e-2) {
      json j = {{"name", name}, {"kind", kind}, {"anchor", anchor}, {"description", desc}, {"tol", tol},
                {"params", std::move(params)}};
      if (seed) j["seed"] = *seed;
      v.push_back(std::move(j));
    };
    add("annulus-2d", "modulus", "ring modulus formula",
        "annulus r=1, R=e on 128 and 256 grids against 2 pi (log R/r)^{-1}",
        {{"scene", {{"type", "annulus"}, {"r", 1.0}, {"R", e}}}, {"cells", {128, 256}}});
    add("ring-reciprocal", "modulus", "serial law for nested rings",
        "reciprocal additivity of ring moduli 1-7-49 on one 256 grid",
        {{"study", "reciprocal"}, {"r", 1.0}, {"rho", 7.0}, {"R", 49.0}, {"cells", 256}});
    add("square-ring", "modulus", "square ring lower bound",
        "square ring r=1, R=4 against (1/4) log(R/r)",
        {{"scene", {{"type", "square-ring"}, {"r", 1.0}, {"R", 4.0}}}, {"cells", {128}}});
    add("rectangle", "modulus", "extremal length of a rectangle", "2 x 1 rectangle, short sides joined, against 1/2",
        {{"scene", {{"type", "rectangle"}, {"length", 2.0}, {"width", 1.0}}}, {"cells", {64}}});
    add("eggyolk-random", "covering", "egg-yolk covering",
        "200 random families over M in {2,4,8} and three maps, postconditions and medians",
        {{"maps", {"identity", "diag21", "rotscale"}}, {"M", {2, 4, 8}}, {"families_per_combo", 25}, {"pairs", 25}},
        1);
    add("eggyolk-diag", "covering", "egg-yolk covering", "one family of 30 pairs, M=4, map (x,y) -> (2x,y)",
        {{"maps", "diag21"}, {"M", 4}, {"families_per_combo", 1}, {"pairs", 30}}, 7);
    add("point-null", "modulus", "curves through a point have modulus zero",
        "annulus crossing forced through one gap cell, grids 32, 64, 128",
        {{"scene", {{"type", "gap-wall"}, {"r", 1.0}, {"R", e}}}, {"cells", {32, 64, 128}}, {"constraint", "avoid"}});
    add("distortion-linear", "distortion", "metric and eccentric distortion",
        "H_f and E_f at 25 probes for diag(2,1) and the identity",
        {{"maps", {"diag21", "identity"}}, {"probes", 5}, {"ladder", {0.1, 0.05, 0.03}}, {"ecc_radius", 0.05}});
    add("ring-qc", "distortion", "ring modulus quasiconformality test",
        "image ring moduli under diag(2,1) over 10 rings",
        {{"maps", "diag21"}, {"probes", 0}, {"rings", {{"count", 10}, {"outer", 0.4}, {"factor", 0.8}}}});
    add("cusp-ring-qc", "distortion", "ring modulus quasiconformality test",
        "image ring moduli under a map singular on a segment, rings shrinking onto it",
        {{"maps", "cusp"},
         {"domain", {-1.0, -1.0, 1.0, 1.0}},
         {"cells", 256},
         {"probes", 0},
         {"rings", {{"count", 4}, {"center", {0.0, 0.0}}, {"outer", 0.4}, {"factor", 0.5}, {"C1", 2.0 * std::numbers::pi}}}});
    add("disk-qh", "quasihyperbolic", "quasihyperbolic distance and Whitney cubes",
        "unit disk, centre to (0, 0.9) against log 10, Whitney invariants at depth 8",
        {{"domain", {{"type", "disk"}}},
         {"distances", {{{0.0, 0.0}, {0.0, 0.9}}}},
         {"spacing", 1.0 / 128},
         {"symmetry", true},
         {"whitney_depth", 8},
         {"x0", {0.01, 0.01}}});
    add("shadow-disk", "quasihyperbolic", "shadow sum against the quasihyperbolic integral",
        "unit disk, depths 6 and 7",
        {{"domain", {{"type", "disk"}}}, {"x0", {0.01, 0.01}}, {"shadow_depths", {6, 7}}});
    add("shadow-cusp", "quasihyperbolic", "shadow sum against the quasihyperbolic integral",
        "square with an exponentially thin cusp, depths 6 and 7",
        {{"domain", {{"type", "cusp"}}}, {"x0", {-0.5, 0.01}}, {"shadow_depths", {6, 7}}});
    add("circle-probe", "sets-probe", "countable-intersection negligibility",
        "separating circle in the annulus r=1, R=e: avoid, budget 1 and 2, full",
        {{"set", {{"type", "circle"}, {"center", {0.0, 0.0}}, {"radius", std::sqrt(e)}}},
         {"probe", {{"scene", {{"type", "annulus"}, {"r", 1.0}, {"R", e}}}, {"cells", 128}, {"budgets", {1, 2}}}}});
    add("point-probe", "sets-probe", "countable-intersection negligibility",
        "single point inside the annulus: avoid against full",
        {{"set", {{"type", "point"}, {"at", {std::sqrt(e), 0.013}}}},
         {"probe", {{"scene", {{"type", "annulus"}, {"r", 1.0}, {"R", e}}}, {"cells", 128}, {"budgets", {1}}}}});
    add("cantor-product-probe", "sets-probe", "fat Cantor set times an interval",
        "fat Cantor x [0,1] across a 2 x 1 rectangle at 256 x 128, budgets 1..8",
        {{"set", {{"type", "cantor"}, {"rule", "fat"}, {"depth", 10}, {"lo", "1/2"}, {"hi", "3/2"}, {"times", "interval"}}},
         {"probe", {{"scene", {{"type", "rectangle"}, {"length", 2.0}, {"width", 1.0}}}, {"cells", 128},
                    {"budgets", {1, 2, 3, 4, 5, 6, 7, 8}}}},
         {"classify", {{{0.0, 0.5}, {2.0, 0.5}}, {{0.7, 0.0}, {0.7, 1.0}}, {{1.0, 0.0}, {1.0, 1.0}}}}});
    add("cantor-content", "sets-probe", "Hausdorff content of Cantor products",
        "H^1 content of middle-thirds x middle-thirds over shrinking gauges",
        {{"set", {{"type", "cantor"}, {"rule", "thirds"}, {"depth", 8}, {"times", "self"}}},
         {"content", {{"s", 1.0}, {"deltas", {1.0 / 3, 1.0 / 9, 1.0 / 27}}, {"budget", 50000}}}});
    add("translation-survey", "survey", "translation intersection survey",
        "10 parallel unit segments, vertical unit segment, 1e5 translates, N <= 16",
        {{"type", "translation"},
         {"set", {{"type", "parallel-segments"}, {"count", 10}, {"spacing", 0.1}, {"length", 1.0}}},
         {"gamma", {{0.0, 0.0}, {0.0, 1.0}}},
         {"n_max", 16},
         {"samples", 100000},
         {"factor", 4.0}},
        1);
    add("radial-survey", "survey", "radial intersection survey", "circle of radius (r+R)/2 around the centre",
        {{"type", "radial"},
         {"set", {{"type", "circle"}, {"center", {0.0, 0.0}}, {"radius", 0.55}}},
         {"x", {0.0, 0.0}},
         {"r", 0.1},
         {"R", 1.0},
         {"n_max", 2},
         {"samples", 20000}},
        1);
    add("empty-family", "modulus", "modulus of the empty family",
        "annulus fully separated by a circle, paths must avoid it",
        {{"scene", {{"type", "annulus"}, {"r", 1.0}, {"R", e}, {"circle_obstacle", std::sqrt(e)}}},
         {"cells", {64}},
         {"constraint", "avoid"}});
    return v;
  }();
  return c;
}

inline std::optional<json> find_config(const std::string& name) {
  for (const auto& j : catalog())
    if (j.at("name") == name) return std::optional<json>(std::in_place, j);
  return std::nullopt;
}

}  // namespace exdist::experiments
