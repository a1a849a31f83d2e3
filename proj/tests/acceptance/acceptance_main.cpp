// Runs the bundled experiments behind each acceptance criterion and prints
// one pass/fail line per criterion. Exit status is nonzero if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "exdist/experiments.hpp"
#include "oracles.hpp"

namespace ex = exdist::experiments;
using nlohmann::json;

namespace {

std::map<std::string, json> cache;

const json& result(const std::string& name) {
  auto it = cache.find(name);
  if (it == cache.end()) {
    const auto cfg = ex::Config::from_json(*ex::find_config(name));
    std::fprintf(stderr, "running %s ...\n", name.c_str());
    it = cache.emplace(name, ex::run(cfg).results).first;
    std::fprintf(stderr, "  %.1f s\n", it->second["seconds"].get<double>());
  }
  return it->second;
}

bool checks_pass(const json& r) {
  if (!r["invariants"]["ok"].get<bool>()) return false;
  for (const auto& c : r["result"]["checks"])
    if (!c["pass"].get<bool>()) return false;
  return true;
}

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

Verdict ring_modulus() {
  const auto& r = result("annulus-2d");
  const auto& lv = r["result"]["levels"];
  const double exact = oracle::ring_modulus(2, 1.0, std::numbers::e);
  const double e128 = std::fabs(lv[0]["value"].get<double>() - exact) / exact;
  const double e256 = std::fabs(lv[1]["value"].get<double>() - exact) / exact;
  const double t128 = lv[0]["seconds"].get<double>(), t256 = lv[1]["seconds"].get<double>();
  const bool ok = lv[1]["cells"] == 256 && e256 <= 0.10 && e256 < e128 && t128 < 60 && t256 < 60 &&
                  r["invariants"]["ok"].get<bool>();
  return {ok, fmt("err128=%.4f err256=%.4f time=%.1fs/%.1fs", e128, e256, t128, t256)};
}

Verdict reciprocal() {
  const auto& r = result("ring-reciprocal")["result"];
  const double d = r["discrepancy"].get<double>(), b = r["bound"].get<double>();
  return {std::fabs(d) <= b && result("ring-reciprocal")["invariants"]["ok"].get<bool>(),
          fmt("|discrepancy|=%.5f bound=%.3f", std::fabs(d), b)};
}

Verdict square_ring() {
  const auto& r = result("square-ring");
  const double v = r["result"]["levels"][0]["value"].get<double>();
  const double bound = oracle::square_ring_bound(1.0, 4.0) - r["config"]["tol"].get<double>();
  return {v >= bound && r["invariants"]["ok"].get<bool>(), fmt("value=%.4f bound=%.4f", v, bound)};
}

Verdict rectangle() {
  const auto& r = result("rectangle");
  const double v = r["result"]["levels"][0]["value"].get<double>();
  const double want = oracle::rectangle_modulus(2.0, 1.0);
  return {std::fabs(v - want) <= 0.1 * want && r["invariants"]["ok"].get<bool>(), fmt("value=%.4f", v)};
}

Verdict egg_yolk() {
  const auto& r = result("eggyolk-random")["result"];
  bool mono = true;
  for (const auto& [k, v] : r["medians_monotone_in_M"].items()) mono = mono && v.get<bool>();
  const int runs = r["runs"], passed = r["passed"];
  std::string med;
  for (const auto& c : r["combos"])
    med += fmt(" %s/M%g=%.2f", c["map"].get<std::string>().c_str(), c["M"].get<double>(),
               c["median_achieved_M"].get<double>());
  return {runs == 200 && passed == 200 && mono, fmt("%d/%d runs, medians monotone=%s;", passed, runs,
                                                    mono ? "yes" : "no") + med};
}

Verdict point_null() {
  const auto& r = result("point-null");
  const auto& ratios = r["result"]["refinement_ratios"];
  bool ok = ratios.size() == 2 && r["invariants"]["ok"].get<bool>();
  std::string s;
  for (const auto& q : ratios) {
    ok = ok && q.get<double>() <= 0.7;
    s += fmt(" %.3f", q.get<double>());
  }
  return {ok, "ratios per doubling:" + s + " (need <= 0.7)"};
}

Verdict distortion() {
  const auto& r = result("distortion-linear");
  std::string s;
  for (const auto& m : r["result"]["maps"])
    s += fmt(" %s H=[%.4f,%.4f] E=[%.4f,%.4f] probes=%zu", m["map"].get<std::string>().c_str(),
             m["summary"]["H_min"].get<double>(), m["summary"]["H_max"].get<double>(),
             m["summary"]["E_min"].get<double>(), m["summary"]["E_max"].get<double>(), m["probes"].size());
  return {checks_pass(r), s};
}

Verdict ring_qc() {
  const auto& r = result("ring-qc");
  const auto& q = r["result"]["maps"][0]["ring_qc"];
  std::size_t ok_rows = 0;
  for (const auto& row : q["rings"]) ok_rows += row["ok"].get<bool>();
  const double C1 = q["C1"], C2 = q["C2_observed"];
  const double bound = 2.0 * C1 * (1.0 + 2.0 * r["config"]["tol"].get<double>());
  return {checks_pass(r) && ok_rows == 10 && C2 <= bound,
          fmt("rings=%zu C2=%.4f bound=%.4f", ok_rows, C2, bound)};
}

Verdict quasihyperbolic() {
  const auto& r = result("disk-qh");
  const double v = r["result"]["distances"][0]["value"].get<double>();
  const double want = oracle::disk_qh_from_centre(1.0, 0.9);
  const auto& w = r["result"]["whitney"]["report"];
  const bool ok = std::fabs(v - want) <= 0.05 * want && w["all"].get<bool>() && checks_pass(r);
  return {ok, fmt("k=%.5f log10=%.5f whitney %zu/%zu cubes, %zu/%zu pairs", v, want,
                  w["distance_ok"].get<std::size_t>(), w["cubes"].get<std::size_t>(),
                  w["ratio_ok"].get<std::size_t>(), w["pairs"].get<std::size_t>())};
}

Verdict shadow_sum() {
  const auto& d = result("shadow-disk")["result"]["shadow_sum"];
  const auto& c = result("shadow-cusp")["result"]["shadow_sum"];
  const double r0 = d["levels"][0]["ratio"], r1 = d["levels"][1]["ratio"];
  const bool disk_ok = std::isfinite(r0) && std::isfinite(r1) && r1 / r0 <= 2.0 && r0 / r1 <= 2.0;
  const double lg = c["lhs_growth"], rg = c["rhs_growth"];
  const bool cusp_ok = std::log(rg) >= 2.0 * std::log(lg);
  return {disk_ok && cusp_ok, fmt("disk ratio %.3f -> %.3f; cusp lhs x%.3f rhs x%.3f", r0, r1, lg, rg)};
}

Verdict cned() {
  const auto& c = result("circle-probe")["result"]["probe"];
  const auto& k = result("cantor-product-probe")["result"]["probe"];
  const double full = c["mod_full"]["value"], avoid = c["mod_avoid"]["value"];
  double b1 = -1.0;
  for (const auto& b : c["mod_budget"])
    if (b["budget"] == 1) b1 = b["value"];
  const bool circle_ok = c["mod_avoid"]["infeasible"].get<bool>() && avoid == 0.0 && b1 >= 0.9 * full;
  const double kfull = k["mod_full"]["value"];
  double kmax = 0.0;
  int kmax_budget = 0;
  for (const auto& b : k["mod_budget"])
    if (b["budget"].get<int>() <= 8) {
      kmax = std::max(kmax, b["value"].get<double>());
      kmax_budget = std::max(kmax_budget, b["budget"].get<int>());
    }
  const bool cantor_ok = kmax_budget == 8 && kmax <= 0.5 * kfull;
  return {circle_ok && cantor_ok && result("circle-probe")["invariants"]["ok"].get<bool>() &&
              result("cantor-product-probe")["invariants"]["ok"].get<bool>(),
          fmt("circle full=%.4f avoid=%.4f budget1=%.4f; cantor full=%.4f max budget(K<=8)=%.4f", full, avoid, b1,
              kfull, kmax)};
}

Verdict translation() {
  const auto& r = result("translation-survey");
  const double m = r["result"]["max_N_times_measure"], b = r["result"]["bound"];
  const bool ok = checks_pass(r) && r["result"]["samples"] == 100000 && m <= b;
  return {ok, fmt("max N m(F_N)=%.4f bound=%.1f", m, b)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"ring modulus reproduction", ring_modulus},
      {"reciprocal additivity of ring moduli", reciprocal},
      {"square-ring lower bound", square_ring},
      {"rectangle modulus", rectangle},
      {"egg-yolk covering property suite", egg_yolk},
      {"point families are modulus-null", point_null},
      {"metric and eccentric distortion", distortion},
      {"ring quasiconformality test", ring_qc},
      {"quasihyperbolic distance and Whitney invariants", quasihyperbolic},
      {"shadow-sum diagnostic", shadow_sum},
      {"negligibility signatures", cned},
      {"translation survey", translation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
