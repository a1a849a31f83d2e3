#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/exact.hpp"
#include "exdist/geom.hpp"
#include "exdist/maps.hpp"

namespace exdist::cover {

using geom::Ball;

/// Exact test that two open balls are disjoint: |c1 - c2| >= r1 + r2.
template <int N>
bool balls_disjoint(const Ball<N>& a, const Ball<N>& b) {
  Rational d2 = 0;
  for (int i = 0; i < N; ++i) {
    const Rational d = exact(a.center[i]) - exact(b.center[i]);
    d2 += d * d;
  }
  const Rational s = exact(a.radius) + exact(b.radius);
  return d2 >= s * s;
}

/// Greedy disjoint subfamily by decreasing radius (ties by index). The
/// 5-fold dilates of the selected balls cover every input ball.
template <int N>
std::vector<std::size_t> five_b_cover(const std::vector<Ball<N>>& balls) {
  std::vector<std::size_t> order(balls.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return balls[a].radius > balls[b].radius; });
  std::vector<std::size_t> chosen;
  for (std::size_t i : order) {
    bool free = true;
    for (std::size_t j : chosen)
      if (!balls_disjoint(balls[i], balls[j])) {
        free = false;
        break;
      }
    if (free) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Sorted list of sample indices.
using IndexSet = std::vector<std::uint32_t>;

namespace detail {

/// Fixed-size bitset over sample indices.
class Bits {
 public:
  Bits() = default;
  explicit Bits(std::size_t n) : words_((n + 63) / 64, 0) {}
  Bits(std::size_t n, const IndexSet& s) : Bits(n) {
    for (auto i : s) words_[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  bool subset_of(const Bits& o) const {
    for (std::size_t k = 0; k < words_.size(); ++k)
      if (words_[k] & ~o.words_[k]) return false;
    return true;
  }
  Bits& operator|=(const Bits& o) {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }
  bool operator==(const Bits& o) const { return words_ == o.words_; }
  IndexSet indices() const {
    IndexSet out;
    for (std::size_t k = 0; k < words_.size(); ++k) {
      std::uint64_t w = words_[k];
      while (w) {
        const int b = __builtin_ctzll(w);
        out.push_back(static_cast<std::uint32_t>(k * 64 + b));
        w &= w - 1;
      }
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> words_;
};

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace detail

/// Diameter of a finite point subset (convex hull, then all hull pairs).
inline double sample_diameter(const std::vector<Vec2>& pts, const IndexSet& s) {
  std::vector<Vec2> p;
  p.reserve(s.size());
  for (auto i : s) p.push_back(pts[i]);
  if (p.size() < 2) return 0.0;
  std::sort(p.begin(), p.end());
  std::vector<Vec2> hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && detail::cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  double d = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) d = std::max(d, distance2<2>(hull[i], hull[j]));
  return std::sqrt(d);
}

/// Indices of the samples lying in the open ball.
inline IndexSet samples_in(const std::vector<Vec2>& pts, const Ball<2>& b) {
  IndexSet out;
  const double r2 = b.radius * b.radius;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (distance2<2>(pts[i], b.center) < r2) out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

/// A sampled region A with a yolk ball B and the claimed constant M.
struct EggYolkPair {
  IndexSet region;
  Ball<2> yolk;
  double M = 2.0;
};

struct EggYolkCertificate {
  bool holds = false;
  double tight_M = std::numeric_limits<double>::infinity();  // least M' with A ⊂ M'B
  bool doubled_yolk_inside = false;  // 2B ⊂ A (also gives B ⊂ 2B ⊂ A)
  bool inside_dilate = false;        // A ⊂ MB
  bool separation = false;           // dist(B, X \ A) >= r(B) when X \ A is nonempty
  bool diameter_chain = false;       // diam B <= 2r(B) <= diam A <= 2M diam B

  nlohmann::json to_json() const {
    return {{"holds", holds},
            {"tight_M", tight_M},
            {"doubled_yolk_inside", doubled_yolk_inside},
            {"inside_dilate", inside_dilate},
            {"separation", separation},
            {"diameter_chain", diameter_chain}};
  }
};

/// Checks B ⊂ 2B ⊂ A ⊂ MB on the sample cloud `pts` (which plays the role of X).
inline EggYolkCertificate validate_egg_yolk(const std::vector<Vec2>& pts, const EggYolkPair& pair) {
  EggYolkCertificate cert;
  if (pair.region.empty() || !(pair.yolk.radius > 0.0)) return cert;
  const double r = pair.yolk.radius;
  detail::Bits in_a(pts.size(), pair.region);
  const IndexSet doubled = samples_in(pts, Ball<2>(pair.yolk.center, 2.0 * r));
  cert.doubled_yolk_inside = detail::Bits(pts.size(), doubled).subset_of(in_a);
  double far = 0.0;
  for (auto i : pair.region) far = std::max(far, distance<2>(pts[i], pair.yolk.center));
  cert.tight_M = far / r;
  cert.inside_dilate = far < pair.M * r || (pair.region.size() == 1 && far == 0.0);
  double gap = std::numeric_limits<double>::infinity();
  bool complement = false;
  for (std::size_t i = 0, k = 0; i < pts.size(); ++i) {
    if (k < pair.region.size() && pair.region[k] == i) {
      ++k;
      continue;
    }
    complement = true;
    gap = std::min(gap, distance<2>(pts[i], pair.yolk.center) - r);
  }
  cert.separation = !complement || gap >= r;
  const double da = sample_diameter(pts, pair.region);
  cert.diameter_chain = !complement || (da >= 2.0 * r * (1.0 - 1e-12) &&
                                        da <= 2.0 * pair.M * r * (1.0 + 1e-12));
  cert.holds = cert.doubled_yolk_inside && cert.inside_dilate;
  return cert;
}

/// Checks B ⊂ 2B ⊂ A ⊂ MB for a region given by its boundary.
inline EggYolkCertificate validate_egg_yolk(const geom::Region<2>& a, const Ball<2>& b, double M) {
  EggYolkCertificate cert;
  const double r = b.radius;
  const double inner = a.contains(b.center) ? a.inner_distance(b.center) : 0.0;
  const double outer = a.outer_distance(b.center);
  cert.tight_M = outer / r;
  cert.doubled_yolk_inside = inner >= 2.0 * r;
  cert.inside_dilate = outer <= M * r;
  cert.separation = inner - r >= r;
  const double da = a.diameter();
  cert.diameter_chain = 2.0 * r <= da * (1.0 + 1e-12) && da <= 2.0 * M * r * (1.0 + 1e-12);
  cert.holds = cert.doubled_yolk_inside && cert.inside_dilate;
  return cert;
}

/// Lower bound 1/(M(M+1)) on diam(A2)/diam(A1) for pairs with meeting yolks
/// and closure of A2 not inside A1.
inline double intersecting_yolk_ratio_bound(double M) { return 1.0 / (M * (M + 1.0)); }

/// Family {(A_i, B_i)} in X and {(A'_i, B'_i)} in Y with A'_i = f(A_i). Regions
/// are index sets over the shared sample indexing: domain[k] ↦ range[k].
struct PairedFamily {
  std::vector<Vec2> domain;
  std::vector<Vec2> range;
  std::vector<IndexSet> regions;
  std::vector<Ball<2>> yolks;
  std::vector<Ball<2>> range_yolks;
  std::vector<IndexSet> range_regions;  // optional explicit A'_i, checked against f(A_i)
  double M = 2.0;

  std::size_t size() const { return regions.size(); }

  /// Throws ConsistencyError when the correspondence is broken.
  void check_correspondence() const {
    if (range.size() != domain.size()) throw ConsistencyError("sampled map: domain and range sizes differ");
    if (yolks.size() != regions.size() || range_yolks.size() != regions.size())
      throw ConsistencyError("paired family: index sets do not coincide");
    struct H {
      std::size_t operator()(const Vec2& p) const {
        return std::hash<double>()(p[0]) * 1000003u ^ std::hash<double>()(p[1]);
      }
    };
    std::unordered_set<Vec2, H> seen;
    for (const auto& p : range)
      if (!seen.insert(p).second) throw ConsistencyError("sampled map is not injective");
    if (!range_regions.empty()) {
      if (range_regions.size() != regions.size()) throw ConsistencyError("paired family: index sets do not coincide");
      for (std::size_t i = 0; i < regions.size(); ++i)
        if (range_regions[i] != regions[i])
          throw ConsistencyError("f(A_" + std::to_string(i) + ") differs from A'_" + std::to_string(i));
    }
    for (const auto& s : regions) {
      if (!std::is_sorted(s.begin(), s.end())) throw ConsistencyError("region index sets must be sorted");
      if (!s.empty() && s.back() >= domain.size()) throw ConsistencyError("region index out of range");
    }
  }

  EggYolkPair pair(std::size_t i) const { return {regions[i], yolks[i], M}; }
  EggYolkPair range_pair(std::size_t i) const { return {regions[i], range_yolks[i], M}; }
};

/// Largest diameter ratio over pairs whose yolks meet, on each side.
struct Comparability {
  double domain = 1.0;
  double range = 1.0;
};

inline Comparability comparability(const PairedFamily& fam) {
  Comparability c;
  std::vector<double> dd(fam.size()), dr(fam.size());
  for (std::size_t i = 0; i < fam.size(); ++i) {
    dd[i] = sample_diameter(fam.domain, fam.regions[i]);
    dr[i] = sample_diameter(fam.range, fam.regions[i]);
  }
  for (std::size_t i = 0; i < fam.size(); ++i)
    for (std::size_t j = i + 1; j < fam.size(); ++j) {
      if (!balls_disjoint(fam.yolks[i], fam.yolks[j]) && dd[i] > 0 && dd[j] > 0)
        c.domain = std::max(c.domain, std::max(dd[i] / dd[j], dd[j] / dd[i]));
      if (!balls_disjoint(fam.range_yolks[i], fam.range_yolks[j]) && dr[i] > 0 && dr[j] > 0)
        c.range = std::max(c.range, std::max(dr[i] / dr[j], dr[j] / dr[i]));
    }
  return c;
}

struct NormalizeResult {
  PairedFamily family;
  std::vector<std::size_t> source;  // input index of each output pair
  Comparability achieved;
  double bound = 0.0;  // M(M+1)
};

/// Finite form of the comparability reduction: each maximal chain of the
/// containment order collapses to its top element, which keeps its own yolks.
inline NormalizeResult normalize_comparable(const PairedFamily& fam) {
  fam.check_correspondence();
  const std::size_t n = fam.size(), ns = fam.domain.size();
  std::vector<detail::Bits> bits;
  for (const auto& s : fam.regions) bits.emplace_back(ns, s);
  NormalizeResult res;
  res.family = fam;
  res.family.regions.clear();
  res.family.yolks.clear();
  res.family.range_yolks.clear();
  res.family.range_regions.clear();
  for (std::size_t i = 0; i < n; ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < n && !dominated; ++j) {
      if (i == j || !bits[i].subset_of(bits[j])) continue;
      // Equal sets: keep the lowest index.
      dominated = !(bits[j].subset_of(bits[i])) || j < i;
    }
    if (dominated) continue;
    res.source.push_back(i);
    res.family.regions.push_back(fam.regions[i]);
    res.family.yolks.push_back(fam.yolks[i]);
    res.family.range_yolks.push_back(fam.range_yolks[i]);
  }
  res.achieved = comparability(res.family);
  res.bound = fam.M * (fam.M + 1.0);
  return res;
}

/// EY6: union of pairs meeting an anchor, paired with the anchor's yolk.
struct ClusterResult {
  IndexSet region;
  double ratio = 0.0;          // a = max diam(A_i) / diam(A_anchor)
  double certified_M = 0.0;    // (2a + 1) M
  EggYolkCertificate certificate;
};

inline ClusterResult cluster_pairs(const std::vector<Vec2>& pts, const std::vector<EggYolkPair>& pairs,
                                   std::size_t anchor) {
  if (anchor >= pairs.size()) throw DomainError("cluster_pairs: anchor out of range");
  detail::Bits acc(pts.size());
  const double d0 = sample_diameter(pts, pairs[anchor].region);
  ClusterResult res;
  double M = 0.0;
  for (const auto& p : pairs) {
    acc |= detail::Bits(pts.size(), p.region);
    res.ratio = std::max(res.ratio, sample_diameter(pts, p.region) / d0);
    M = std::max(M, p.M);
  }
  res.region = acc.indices();
  res.certified_M = (2.0 * res.ratio + 1.0) * M;
  res.certificate = validate_egg_yolk(pts, {res.region, pairs[anchor].yolk, res.certified_M});
  return res;
}

struct CoverPostconditions {
  bool union_equal = false;
  bool image_correspondence = false;
  bool domain_yolks_disjoint = false;
  bool range_yolks_disjoint = false;
  bool all() const { return union_equal && image_correspondence && domain_yolks_disjoint && range_yolks_disjoint; }
  nlohmann::json to_json() const {
    auto v = [](bool b) { return b ? "verified" : "violated"; };
    return {{"union_equal", v(union_equal)},
            {"image_correspondence", v(image_correspondence)},
            {"domain_yolks_disjoint", v(domain_yolks_disjoint)},
            {"range_yolks_disjoint", v(range_yolks_disjoint)}};
  }
};

struct CoverResult {
  std::vector<IndexSet> regions;       // D_j; D'_j is the same index set on the range side
  std::vector<Ball<2>> yolks;          // B_j
  std::vector<Ball<2>> range_yolks;    // B'_j
  std::vector<std::size_t> domain_source;  // input index of B_j
  std::vector<std::size_t> range_source;   // input index of B'_j
  double achieved_M = 0.0;        // largest tight constant over the domain pairs
  double achieved_M_range = 0.0;  // same on the range side
  std::size_t generations = 0;
  CoverPostconditions post;

  nlohmann::json to_json(const PairedFamily& fam) const {
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t j = 0; j < regions.size(); ++j) {
      const auto cd = validate_egg_yolk(fam.domain, {regions[j], yolks[j], achieved_M});
      const auto cr = validate_egg_yolk(fam.range, {regions[j], range_yolks[j], achieved_M_range});
      pairs.push_back({{"yolk", {{"center", yolks[j].center}, {"radius", yolks[j].radius}}},
                       {"range_yolk", {{"center", range_yolks[j].center}, {"radius", range_yolks[j].radius}}},
                       {"samples", regions[j].size()},
                       {"certified_M", cd.tight_M},
                       {"certified_M_range", cr.tight_M}});
    }
    return {{"pairs", pairs},
            {"achieved_M", achieved_M},
            {"achieved_M_range", achieved_M_range},
            {"generations", generations},
            {"postconditions", post.to_json()}};
  }
};

namespace detail {

// One pass of the covering construction. Generations follow the diameters
// on side `gen` and the selected yolks are disjoint on the other side.
struct Pass {
  std::vector<IndexSet> regions;
  std::vector<std::size_t> pick;  // input index whose yolks are kept
  std::size_t generations = 0;
};

inline Pass cover_pass(const std::vector<Vec2>& gen_pts, const std::vector<Vec2>& sel_pts,
                       const std::vector<IndexSet>& regions, const std::vector<Ball<2>>& sel_yolks) {
  const std::size_t n = regions.size(), ns = gen_pts.size();
  std::vector<Bits> bits;
  std::vector<double> dgen(n), dsel(n);
  double L = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    bits.emplace_back(ns, regions[i]);
    dgen[i] = sample_diameter(gen_pts, regions[i]);
    dsel[i] = sample_diameter(sel_pts, regions[i]);
    L = std::max(L, dgen[i]);
  }
  Pass out;
  std::vector<Bits> dsets;
  std::vector<std::uint8_t> absorbed(n, 0);
  auto refresh = [&](const Bits& d) {
    for (std::size_t i = 0; i < n; ++i)
      if (!absorbed[i] && bits[i].subset_of(d)) absorbed[i] = 1;
  };
  for (int m = 1; std::find(absorbed.begin(), absorbed.end(), 0) != absorbed.end(); ++m) {
    const double threshold = std::ldexp(L, -m);
    std::vector<std::size_t> gen;
    for (std::size_t i = 0; i < n; ++i)
      if (!absorbed[i] && (dgen[i] > threshold || m > 1100)) gen.push_back(i);
    std::stable_sort(gen.begin(), gen.end(), [&](std::size_t a, std::size_t b) { return dsel[a] > dsel[b]; });
    for (std::size_t i1 : gen) {
      if (absorbed[i1]) continue;
      Bits d = bits[i1];
      for (std::size_t j = 0; j < n; ++j)
        if (!absorbed[j] && j != i1 && !balls_disjoint(sel_yolks[i1], sel_yolks[j])) d |= bits[j];
      out.pick.push_back(i1);
      out.regions.push_back(d.indices());
      dsets.push_back(d);
      refresh(d);
    }
    out.generations = static_cast<std::size_t>(m);
  }
  return out;
}

}  // namespace detail

/// Egg-yolk covering: clustered pairs (D_j, B_j), (D'_j, B'_j) with
/// ∪D_j = ∪A_i, f(D_j) = D'_j and both yolk families pairwise disjoint.
/// The first pass makes the range yolks disjoint, the second (through the
/// inverse map) the domain yolks; both start from the chain reduction.
inline CoverResult egg_yolk_cover(const PairedFamily& fam) {
  fam.check_correspondence();
  CoverResult res;
  if (fam.size() == 0) {
    res.post = {true, true, true, true};
    return res;
  }
  const NormalizeResult norm1 = normalize_comparable(fam);
  const auto& f1 = norm1.family;
  const auto pass1 = detail::cover_pass(f1.domain, f1.range, f1.regions, f1.range_yolks);

  PairedFamily mid = f1;
  mid.regions = pass1.regions;
  mid.yolks.clear();
  mid.range_yolks.clear();
  std::vector<std::size_t> mid_src;
  for (auto i : pass1.pick) {
    mid.yolks.push_back(f1.yolks[i]);
    mid.range_yolks.push_back(f1.range_yolks[i]);
    mid_src.push_back(norm1.source[i]);
  }
  const NormalizeResult norm2 = normalize_comparable(mid);
  const auto& f2 = norm2.family;
  const auto pass2 = detail::cover_pass(f2.range, f2.domain, f2.regions, f2.yolks);

  for (std::size_t k = 0; k < pass2.pick.size(); ++k) {
    const std::size_t i = pass2.pick[k];
    res.regions.push_back(pass2.regions[k]);
    res.yolks.push_back(f2.yolks[i]);
    res.range_yolks.push_back(f2.range_yolks[i]);
    res.domain_source.push_back(mid_src[norm2.source[i]]);
    res.range_source.push_back(mid_src[norm2.source[i]]);
  }
  res.generations = pass1.generations + pass2.generations;

  // Verification on the samples.
  const std::size_t ns = fam.domain.size();
  detail::Bits in_union(ns), out_union(ns);
  for (const auto& s : fam.regions) in_union |= detail::Bits(ns, s);
  for (const auto& s : res.regions) out_union |= detail::Bits(ns, s);
  res.post.union_equal = in_union == out_union;
  // D'_j must be exactly the image of D_j: the union of the A'_i merged into it.
  res.post.image_correspondence = true;
  for (const auto& d : res.regions) {
    detail::Bits db(ns, d), rebuilt(ns);
    for (const auto& s : fam.regions) {
      detail::Bits sb(ns, s);
      if (sb.subset_of(db)) rebuilt |= sb;
    }
    if (!(rebuilt == db)) res.post.image_correspondence = false;
  }
  res.post.domain_yolks_disjoint = res.post.range_yolks_disjoint = true;
  for (std::size_t a = 0; a < res.regions.size(); ++a)
    for (std::size_t b = a + 1; b < res.regions.size(); ++b) {
      if (!balls_disjoint(res.yolks[a], res.yolks[b])) res.post.domain_yolks_disjoint = false;
      if (!balls_disjoint(res.range_yolks[a], res.range_yolks[b])) res.post.range_yolks_disjoint = false;
    }
  for (std::size_t j = 0; j < res.regions.size(); ++j) {
    const auto cd = validate_egg_yolk(fam.domain, {res.regions[j], res.yolks[j], fam.M});
    const auto cr = validate_egg_yolk(fam.range, {res.regions[j], res.range_yolks[j], fam.M});
    if (!cd.doubled_yolk_inside || !cr.doubled_yolk_inside)
      throw ConsistencyError("egg-yolk cover produced a yolk whose double leaves its region");
    res.achieved_M = std::max(res.achieved_M, cd.tight_M);
    res.achieved_M_range = std::max(res.achieved_M_range, cr.tight_M);
  }
  return res;
}

struct RandomFamilyOptions {
  std::size_t pairs = 25;
  double M = 4.0;
  int lattice = 129;  // samples per side of [0,1]^2
  double min_radius = 0.06;
  double max_radius = 0.15;
};

/// Random family of disks A_i in [0,1]^2 sampled on a lattice, with the
/// concentric yolks drawn so that both (A_i, B_i) and (f(A_i), B'_i) are
/// M-egg-yolk pairs. Needs a linear map with 2 sigma_max <= M sigma_min.
inline PairedFamily random_disk_family(const PlaneMap& f, std::uint64_t seed, const RandomFamilyOptions& o = {}) {
  if (!f.linear) throw DomainError("random family needs a linear map");
  if (!(o.M >= 2.0)) throw DomainError("egg-yolk constant must be >= 2");
  if (2.0 * f.sigma_max > o.M * f.sigma_min * (1.0 + 1e-12))
    throw DomainError("no M-egg-yolk disk family exists for this map and M");
  if (o.lattice < 2 || !(o.min_radius > 0.0 && o.min_radius <= o.max_radius && o.max_radius < 0.5))
    throw DomainError("invalid random family options");
  PairedFamily fam;
  fam.M = o.M;
  const double step = 1.0 / (o.lattice - 1);
  for (int j = 0; j < o.lattice; ++j)
    for (int i = 0; i < o.lattice; ++i) {
      const Vec2 p{i * step, j * step};
      fam.domain.push_back(p);
      fam.range.push_back(f(p));
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (fam.regions.size() < o.pairs) {
    const double R = o.min_radius + (o.max_radius - o.min_radius) * u(rng);
    const Vec2 c{R + (1.0 - 2.0 * R) * u(rng), R + (1.0 - 2.0 * R) * u(rng)};
    IndexSet region = samples_in(fam.domain, Ball<2>(c, R));
    if (region.empty()) continue;
    const double r = R / o.M + (R / 2.0 - R / o.M) * u(rng);
    const double lo = f.sigma_max * R / o.M, hi = f.sigma_min * R / 2.0;
    const double rr = lo + (hi - lo) * u(rng);
    fam.regions.push_back(std::move(region));
    fam.yolks.emplace_back(c, r);
    fam.range_yolks.emplace_back(f(c), rr);
  }
  return fam;
}

}  // namespace exdist::cover
