#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <numbers>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "exdist/geom.hpp"
#include "exdist/grid.hpp"

namespace exdist::modfam {

using geom::PolyCurve;

enum class CellRole : std::uint8_t { outside = 0, open = 1, f1 = 2, f2 = 3 };

/// Cell scene Γ(F1, F2; U) on a grid, with an optional obstacle mask E.
template <int N>
struct GridScene {
  Grid<N> grid;
  std::vector<CellRole> role;
  std::vector<std::uint8_t> obstacle;
  double exponent = N;

  GridScene() = default;
  explicit GridScene(Grid<N> g)
      : grid(std::move(g)), role(grid.size(), CellRole::outside), obstacle(grid.size(), 0) {}

  std::size_t count(CellRole r) const { return static_cast<std::size_t>(std::count(role.begin(), role.end(), r)); }

  std::size_t obstacle_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < role.size(); ++i) n += (obstacle[i] && role[i] == CellRole::open);
    return n;
  }

  /// Throws DomainError unless F1, F2 are nonempty, connected and not adjacent.
  void validate() const {
    if (role.size() != grid.size() || obstacle.size() != grid.size())
      throw DomainError("scene masks do not match the grid");
    if (!(exponent > 1.0)) throw DomainError("exponent must exceed 1");
    const auto offsets = moore_offsets<N>();
    for (CellRole f : {CellRole::f1, CellRole::f2}) {
      std::vector<std::size_t> cells;
      for (std::size_t i = 0; i < role.size(); ++i)
        if (role[i] == f) cells.push_back(i);
      if (cells.empty()) throw DomainError(f == CellRole::f1 ? "F1 is empty" : "F2 is empty");
      std::vector<std::uint8_t> seen(role.size(), 0);
      std::vector<std::size_t> stack{cells.front()};
      seen[cells.front()] = 1;
      std::size_t reached = 0;
      while (!stack.empty()) {
        const std::size_t c = stack.back();
        stack.pop_back();
        ++reached;
        const auto cc = grid.coords(c);
        for (const auto& o : offsets) {
          auto nc = cc;
          for (int i = 0; i < N; ++i) nc[i] += o[i];
          if (!grid.inside(nc)) continue;
          const std::size_t n = grid.index(nc);
          if (role[n] == f && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
          if (f == CellRole::f1 && role[n] == CellRole::f2) throw DomainError("F1 and F2 touch");
        }
      }
      if (reached != cells.size()) throw DomainError(f == CellRole::f1 ? "F1 is not connected" : "F2 is not connected");
    }
  }
};

struct CurveConstraint {
  enum class Mode { unconstrained, avoid, budget };
  Mode mode = Mode::unconstrained;
  int budget = 0;

  static CurveConstraint unconstrained() { return {}; }
  static CurveConstraint avoid() { return {Mode::avoid, 0}; }
  static CurveConstraint with_budget(int k) {
    if (k < 0) throw DomainError("crossing budget must be >= 0");
    return {Mode::budget, k};
  }

  /// Number of obstacle cells a path may enter; -1 when obstacles are ignored.
  int limit() const { return mode == Mode::unconstrained ? -1 : (mode == Mode::avoid ? 0 : budget); }

  std::string name() const {
    switch (mode) {
      case Mode::unconstrained: return "unconstrained";
      case Mode::avoid: return "avoid";
      case Mode::budget: return "budget(" + std::to_string(budget) + ")";
    }
    return "?";
  }
};

struct SolverOptions {
  double tol = 1e-2;
  int max_iterations = 5000;  // column-generation rounds
  double time_limit_seconds = 300.0;
  int stencil = 2;            // edges to cells within this max-norm radius
  int paths_per_round = 0;   // 0: one per 16 grid cells, at least 64
  int master_steps = 20000;
};

template <int N>
struct ModulusResult {
  double value = 0.0;  // energy of the returned admissible density
  double lower = 0.0;  // dual lower bound
  double gap = 0.0;    // 1 - lower/value
  int iterations = 0;
  bool infeasible = false;
  bool converged = false;
  double seconds = 0.0;
  DensityField<N> density;
  std::vector<std::vector<std::uint32_t>> witnesses;  // cell sequences F1 -> F2
  std::vector<double> witness_weights;

  std::vector<PolyCurve<N>> witness_curves() const {
    std::vector<PolyCurve<N>> out;
    for (const auto& w : witnesses) {
      std::vector<Vec<N>> v;
      for (auto c : w) v.push_back(density.grid.center(c));
      out.emplace_back(std::move(v));
    }
    return out;
  }
};

/// Conformal modulus of the spherical ring family: ω_{n-1} (log(R/r))^{1-n}.
inline double ring_modulus_exact(int n, double r, double R) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("ring_modulus_exact requires 0 < r < R");
  if (n != 2 && n != 3) throw DomainError("ring_modulus_exact: dimension must be 2 or 3");
  return unit_sphere_area(n) * std::pow(std::log(R / r), 1.0 - n);
}

/// (1/4) log(R/r), the lower bound for the square-ring family.
inline double square_ring_lower_bound(double r, double R) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("square_ring_lower_bound requires 0 < r < R");
  return 0.25 * std::log(R / r);
}

namespace detail {

/// A stencil edge in unit-cell coordinates together with the cells its
/// centre-to-centre segment crosses and the length inside each of them.
template <int N>
struct StencilEdge {
  std::array<int, N> offset{};
  double length = 0.0;
  std::vector<std::pair<std::array<int, N>, double>> pieces;
};

template <int N>
std::vector<StencilEdge<N>> make_stencil(int radius) {
  std::vector<StencilEdge<N>> out;
  std::array<int, N> o{};
  o.fill(-radius);
  while (true) {
    int g = 0;
    for (int i = 0; i < N; ++i) g = std::gcd(g, std::abs(o[i]));
    if (g == 1) {
      StencilEdge<N> e;
      e.offset = o;
      double len2 = 0.0;
      for (int i = 0; i < N; ++i) len2 += double(o[i]) * o[i];
      e.length = std::sqrt(len2);
      std::vector<double> cuts{0.0, 1.0};
      for (int i = 0; i < N; ++i) {
        if (o[i] == 0) continue;
        for (int k = 1; k <= std::abs(o[i]); ++k) cuts.push_back((k - 0.5) / std::abs(o[i]));
      }
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double dt = cuts[k + 1] - cuts[k];
        if (dt <= 1e-12) continue;
        const double tm = 0.5 * (cuts[k] + cuts[k + 1]);
        std::array<int, N> cell{};
        for (int i = 0; i < N; ++i) cell[i] = static_cast<int>(std::floor(0.5 + tm * o[i]));
        if (!e.pieces.empty() && e.pieces.back().first == cell)
          e.pieces.back().second += dt * e.length;
        else
          e.pieces.emplace_back(cell, dt * e.length);
      }
      out.push_back(std::move(e));
    }
    int d = 0;
    while (d < N && ++o[d] > radius) {
      o[d] = -radius;
      ++d;
    }
    if (d == N) break;
  }
  return out;
}

struct SparsePath {
  std::vector<std::uint32_t> cells;
  std::vector<std::pair<std::uint32_t, double>> usage;  // open cell -> length inside it
};

/// Shortest-path searches over states (cell, obstacle cells entered).
template <int N>
class PathSearch {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  PathSearch(const GridScene<N>& scene, int limit, int stencil)
      : scene_(scene), layers_(limit < 0 ? 1 : static_cast<std::size_t>(limit) + 1), limit_(limit) {
    const auto& g = scene.grid;
    std::array<long long, N> stride{};
    long long s = 1;
    for (int i = 0; i < N; ++i) {
      stride[i] = s;
      s *= g.shape[i];
    }
    for (auto& e : make_stencil<N>(stencil)) {
      Edge ed;
      ed.offset = e.offset;
      for (const auto& [c, l] : e.pieces) {
        long long delta = 0;
        for (int i = 0; i < N; ++i) delta += c[i] * stride[i];
        ed.pieces.emplace_back(delta, l * g.h);
      }
      edges_.push_back(std::move(ed));
      by_offset_[key(e.offset)] = edges_.size() - 1;
    }
    // Cells whose whole stencil neighbourhood is open, inside the grid and
    // (when crossings are counted) free of obstacles.
    clear_.assign(g.size(), 0);
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (scene.role[c] != CellRole::open) continue;
      const auto cc = g.coords(c);
      bool ok = true;
      std::array<int, N> o{};
      o.fill(-stencil);
      while (ok) {
        std::array<int, N> nc{};
        for (int i = 0; i < N; ++i) nc[i] = cc[i] + o[i];
        if (!g.inside(nc)) {
          ok = false;
          break;
        }
        const std::size_t n = g.index(nc);
        if (scene.role[n] != CellRole::open || (limit_ >= 0 && scene.obstacle[n])) ok = false;
        int d = 0;
        while (d < N && ++o[d] > stencil) {
          o[d] = -stencil;
          ++d;
        }
        if (d == N) break;
      }
      clear_[c] = ok;
    }
  }

  std::size_t layers() const { return layers_; }
  std::size_t state(std::size_t cell, std::size_t used) const { return cell * layers_ + used; }

  /// Dijkstra from every cell of role `from` (used = 0); cells of role `to`
  /// are terminal and cells of role `from` are never re-entered.
  void run(const std::vector<double>& sigma, CellRole from, CellRole to, std::vector<double>& dist,
           std::vector<std::int64_t>& parent) const {
    const auto& g = scene_.grid;
    dist.assign(g.size() * layers_, kInf);
    parent.assign(g.size() * layers_, -1);
    using Item = std::pair<double, std::int64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t c = 0; c < g.size(); ++c)
      if (scene_.role[c] == from) {
        dist[state(c, 0)] = 0.0;
        heap.push({0.0, static_cast<std::int64_t>(state(c, 0))});
      }
    while (!heap.empty()) {
      const auto [d, s] = heap.top();
      heap.pop();
      if (d > dist[static_cast<std::size_t>(s)]) continue;
      const std::size_t cell = static_cast<std::size_t>(s) / layers_;
      const std::size_t used = static_cast<std::size_t>(s) % layers_;
      if (scene_.role[cell] == to) continue;
      if (clear_[cell]) {
        for (const auto& e : edges_) {
          double cost = 0.0;
          for (const auto& [delta, l] : e.pieces) cost += l * sigma[static_cast<std::size_t>(static_cast<long long>(cell) + delta)];
          const double nd = d + cost;
          const std::size_t ns = state(static_cast<std::size_t>(static_cast<long long>(cell) + e.pieces.back().first), used);
          if (nd < dist[ns]) {
            dist[ns] = nd;
            parent[ns] = s;
            heap.push({nd, static_cast<std::int64_t>(ns)});
          }
        }
        continue;
      }
      const auto cc = g.coords(cell);
      for (const auto& e : edges_) {
        bool ok = true;
        for (int i = 0; i < N; ++i) {
          const int v = cc[i] + e.offset[i];
          if (v < 0 || v >= g.shape[i]) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        const std::size_t n = static_cast<std::size_t>(static_cast<long long>(cell) + e.pieces.back().first);
        const CellRole rn = scene_.role[n];
        if (rn == CellRole::outside || rn == from) continue;
        double cost = 0.0;
        std::size_t nu = used;
        for (std::size_t k = 0; k < e.pieces.size(); ++k) {
          const std::size_t c = static_cast<std::size_t>(static_cast<long long>(cell) + e.pieces[k].first);
          const CellRole rc = scene_.role[c];
          if (k > 0 && k + 1 < e.pieces.size() && rc != CellRole::open) {
            ok = false;
            break;
          }
          if (k > 0 && limit_ >= 0 && rc == CellRole::open && scene_.obstacle[c]) {
            if (++nu > static_cast<std::size_t>(limit_)) {
              ok = false;
              break;
            }
          }
          cost += e.pieces[k].second * sigma[c];
        }
        if (!ok) continue;
        const double nd = d + cost;
        const std::size_t ns = state(n, nu);
        if (nd < dist[ns]) {
          dist[ns] = nd;
          parent[ns] = s;
          heap.push({nd, static_cast<std::int64_t>(ns)});
        }
      }
    }
  }

  /// Cells from the search source to the cell of `s`.
  std::vector<std::uint32_t> trace(std::int64_t s, const std::vector<std::int64_t>& parent) const {
    std::vector<std::uint32_t> path;
    for (; s >= 0; s = parent[static_cast<std::size_t>(s)])
      path.push_back(static_cast<std::uint32_t>(static_cast<std::size_t>(s) / layers_));
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Length spent by a vertex path inside each open cell.
  std::vector<std::pair<std::uint32_t, double>> usage(const std::vector<std::uint32_t>& path) const {
    std::vector<std::pair<std::uint32_t, double>> out;
    const auto& g = scene_.grid;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const auto a = g.coords(path[i]);
      const auto b = g.coords(path[i + 1]);
      std::array<int, N> o{};
      for (int k = 0; k < N; ++k) o[k] = b[k] - a[k];
      const auto it = by_offset_.find(key(o));
      if (it == by_offset_.end()) throw ConsistencyError("path step is not a stencil edge");
      for (const auto& [delta, l] : edges_[it->second].pieces) {
        const auto c = static_cast<std::uint32_t>(static_cast<long long>(path[i]) + delta);
        if (scene_.role[c] == CellRole::open) out.emplace_back(c, l);
      }
    }
    std::sort(out.begin(), out.end());
    std::vector<std::pair<std::uint32_t, double>> merged;
    for (const auto& u : out) {
      if (!merged.empty() && merged.back().first == u.first)
        merged.back().second += u.second;
      else
        merged.push_back(u);
    }
    return merged;
  }

 private:
  struct Edge {
    std::array<int, N> offset{};
    std::vector<std::pair<long long, double>> pieces;
  };
  static long long key(const std::array<int, N>& o) {
    long long k = 0;
    for (int i = 0; i < N; ++i) k = k * 64 + (o[i] + 32);
    return k;
  }

  const GridScene<N>& scene_;
  std::size_t layers_;
  int limit_;
  std::vector<Edge> edges_;
  std::unordered_map<long long, std::size_t> by_offset_;
  std::vector<std::uint8_t> clear_;
};

}  // namespace detail

/// Discrete p-modulus of the grid-path family joining F1 and F2 under a
/// crossing constraint. The dual problem over probability measures on paths,
/// min Q(μ) = Σ_c w^{1-q} η_c^q with η the expected cell usage, is solved by
/// column generation: each round runs one search from F1 and one from F2,
/// adds a batch of improving paths through distinct cells, and re-optimises
/// the path weights with pairwise Frank–Wolfe steps. Every round yields the
/// admissible density σ/d with energy Q/d^p and the lower bound Q^{-(p-1)}.
template <int N>
ModulusResult<N> discrete_modulus(const GridScene<N>& scene, const CurveConstraint& constraint,
                                  const SolverOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw DomainError("tolerance must be positive");
  if (opts.stencil < 1 || opts.stencil > 3) throw DomainError("stencil radius must be 1, 2 or 3");
  scene.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const std::size_t ncell = scene.grid.size();
  const double p = scene.exponent;
  const double q = p / (p - 1.0);
  const double w = scene.grid.cell_volume();
  const double wq = std::pow(w, 1.0 - q);
  const int limit = constraint.limit();
  const int per_round =
      opts.paths_per_round > 0 ? opts.paths_per_round : std::max<int>(64, static_cast<int>(ncell / 16));

  ModulusResult<N> res;
  res.density = DensityField<N>(scene.grid, 0.0, p);

  detail::PathSearch<N> search(scene, limit, opts.stencil);
  const std::size_t layers = search.layers();
  std::vector<double> sigma(ncell, 0.0);
  for (std::size_t c = 0; c < ncell; ++c) sigma[c] = scene.role[c] == CellRole::open ? 1.0 : 0.0;

  std::vector<double> fwd, bwd;
  std::vector<std::int64_t> fpar, bpar;
  std::vector<double> through(ncell);
  std::vector<std::pair<std::size_t, std::size_t>> through_state(ncell);

  // Forward and backward searches; through[c] is the shortest length of a
  // path passing through open cell c.
  auto survey = [&]() -> double {
    search.run(sigma, CellRole::f1, CellRole::f2, fwd, fpar);
    search.run(sigma, CellRole::f2, CellRole::f1, bwd, bpar);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ncell; ++c) {
      through[c] = std::numeric_limits<double>::infinity();
      if (scene.role[c] == CellRole::f2) {
        for (std::size_t k = 0; k < layers; ++k) best = std::min(best, fwd[search.state(c, k)]);
        continue;
      }
      if (scene.role[c] != CellRole::open) continue;
      const std::size_t self = (limit >= 0 && scene.obstacle[c]) ? 1 : 0;
      for (std::size_t k1 = 0; k1 < layers; ++k1) {
        const double a = fwd[search.state(c, k1)];
        if (!std::isfinite(a)) continue;
        for (std::size_t k2 = 0; k2 < layers; ++k2) {
          if (k1 + k2 < self || k1 + k2 - self >= layers) continue;
          const double v = a + bwd[search.state(c, k2)];
          if (v < through[c]) {
            through[c] = v;
            through_state[c] = {k1, k2};
          }
        }
      }
    }
    return best;
  };

  double d = survey();
  if (!std::isfinite(d)) {
    res.infeasible = true;
    res.converged = true;
    res.seconds = elapsed();
    return res;
  }

  std::vector<double> eta(ncell, 0.0);
  std::vector<detail::SparsePath> paths;
  std::vector<double> plen, pw;  // current sigma-length and weight per path
  std::vector<std::vector<std::pair<std::uint32_t, double>>> cell_paths(ncell);
  std::unordered_map<std::uint64_t, std::size_t> known;
  auto sig_of = [&](double e) { return q == 2.0 ? e / w : std::pow(e / w, q - 1.0); };
  auto qterm = [&](double e) { return q == 2.0 ? e * e / w : wq * std::pow(e, q); };
  auto hash = [](const std::vector<std::uint32_t>& cells) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto c : cells) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  };
  auto length_of = [&](const detail::SparsePath& sp) {
    double s = 0.0;
    for (const auto& [c, l] : sp.usage) s += l * sigma[c];
    return s;
  };
  auto add_path = [&](std::vector<std::uint32_t> cells) -> bool {
    const auto h = hash(cells);
    if (known.count(h)) return false;
    detail::SparsePath sp;
    sp.usage = search.usage(cells);
    sp.cells = std::move(cells);
    plen.push_back(length_of(sp));
    pw.push_back(0.0);
    const auto id = static_cast<std::uint32_t>(paths.size());
    for (const auto& [c, l] : sp.usage) cell_paths[c].emplace_back(id, l);
    known[h] = paths.size();
    paths.push_back(std::move(sp));
    return true;
  };
  auto path_through = [&](std::size_t c) {
    const auto [k1, k2] = through_state[c];
    auto head = search.trace(static_cast<std::int64_t>(search.state(c, k1)), fpar);
    auto tail = search.trace(static_cast<std::int64_t>(search.state(c, k2)), bpar);
    tail.pop_back();
    head.insert(head.end(), tail.rbegin(), tail.rend());
    return head;
  };
  auto shortest_path = [&]() {
    std::int64_t goal = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ncell; ++c) {
      if (scene.role[c] != CellRole::f2) continue;
      for (std::size_t k = 0; k < layers; ++k)
        if (fwd[search.state(c, k)] < best) {
          best = fwd[search.state(c, k)];
          goal = static_cast<std::int64_t>(search.state(c, k));
        }
    }
    return search.trace(goal, fpar);
  };
  auto rebuild = [&] {
    std::vector<detail::SparsePath> kept;
    std::vector<double> kept_w;
    for (std::size_t i = 0; i < paths.size(); ++i)
      if (pw[i] > 0.0) {
        kept.push_back(std::move(paths[i]));
        kept_w.push_back(pw[i]);
      }
    paths = std::move(kept);
    pw = std::move(kept_w);
    plen.resize(paths.size());
    known.clear();
    for (auto& cp : cell_paths) cp.clear();
    for (std::size_t i = 0; i < paths.size(); ++i) {
      known[hash(paths[i].cells)] = i;
      plen[i] = length_of(paths[i]);
      for (const auto& [c, l] : paths[i].usage) cell_paths[c].emplace_back(static_cast<std::uint32_t>(i), l);
    }
  };

  // Pairwise step moving weight from path a to path s with exact line search.
  std::vector<double> dir(ncell, 0.0);
  std::vector<std::uint32_t> touched;
  double Q = 0.0;
  auto pairwise = [&](std::size_t s, std::size_t a) {
    touched.clear();
    for (const auto& [c, l] : paths[s].usage) {
      if (dir[c] == 0.0) touched.push_back(c);
      dir[c] += l;
    }
    for (const auto& [c, l] : paths[a].usage) {
      if (dir[c] == 0.0) touched.push_back(c);
      dir[c] -= l;
    }
    const double tmax = pw[a];
    double t = 0.0;
    if (q == 2.0) {
      double den = 0.0;
      for (auto c : touched) den += dir[c] * dir[c];
      den /= w;
      t = den > 0.0 ? std::clamp((plen[a] - plen[s]) / den, 0.0, tmax) : 0.0;
    } else {
      auto deriv = [&](double tt) {
        double g = 0.0;
        for (auto c : touched) g += std::pow(std::max(0.0, eta[c] + tt * dir[c]), q - 1.0) * dir[c];
        return g;
      };
      if (deriv(tmax) <= 0.0) {
        t = tmax;
      } else if (deriv(0.0) < 0.0) {
        double lo = 0.0, hi = tmax;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (deriv(mid) < 0.0 ? lo : hi) = mid;
        }
        t = 0.5 * (lo + hi);
      }
    }
    for (auto c : touched) {
      if (t > 0.0) {
        Q -= qterm(eta[c]);
        eta[c] = std::max(0.0, eta[c] + t * dir[c]);
        Q += qterm(eta[c]);
        const double ns = sig_of(eta[c]);
        const double ds = ns - sigma[c];
        sigma[c] = ns;
        for (const auto& [id, l] : cell_paths[c]) plen[id] += l * ds;
      }
      dir[c] = 0.0;
    }
    pw[s] += t;
    pw[a] = t >= tmax ? 0.0 : pw[a] - t;
    return t;
  };

  std::vector<std::size_t> order;
  std::vector<std::uint8_t> covered(ncell);
  // Adds the shortest path plus shortest paths through not-yet-covered cells
  // with through-length below `bound`.
  auto add_columns = [&](double bound, int cap) {
    int added = add_path(shortest_path()) ? 1 : 0;
    order.clear();
    for (std::size_t c = 0; c < ncell; ++c)
      if (through[c] < bound) order.push_back(c);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return through[a] < through[b] || (through[a] == through[b] && a < b);
    });
    std::fill(covered.begin(), covered.end(), 0);
    for (std::size_t c : order) {
      if (added >= cap) break;
      if (covered[c]) continue;
      auto cells = path_through(c);
      for (auto x : cells) covered[x] = 1;
      if (add_path(std::move(cells))) ++added;
    }
    return added;
  };

  // Initial measure: uniform over Euclidean shortest paths covering the scene.
  add_columns(std::numeric_limits<double>::infinity(), 16 * per_round);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    pw[i] = 1.0 / static_cast<double>(paths.size());
    for (const auto& [c, l] : paths[i].usage) eta[c] += pw[i] * l;
  }
  for (std::size_t c = 0; c < ncell; ++c) {
    if (scene.role[c] == CellRole::open) sigma[c] = sig_of(eta[c]);
    Q += qterm(eta[c]);
  }
  d = survey();

  double best_ratio = -1.0;
  int round = 0;
  for (;; ++round) {
    const double ratio = std::min(1.0, d / Q);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      res.value = Q / std::pow(d, p);
      for (std::size_t c = 0; c < ncell; ++c) res.density.values[c] = sigma[c] / d;
      res.witnesses.clear();
      res.witness_weights.clear();
      for (std::size_t i = 0; i < paths.size(); ++i)
        if (pw[i] > 0.0) {
          res.witnesses.push_back(paths[i].cells);
          res.witness_weights.push_back(pw[i]);
        }
    }
    // The dual bound only improves as Q decreases.
    res.lower = std::max(res.lower, std::pow(Q, -(p - 1.0)));
    res.gap = 1.0 - res.lower / res.value;
    if (res.gap <= opts.tol) {
      res.converged = true;
      break;
    }
    if (round >= opts.max_iterations || elapsed() > opts.time_limit_seconds) break;
#ifdef EXDIST_TRACE
    std::fprintf(stderr, "round %d gap %.5f Q %.6g d %.6g cols %zu t %.2f\n", round, res.gap, Q, d, paths.size(), elapsed());
#endif

    rebuild();
    add_columns(Q, per_round);

    // Re-optimise weights over the current columns.
    const double spread_goal = std::max(0.25 * (Q - d), 0.05 * opts.tol * Q);
    // Each scan pairs the kBatch shortest paths with the kBatch longest loaded ones.
    constexpr int kBatch = 8;
    std::array<std::pair<double, std::size_t>, kBatch> los, his;
    for (int step = 0; step < opts.master_steps;) {
      los.fill({std::numeric_limits<double>::infinity(), 0});
      his.fill({-1.0, 0});
      for (std::size_t i = 0; i < paths.size(); ++i) {
        const double l = plen[i];
        if (l < los.back().first) {
          int k = kBatch - 1;
          for (; k > 0 && los[k - 1].first > l; --k) los[k] = los[k - 1];
          los[k] = {l, i};
        }
        if (pw[i] > 0.0 && l > his.back().first) {
          int k = kBatch - 1;
          for (; k > 0 && his[k - 1].first < l; --k) his[k] = his[k - 1];
          his[k] = {l, i};
        }
      }
      if (his[0].first - los[0].first <= spread_goal) break;
      for (int k = 0; k < kBatch && step < opts.master_steps; ++k) {
        const std::size_t a = his[k].second, b = los[k].second;
        if (his[k].first < 0.0 || !std::isfinite(los[k].first) || a == b) break;
        if (pw[a] <= 0.0 || plen[a] - plen[b] <= spread_goal) continue;
        pairwise(b, a);
        ++step;
      }
    }
    Q = 0.0;
    for (std::size_t c = 0; c < ncell; ++c) Q += qterm(eta[c]);
    d = survey();
  }
  res.iterations = round;
  res.seconds = elapsed();
  return res;
}

/// One violation per curve whose ρ-length falls below 1 - tol.
struct Violation {
  std::size_t curve = 0;
  double length = 0.0;
  double shortfall = 0.0;
};

template <int N>
std::vector<Violation> admissible_check(const DensityField<N>& rho, const std::vector<PolyCurve<N>>& curves,
                                        double tol = 0.0) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const double l = geom::line_integral(rho, curves[i]);
    if (l < 1.0 - tol) out.push_back({i, l, 1.0 - l});
  }
  return out;
}

template <class F, int N>
  requires(!std::is_same_v<std::remove_cvref_t<F>, DensityField<N>>)
std::vector<Violation> admissible_check(F&& rho, const std::vector<PolyCurve<N>>& curves, double tol = 0.0) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const double l = geom::line_integral<N>(rho, curves[i]);
    if (l < 1.0 - tol) out.push_back({i, l, 1.0 - l});
  }
  return out;
}

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

/// Average of ∫_{γ+x} ρ ds over x uniform in B(0, r), with its standard error.
template <int N, class Rho>
MeanEstimate avg_line_integral(const Rho& rho, const PolyCurve<N>& gamma, double r, std::size_t samples,
                               std::uint64_t seed) {
  if (!(r > 0.0)) throw DomainError("avg_line_integral: radius must be positive");
  if (samples == 0) throw DomainError("avg_line_integral: need at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-r, r);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    Vec<N> x{};
    do {
      for (int i = 0; i < N; ++i) x[i] = u(rng);
    } while (dot(x, x) >= r * r);
    double v;
    if constexpr (std::is_same_v<Rho, DensityField<N>>)
      v = geom::line_integral(rho, gamma.translated(x));
    else
      v = geom::line_integral<N>(rho, gamma.translated(x));
    sum += v;
    sum2 += v * v;
  }
  MeanEstimate m;
  m.samples = samples;
  m.mean = sum / samples;
  const double var = samples > 1 ? std::max(0.0, (sum2 - samples * m.mean * m.mean) / (samples - 1)) : 0.0;
  m.stderr_ = std::sqrt(var / samples);
  return m;
}

// ---------------------------------------------------------------------------
// Scene builders

/// Spherical ring r < |x| < R. F1 holds the cells lying inside the closed
/// r-ball, F2 the cells lying outside the open R-ball.
template <int N>
GridScene<N> annulus_scene(double r, double R, int cells) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("annulus_scene requires 0 < r < R");
  if (cells < 8) throw DomainError("annulus_scene: too few cells");
  const double h = 2.0 * R / (cells - 4);
  const double half = 0.5 * cells * h;
  GridScene<N> s(Grid<N>::cube(-half, half, cells));
  for (std::size_t c = 0; c < s.grid.size(); ++c) {
    const Box<N> b = s.grid.cell_box(c);
    double near2 = 0.0, far2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double lo = b.lo[i], hi = b.hi[i];
      const double nearest = lo > 0.0 ? lo : (hi < 0.0 ? hi : 0.0);
      near2 += nearest * nearest;
      far2 += std::max(lo * lo, hi * hi);
    }
    if (far2 <= r * r)
      s.role[c] = CellRole::f1;
    else if (near2 >= R * R)
      s.role[c] = CellRole::f2;
    else
      s.role[c] = CellRole::open;
  }
  return s;
}

/// Rectangle [0, length] x [0, width] with F1, F2 one-cell columns beyond the short sides.
inline GridScene<2> rectangle_scene(double length, double width, int cells_per_unit) {
  if (!(length > 0.0) || !(width > 0.0)) throw DomainError("rectangle_scene: sides must be positive");
  const double h = 1.0 / cells_per_unit;
  const int nx = static_cast<int>(std::lround(length / h));
  const int ny = static_cast<int>(std::lround(width / h));
  if (std::fabs(nx * h - length) > 1e-9 || std::fabs(ny * h - width) > 1e-9)
    throw DomainError("rectangle_scene: sides must be multiples of the spacing");
  Grid<2> g;
  g.origin = {-h, 0.0};
  g.h = h;
  g.shape = {nx + 2, ny};
  GridScene<2> s(g);
  for (std::size_t c = 0; c < g.size(); ++c) {
    const int i = g.coords(c)[0];
    s.role[c] = i == 0 ? CellRole::f1 : (i == nx + 1 ? CellRole::f2 : CellRole::open);
  }
  return s;
}

/// Square ring between the squares of half-sides r and R, with F1 and F2 the
/// cell rows along the slits [r, R] x {0} and [-R, -r] x {0}.
inline GridScene<2> square_ring_scene(double r, double R, int cells) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("square_ring_scene requires 0 < r < R");
  GridScene<2> s(Grid<2>::cube(-R, R, cells));
  const double h = s.grid.h;
  for (std::size_t c = 0; c < s.grid.size(); ++c) {
    const Vec2 m = s.grid.center(c);
    const double a = std::max(std::fabs(m[0]), std::fabs(m[1]));
    if (a <= r) continue;
    const bool slit_row = std::fabs(m[1]) < h;
    if (slit_row && m[0] > 0.0)
      s.role[c] = CellRole::f1;
    else if (slit_row && m[0] < 0.0)
      s.role[c] = CellRole::f2;
    else
      s.role[c] = CellRole::open;
  }
  return s;
}

/// Marks as obstacles the open cells whose closed square meets the circle
/// |x| = rho (2D), except those listed in `keep`.
inline void add_circle_obstacle(GridScene<2>& s, double rho, const std::vector<std::size_t>& keep = {}) {
  for (std::size_t c = 0; c < s.grid.size(); ++c) {
    if (s.role[c] != CellRole::open) continue;
    const Box<2> b = s.grid.cell_box(c);
    double near2 = 0.0, far2 = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double nearest = b.lo[i] > 0.0 ? b.lo[i] : (b.hi[i] < 0.0 ? b.hi[i] : 0.0);
      near2 += nearest * nearest;
      far2 += std::max(b.lo[i] * b.lo[i], b.hi[i] * b.hi[i]);
    }
    if (near2 <= rho * rho && far2 >= rho * rho) s.obstacle[c] = 1;
  }
  for (auto c : keep) s.obstacle[c] = 0;
}

/// Annulus whose crossing paths are all forced through one cell: a wall on
/// the circle of radius sqrt(rR) with a single open gap cell on the positive
/// x-axis. Solve in avoid mode.
inline GridScene<2> gap_wall_scene(double r, double R, int cells) {
  GridScene<2> s = annulus_scene<2>(r, R, cells);
  const double h = s.grid.h;
  // Put the wall on a column centre so it stays one column wide near the gap.
  const double target = std::sqrt(r * R);
  const double col = std::floor((target - s.grid.origin[0]) / h);
  const double rho = s.grid.origin[0] + (col + 0.5) * h;
  std::array<int, 2> gap{};
  s.grid.locate({rho, 0.5 * h}, gap);
  add_circle_obstacle(s, rho, {s.grid.index(gap)});
  return s;
}

// ---------------------------------------------------------------------------
// Scene files: run-length-encoded masks.

inline nlohmann::json rle_encode(const std::vector<std::uint8_t>& v) {
  nlohmann::json runs = nlohmann::json::array();
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    runs.push_back({static_cast<int>(v[i]), j - i});
    i = j;
  }
  return runs;
}

inline std::vector<std::uint8_t> rle_decode(const nlohmann::json& runs, std::size_t expected) {
  std::vector<std::uint8_t> out;
  for (const auto& r : runs) {
    const int val = r.at(0).get<int>();
    const std::size_t n = r.at(1).get<std::size_t>();
    out.insert(out.end(), n, static_cast<std::uint8_t>(val));
  }
  if (out.size() != expected) throw DomainError("scene mask length does not match the grid");
  return out;
}

template <int N>
nlohmann::json scene_to_json(const GridScene<N>& s) {
  std::vector<std::uint8_t> roles(s.role.size());
  for (std::size_t i = 0; i < roles.size(); ++i) roles[i] = static_cast<std::uint8_t>(s.role[i]);
  return {{"dimension", N},
          {"spacing", s.grid.h},
          {"origin", s.grid.origin},
          {"shape", s.grid.shape},
          {"exponent", s.exponent},
          {"roles", rle_encode(roles)},
          {"obstacle", rle_encode(s.obstacle)}};
}

template <int N>
GridScene<N> scene_from_json(const nlohmann::json& j) {
  if (j.at("dimension").get<int>() != N) throw DomainError("scene dimension mismatch");
  Grid<N> g;
  g.h = j.at("spacing").get<double>();
  g.origin = j.at("origin").get<Vec<N>>();
  g.shape = j.at("shape").get<std::array<int, N>>();
  if (!(g.h > 0.0)) throw DomainError("scene spacing must be positive");
  GridScene<N> s(g);
  s.exponent = j.value("exponent", double(N));
  const auto roles = rle_decode(j.at("roles"), g.size());
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] > 3) throw DomainError("scene role out of range");
    s.role[i] = static_cast<CellRole>(roles[i]);
  }
  if (j.contains("obstacle")) s.obstacle = rle_decode(j.at("obstacle"), g.size());
  s.validate();
  return s;
}

}  // namespace exdist::modfam
