#include <gtest/gtest.h>

#include <cmath>

#include "exdist/qhyp.hpp"
#include "oracles.hpp"

using namespace exdist;

TEST(Quasihyperbolic, DiskRadialDistance) {
  const auto d = qhyp::Domain::disk({0, 0}, 1.0);
  for (double t : {0.5, 0.9}) {
    const auto r = qhyp::qh_distance(d, {0, 0}, {0, t}, 1.0 / 64);
    EXPECT_NEAR(r.value, oracle::disk_qh_from_centre(1.0, t), 0.03 * oracle::disk_qh_from_centre(1.0, t));
  }
}

TEST(Quasihyperbolic, SymmetricAndTriangle) {
  const auto d = qhyp::Domain::square({0, 0}, {1, 1});
  const Vec2 a{0.2, 0.3}, b{0.8, 0.7}, c{0.5, 0.15};
  const double h = 1.0 / 64;
  const double ab = qhyp::qh_distance(d, a, b, h).value;
  EXPECT_DOUBLE_EQ(ab, qhyp::qh_distance(d, b, a, h).value);
  const double ac = qhyp::qh_distance(d, a, c, h).value, cb = qhyp::qh_distance(d, c, b, h).value;
  EXPECT_LE(ab, (ac + cb) * 1.02);
}

TEST(Quasihyperbolic, BoundedBelowByLogRatio) {
  // k(x, y) >= log(1 + |x - y| / min(d(x), d(y))).
  const auto d = qhyp::Domain::square({0, 0}, {1, 1});
  const Vec2 a{0.5, 0.5}, b{0.5, 0.05};
  const double k = qhyp::qh_distance(d, a, b, 1.0 / 64).value;
  EXPECT_GE(k, std::log(1.0 + 0.45 / 0.05) * 0.98);
}

TEST(Quasihyperbolic, RejectsBoundaryPoints) {
  const auto d = qhyp::Domain::disk({0, 0}, 1.0);
  EXPECT_THROW(qhyp::qh_distance(d, {0, 0}, {1.5, 0}, 0.05), DomainError);
}

TEST(Whitney, InvariantsOnDiskAndCusp) {
  for (const auto& d : {qhyp::Domain::disk({0, 0}, 1.0), qhyp::Domain::cusp()}) {
    const auto w = qhyp::whitney_decompose(d, 6);
    const auto rep = w.verify(d);
    EXPECT_TRUE(rep.all());
    EXPECT_EQ(rep.distance_ok, rep.cubes);
    EXPECT_EQ(rep.ratio_ok, rep.pairs);
    for (const auto& q : w.cubes()) {
      EXPECT_LE(q.side * std::sqrt(2.0), q.dist * (1 + 1e-9));
      EXPECT_LE(q.dist, 4.0 * q.side * std::sqrt(2.0) * (1 + 1e-9));
    }
  }
}

TEST(Whitney, CubesAreDisjoint) {
  const auto w = qhyp::whitney_decompose(qhyp::Domain::square({0, 0}, {1, 1}), 5);
  const auto& c = w.cubes();
  double area = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    area += c[i].side * c[i].side;
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double ox = std::min(c[i].box.hi[0], c[j].box.hi[0]) - std::max(c[i].box.lo[0], c[j].box.lo[0]);
      const double oy = std::min(c[i].box.hi[1], c[j].box.hi[1]) - std::max(c[i].box.lo[1], c[j].box.lo[1]);
      ASSERT_FALSE(ox > 1e-12 && oy > 1e-12);
    }
  }
  EXPECT_LE(area, 1.0 + 1e-12);
}

TEST(Shadows, DiskSumIsStable) {
  const auto d = qhyp::Domain::disk({0, 0}, 1.0);
  const auto s = qhyp::shadow_sum_diagnostic(d, {0.01, 0.01}, {5, 6});
  ASSERT_EQ(s.levels.size(), 2u);
  for (const auto& l : s.levels) {
    EXPECT_TRUE(std::isfinite(l.ratio()));
    EXPECT_GT(l.ratio(), 0.0);
  }
  const double change = s.levels[1].ratio() / s.levels[0].ratio();
  EXPECT_GT(change, 0.5);
  EXPECT_LT(change, 2.0);
}

TEST(Domain, JsonRoundTrip) {
  const auto d = qhyp::Domain::polygon({{0, 0}, {2, 0}, {2, 1}, {0, 1}});
  const auto back = qhyp::Domain::from_json(d.to_json());
  EXPECT_TRUE(back.contains({1.0, 0.5}));
  EXPECT_FALSE(back.contains({2.5, 0.5}));
  EXPECT_NEAR(back.boundary_diameter(), std::sqrt(5.0), 1e-9);
}
