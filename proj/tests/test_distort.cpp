#include <gtest/gtest.h>

#include <sstream>

#include "exdist/distort.hpp"
#include "exdist/maps.hpp"
#include "oracles.hpp"

using namespace exdist;

namespace {
distort::SampledMap sampled(const std::string& name, int cells = 96) {
  const auto f = plane_map(name);
  return distort::SampledMap::from_function(Box<2>{{0.0, 0.0}, {1.0, 1.0}}, cells, f.f);
}

double jac(const std::string& name, const Vec2& x) {
  const auto f = plane_map(name);
  return oracle::jacobian_distortion(
      [&](const oracle::P2& p) {
        const Vec2 q = f({p[0], p[1]});
        return oracle::P2{q[0], q[1]};
      },
      {x[0], x[1]});
}
}  // namespace

TEST(MetricDistortion, LinearMapsMatchSingularValues) {
  for (const std::string name : {"identity", "diag21", "rotscale"}) {
    const auto f = sampled(name);
    for (const Vec2 x : {Vec2{0.5, 0.5}, Vec2{0.35, 0.6}}) {
      const auto p = distort::metric_distortion(f, x, {0.1, 0.05});
      EXPECT_NEAR(p.H, jac(name, x), 0.02) << name;
    }
  }
}

TEST(MetricDistortion, RadialSquareAwayFromOrigin) {
  const auto f = distort::SampledMap::from_function(Box<2>{{-1.0, -1.0}, {1.0, 1.0}}, 200, plane_map("radial-square").f);
  const Vec2 x{0.5, 0.2};
  const auto p = distort::metric_distortion(f, x, {0.05, 0.03});
  EXPECT_NEAR(p.H, jac("radial-square", x), 0.1);
}

TEST(MetricDistortion, RejectsBadLadders) {
  const auto f = sampled("identity");
  EXPECT_THROW(distort::metric_distortion(f, {0.5, 0.5}, {}), DomainError);
  EXPECT_THROW(distort::metric_distortion(f, {0.05, 0.5}, {0.1}), DomainError);
  EXPECT_THROW(distort::metric_distortion(f, {0.5, 0.5}, {0.001}), DomainError);
}

TEST(EccentricDistortion, IdentityIsOne) {
  const auto f = sampled("identity");
  const auto e = distort::eccentric_distortion(f, {0.5, 0.5}, 0.05);
  EXPECT_NEAR(e.value, 1.0, 0.03);
}

TEST(EccentricDistortion, Diag21BoundedByMetricDistortion) {
  const auto f = sampled("diag21");
  const auto e = distort::eccentric_distortion(f, {0.5, 0.5}, 0.05);
  EXPECT_LE(e.value, 2.0 * 1.05);
  EXPECT_GE(e.value, 1.0);
}

TEST(SampledMap, CsvRoundTripAndInverse) {
  const auto f = sampled("rotscale", 32);
  std::stringstream ss;
  f.to_csv(ss);
  const auto g = distort::SampledMap::from_csv(ss);
  const Vec2 x{0.41, 0.63};
  EXPECT_NEAR(distance<2>(f(x), g(x)), 0.0, 1e-12);
  const auto back = f.inverse(f(x));
  ASSERT_TRUE(back.has_value());
  EXPECT_NEAR(distance<2>(*back, x), 0.0, 1e-6);
}

TEST(SampledMap, NonInjectiveIsRejected) {
  auto fold = [](const Vec2& p) { return Vec2{std::fabs(p[0] - 0.5), p[1]}; };
  const auto f = distort::SampledMap::from_function(Box<2>{{0.0, 0.0}, {1.0, 1.0}}, 16, fold);
  EXPECT_THROW(f.validate(), ConsistencyError);
}

TEST(RingQc, IdentityPreservesRingModulus) {
  const auto f = sampled("identity", 64);
  modfam::SolverOptions o;
  o.tol = 2e-2;
  const auto r = distort::ring_qc_test(f, {{{0.5, 0.5}, 0.1, 0.3}}, 2 * std::numbers::pi, o, 48);
  ASSERT_TRUE(r.rows[0].ok) << r.rows[0].error;
  EXPECT_NEAR(r.rows[0].image_modulus, r.rows[0].input_modulus, 0.2 * r.rows[0].input_modulus);
}

TEST(RingQc, RingOutsideDomainIsReportedPerRow) {
  const auto f = sampled("identity", 32);
  const auto r = distort::ring_qc_test(f, {{{0.5, 0.5}, 0.2, 0.7}}, 10.0);
  EXPECT_FALSE(r.rows[0].ok);
  EXPECT_FALSE(r.rows[0].error.empty());
}
