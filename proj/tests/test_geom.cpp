#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "exdist/content.hpp"
#include "exdist/geom.hpp"
#include "exdist/sets.hpp"
#include "oracles.hpp"

using namespace exdist;

TEST(Eccentricity, DiskIsOne) {
  const auto d = geom::Region<2>::disk({0.3, -0.2}, 1.5);
  const auto e = geom::eccentricity(d, 0.01);
  EXPECT_NEAR(e.value, 1.0, 0.02);
}

TEST(Eccentricity, EllipseMatchesBruteForce) {
  const auto reg = geom::Region<2>::ellipse({0.0, 0.0}, 2.0, 1.0);
  const auto e = geom::eccentricity(reg, 0.005);
  const auto bd = oracle::ellipse_boundary(2.0, 1.0, 2000);
  const double ref = oracle::eccentricity(
      [](const oracle::P2& p) { return p[0] * p[0] / 4 + p[1] * p[1] < 1; }, bd, 0.05);
  EXPECT_NEAR(ref, 2.0, 0.02);
  EXPECT_NEAR(e.value, 2.0, 0.02);
  EXPECT_LE(e.value, ref + 2e-3);
}

TEST(Eccentricity, RectangleIsSqrtFive) {
  const auto reg = geom::Region<2>::rectangle({0.0, 0.0}, {2.0, 1.0});
  const auto e = geom::eccentricity(reg, 0.005);
  const double ref = oracle::eccentricity(
      [](const oracle::P2& p) { return p[0] > 0 && p[0] < 2 && p[1] > 0 && p[1] < 1; },
      oracle::rectangle_boundary(2.0, 1.0, 400), 0.01);
  EXPECT_NEAR(e.value, std::sqrt(5.0), 0.01);
  EXPECT_NEAR(ref, std::sqrt(5.0), 0.01);
}

TEST(Eccentricity, FinerSearchNeverWorse) {
  const auto reg = geom::Region<2>::polygon({{0, 0}, {3, 0}, {2, 1}, {0.5, 1.5}});
  const double coarse = geom::eccentricity(reg, 0.04).value;
  const double fine = geom::eccentricity(reg, 0.02).value;
  EXPECT_LE(fine, coarse + 1e-12);
}

TEST(Eccentricity, RejectsBadInput) {
  const auto reg = geom::Region<2>::disk({0, 0}, 1.0);
  EXPECT_THROW(geom::eccentricity(reg, 0.0), DomainError);
}

TEST(RelativeDistance, SeparatedSegments) {
  const auto a = geom::PolyCurve<2>::segment({0, 0}, {1, 0});
  const auto b = geom::PolyCurve<2>::segment({0, 2}, {1, 2});
  EXPECT_NEAR(geom::relative_distance<2>(a, b), 2.0, 1e-12);
}

TEST(RelativeDistance, ScaleInvariant) {
  const auto a = geom::PolyCurve<2>::circle({0, 0}, 1.0, 256);
  const auto b = geom::PolyCurve<2>::segment({3, 0}, {3, 0.5});
  const auto a2 = geom::PolyCurve<2>::circle({0, 0}, 7.0, 256);
  const auto b2 = geom::PolyCurve<2>::segment({21, 0}, {21, 3.5});
  EXPECT_NEAR(geom::relative_distance<2>(a, b), geom::relative_distance<2>(a2, b2), 1e-9);
}

TEST(PolyCurve, CircleLengthAndReparametrisation) {
  const auto c = geom::PolyCurve<2>::circle({1, 1}, 2.0, 4096);
  EXPECT_NEAR(c.length(), 4.0 * std::numbers::pi, 1e-5);
  const auto r = c.reversed();
  EXPECT_NEAR(r.length(), c.length(), 1e-12);
  const auto p = c.at(0.5 * c.length());
  EXPECT_NEAR(distance<2>(p, {1, 1}), 2.0, 1e-6);
}

TEST(LineIntegral, ConstantDensityGivesLength) {
  const auto c = geom::PolyCurve<2>({{0, 0}, {3, 0}, {3, 4}});
  EXPECT_NEAR(geom::line_integral<2>([](const Vec2&) { return 2.0; }, c), 14.0, 1e-9);
}

TEST(LineIntegral, RadialDensityOnSegment) {
  const auto c = geom::PolyCurve<2>::segment({1, 0}, {std::numbers::e, 0});
  const double v = geom::line_integral<2>([](const Vec2& p) { return 1.0 / norm(p); }, c);
  EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(LineIntegral, SplitsAdditively) {
  const auto c = geom::PolyCurve<2>({{0, 0}, {1, 0.5}, {2, -1}, {2.5, 2}});
  auto rho = [](const Vec2& p) { return 1.0 + p[0] * p[0] + std::sin(p[1]); };
  const double L = c.length();
  const double whole = geom::line_integral<2>(rho, c);
  const double parts = geom::line_integral<2>(rho, c.subpath(0.0, 0.37 * L)) +
                       geom::line_integral<2>(rho, c.subpath(0.37 * L, L));
  EXPECT_NEAR(whole, parts, 1e-8);
}

TEST(Content, UnitIntervalHasContentOne) {
  const auto s = sets::make_interval(0, 1);
  const auto r = geom::hausdorff_content(*s, 1.0, 0.25);
  EXPECT_NEAR(r.value, 1.0, 1e-9);
}

TEST(Content, GrowsAsTheGaugeShrinks) {
  const auto c = sets::make_cantor(sets::CantorSpec::middle_thirds(6));
  const auto prod = sets::product_set(c, c);
  double prev = 0.0;
  for (double delta : {1.0, 1.0 / 3, 1.0 / 9}) {
    const double v = geom::hausdorff_content(*prod, 1.0, delta, 20000).value;
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
}

TEST(Content, PointCountAtDimensionZero) {
  geom::PrimitiveSet e;
  e.add_point({0.3, 0.3}).add_point({0.6, 0.9}).add_point({0.9, 0.4});
  EXPECT_NEAR(geom::hausdorff_content(e, 0.0, 0.1).value, 3.0, 1e-12);
}

TEST(Content, RejectsBadGauge) {
  const auto s = sets::make_interval(0, 1);
  EXPECT_THROW(geom::hausdorff_content(*s, 1.0, 0.0), DomainError);
  EXPECT_THROW(geom::hausdorff_content(*s, -1.0, 0.1), DomainError);
}
