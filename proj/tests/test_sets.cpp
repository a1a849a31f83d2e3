#include <gtest/gtest.h>

#include "exdist/sets.hpp"
#include "oracles.hpp"

using namespace exdist;
using geom::IntersectionKind;

TEST(Cantor, MiddleThirdsMeasure) {
  for (int k : {0, 1, 4, 9}) {
    const geom::CantorLine c(0, 1, geom::RemovalRule::constant_rule(rational(1, 3)), k);
    EXPECT_NEAR(to_double(c.measure_at_depth()), oracle::middle_thirds_measure(k), 1e-14);
    EXPECT_EQ(c.approximant().size(), std::size_t(1) << k);
  }
}

TEST(Cantor, FatMeasureIsExactProduct) {
  for (int k : {1, 5, 10}) {
    const geom::CantorLine c(0, 1, geom::RemovalRule::power_rule(4), k);
    EXPECT_NEAR(to_double(c.measure_at_depth()), oracle::fat_cantor_measure(k), 1e-14);
  }
  const geom::CantorLine c(0, 1, geom::RemovalRule::power_rule(4), 6);
  EXPECT_NEAR(c.limit_measure(), oracle::fat_cantor_limit(), 1e-9);
  EXPECT_GT(c.limit_measure(), 0.68);
}

TEST(Cantor, MembershipIsExact) {
  const geom::CantorLine c(0, 1, geom::RemovalRule::constant_rule(rational(1, 3)), 5);
  EXPECT_TRUE(c.contains(rational(1, 3)));
  EXPECT_TRUE(c.contains(rational(2, 3)));
  EXPECT_TRUE(c.contains(rational(1, 4)));  // 0.0202... in base 3
  EXPECT_FALSE(c.contains(rational(1, 2)));
}

TEST(Cantor, RejectsDegenerateInterval) {
  EXPECT_THROW(geom::CantorLine(1, 1, geom::RemovalRule::power_rule(4), 3), DomainError);
  EXPECT_THROW(geom::CantorLine(0, 1, geom::RemovalRule::power_rule(4), -1), DomainError);
}

TEST(Classify, SegmentThroughPointIsFinite) {
  geom::PrimitiveSet e;
  e.add_point({0.5, 0.5});
  const auto c = sets::curve_intersection_class(e, geom::PolyCurve<2>::segment({0, 0}, {1, 1}));
  EXPECT_EQ(c.kind, IntersectionKind::finite);
  EXPECT_EQ(c.count, 1u);
}

TEST(Classify, SegmentAcrossCircleMeetsTwice) {
  geom::PrimitiveSet e;
  e.add_circle({0, 0}, 1.0);
  const auto c = sets::curve_intersection_class(e, geom::PolyCurve<2>::segment({-2, 0}, {2, 0}));
  EXPECT_EQ(c.kind, IntersectionKind::finite);
  EXPECT_EQ(c.count, 2u);
  const auto miss = sets::curve_intersection_class(e, geom::PolyCurve<2>::segment({-2, 3}, {2, 3}));
  EXPECT_EQ(miss.kind, IntersectionKind::empty);
}

TEST(Classify, CantorProductSlices) {
  const auto fat = sets::make_cantor(sets::CantorSpec::fat(6));
  const auto thin = sets::make_cantor(sets::CantorSpec::middle_thirds(6));
  const auto unit = sets::make_interval(0, 1);
  const auto fat_x = sets::product_set(fat, unit);
  const auto thin_x = sets::product_set(thin, unit);
  const auto across = geom::PolyCurve<2>::segment({-0.5, 0.5}, {1.5, 0.5});
  EXPECT_EQ(sets::curve_intersection_class(*fat_x, across).kind, IntersectionKind::positive_length);
  EXPECT_NE(sets::curve_intersection_class(*thin_x, across).kind, IntersectionKind::positive_length);
  const auto along = geom::PolyCurve<2>::segment({0.0, -1.0}, {0.0, 2.0});
  const auto hit = sets::curve_intersection_class(*thin_x, along);
  EXPECT_EQ(hit.kind, IntersectionKind::positive_length);
  EXPECT_NEAR(hit.length, 1.0, 1e-12);
  const auto gap = geom::PolyCurve<2>::segment({0.5, -1.0}, {0.5, 2.0});
  EXPECT_EQ(sets::curve_intersection_class(*thin_x, gap).kind, IntersectionKind::empty);
}

TEST(Packing, CarpetAreaIsExact) {
  for (int g : {0, 1, 2, 3}) {
    const auto pr = sets::packing_residual(sets::carpet_spec(g));
    Rational expect = 1;
    for (int k = 0; k < g; ++k) expect *= Rational(8, 9);
    EXPECT_EQ(pr->exact_area(), expect);
  }
}

TEST(Packing, GasketAreaIsExact) {
  const auto pr = sets::packing_residual(sets::gasket_spec(3));
  EXPECT_EQ(pr->exact_area(), Rational(27, 64) * Rational(1, 2));
}

TEST(Packing, OverlapIsRejected) {
  sets::PackingSpec bad{sets::rect(0, 0, 1, 1), {sets::rect(rational(1, 10), rational(1, 10), rational(1, 2), rational(1, 2)),
                                                 sets::rect(rational(2, 5), rational(2, 5), rational(4, 5), rational(4, 5))}};
  EXPECT_THROW(sets::packing_residual(bad), DomainError);
}

TEST(Rasterize, CircleBlocksTheAnnulus) {
  auto scene = modfam::annulus_scene<2>(1.0, std::numbers::e, 48);
  geom::PrimitiveSet e;
  e.add_circle({0, 0}, std::sqrt(std::numbers::e));
  const auto flagged = sets::rasterize(e, scene);
  EXPECT_EQ(flagged, 0u);
  EXPECT_GT(scene.obstacle_count(), 100u);
}
