#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "exdist/modfam.hpp"
#include "oracles.hpp"

using namespace exdist;
using modfam::CurveConstraint;

namespace {
modfam::SolverOptions opts(double tol = 1e-2) {
  modfam::SolverOptions o;
  o.tol = tol;
  return o;
}
}  // namespace

TEST(ExactModulus, MatchesClosedForm) {
  EXPECT_NEAR(modfam::ring_modulus_exact(2, 1.0, std::numbers::e), oracle::ring_modulus(2, 1.0, std::numbers::e),
              1e-12);
  EXPECT_NEAR(modfam::ring_modulus_exact(3, 1.0, 5.0), oracle::ring_modulus(3, 1.0, 5.0), 1e-12);
  EXPECT_NEAR(modfam::square_ring_lower_bound(1.0, 4.0), oracle::square_ring_bound(1.0, 4.0), 1e-12);
}

TEST(DiscreteModulus, RectangleIsExact) {
  const auto s = modfam::rectangle_scene(2.0, 1.0, 16);
  const auto r = modfam::discrete_modulus(s, CurveConstraint::unconstrained(), opts());
  EXPECT_NEAR(r.value, oracle::rectangle_modulus(2.0, 1.0), 0.05 * 0.5);
  EXPECT_LE(r.lower, r.value + 1e-12);
}

TEST(DiscreteModulus, CoarseAnnulusNearFormula) {
  const auto s = modfam::annulus_scene<2>(1.0, std::numbers::e, 48);
  const auto r = modfam::discrete_modulus(s, CurveConstraint::unconstrained(), opts(2e-2));
  EXPECT_FALSE(r.infeasible);
  EXPECT_NEAR(r.value, oracle::ring_modulus(2, 1.0, std::numbers::e), 0.2 * 2 * std::numbers::pi);
  EXPECT_LE(r.lower, r.value * (1 + 1e-12));
}

TEST(DiscreteModulus, WitnessesAreAdmissible) {
  const auto s = modfam::annulus_scene<2>(1.0, std::numbers::e, 40);
  const auto r = modfam::discrete_modulus(s, CurveConstraint::unconstrained(), opts(2e-2));
  const auto curves = r.witness_curves();
  ASSERT_FALSE(curves.empty());
  EXPECT_TRUE(modfam::admissible_check(r.density, curves, 1e-6).empty());
}

TEST(DiscreteModulus, MonotoneUnderShrinkingFamily) {
  auto s = modfam::annulus_scene<2>(1.0, std::numbers::e, 40);
  const auto full = modfam::discrete_modulus(s, CurveConstraint::unconstrained(), opts(2e-2));
  modfam::add_circle_obstacle(s, 1.6);
  const auto avoid = modfam::discrete_modulus(s, CurveConstraint::avoid(), opts(2e-2));
  EXPECT_TRUE(avoid.infeasible);
  EXPECT_EQ(avoid.value, 0.0);
  const auto one = modfam::discrete_modulus(s, CurveConstraint::with_budget(1), opts(2e-2));
  EXPECT_LE(one.value, full.value * 1.04);
  EXPECT_GE(one.value, 0.9 * full.value);
}

TEST(DiscreteModulus, ThreeDimensionalRingConvergesFromBelow) {
  const double exact = oracle::ring_modulus(3, 1.0, std::numbers::e);
  const auto c = modfam::discrete_modulus(modfam::annulus_scene<3>(1.0, std::numbers::e, 24),
                                          CurveConstraint::unconstrained(), opts(3e-2));
  const auto f = modfam::discrete_modulus(modfam::annulus_scene<3>(1.0, std::numbers::e, 32),
                                          CurveConstraint::unconstrained(), opts(3e-2));
  EXPECT_LT(c.value, f.value);
  EXPECT_LT(f.value, exact);
  EXPECT_LT(std::fabs(f.value - exact) / exact, 0.3);
}

TEST(Scene, ValidationCatchesBadScenes) {
  auto s = modfam::rectangle_scene(1.0, 1.0, 8);
  for (auto& r : s.role)
    if (r == modfam::CellRole::f2) r = modfam::CellRole::open;
  EXPECT_THROW(s.validate(), DomainError);
  EXPECT_THROW(modfam::annulus_scene<2>(2.0, 1.0, 32), DomainError);
  EXPECT_THROW(CurveConstraint::with_budget(-1), DomainError);
}

TEST(Scene, JsonRoundTrip) {
  auto s = modfam::annulus_scene<2>(1.0, 3.0, 24);
  modfam::add_circle_obstacle(s, 2.0);
  const auto back = modfam::scene_from_json<2>(modfam::scene_to_json(s));
  EXPECT_EQ(back.role, s.role);
  EXPECT_EQ(back.obstacle, s.obstacle);
  EXPECT_EQ(back.grid.shape, s.grid.shape);
}

TEST(Scene, RunLengthRoundTrip) {
  const std::vector<std::uint8_t> v{0, 0, 1, 1, 1, 3, 2, 2, 0};
  EXPECT_EQ(modfam::rle_decode(modfam::rle_encode(v), v.size()), v);
  EXPECT_THROW(modfam::rle_decode(modfam::rle_encode(v), v.size() + 1), DomainError);
}

TEST(AverageLineIntegral, ConstantDensity) {
  const auto g = geom::PolyCurve<2>::segment({0, 0}, {1, 0});
  const auto m = modfam::avg_line_integral<2>([](const Vec2&) { return 3.0; }, g, 0.5, 200, 1);
  EXPECT_NEAR(m.mean, 3.0, 1e-9);
  EXPECT_NEAR(m.stderr_, 0.0, 1e-9);
}

TEST(AverageLineIntegral, IntegrableSingularityHasFiniteMean) {
  // |x|^{-1/2} is in L^1 near the origin, so the translated integrals average finitely.
  const auto g = geom::PolyCurve<2>::segment({-1, 0}, {1, 0});
  auto rho = [](const Vec2& p) { return std::pow(std::max(norm(p), 1e-12), -0.5); };
  const auto a = modfam::avg_line_integral<2>(rho, g, 0.2, 400, 1);
  const auto b = modfam::avg_line_integral<2>(rho, g, 0.2, 400, 2);
  EXPECT_TRUE(std::isfinite(a.mean));
  EXPECT_NEAR(a.mean, b.mean, 5 * (a.stderr_ + b.stderr_));
}
