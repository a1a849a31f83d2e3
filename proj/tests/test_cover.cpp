#include <gtest/gtest.h>

#include <random>

#include "exdist/cover.hpp"
#include "oracles.hpp"

using namespace exdist;
using geom::Ball;

TEST(FiveB, ContainsUnionOfBalls) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0), rad(0.02, 0.15);
  std::vector<Ball<2>> balls;
  for (int i = 0; i < 60; ++i) balls.emplace_back(Vec2{u(rng), u(rng)}, rad(rng));
  const auto sel = cover::five_b_cover(balls);
  for (std::size_t a = 0; a < sel.size(); ++a)
    for (std::size_t b = a + 1; b < sel.size(); ++b)
      EXPECT_GE(distance<2>(balls[sel[a]].center, balls[sel[b]].center),
                balls[sel[a]].radius + balls[sel[b]].radius);
  std::vector<oracle::Disk> in, out;
  for (const auto& b : balls) in.push_back({{b.center[0], b.center[1]}, b.radius});
  for (auto i : sel) out.push_back({{balls[i].center[0], balls[i].center[1]}, 5.0 * balls[i].radius});
  EXPECT_EQ(oracle::covered_fraction(in, out, 20000, 9), 1.0);
}

TEST(EggYolk, RegionValidation) {
  const auto disk = geom::Region<2>::disk({0, 0}, 1.0);
  EXPECT_TRUE(cover::validate_egg_yolk(disk, Ball<2>({0, 0}, 0.4), 3.0).holds);
  EXPECT_FALSE(cover::validate_egg_yolk(disk, Ball<2>({0, 0}, 0.6), 3.0).holds);
  EXPECT_FALSE(cover::validate_egg_yolk(disk, Ball<2>({0, 0}, 0.2), 3.0).holds);
  const auto cert = cover::validate_egg_yolk(disk, Ball<2>({0, 0}, 0.25), 8.0);
  EXPECT_NEAR(cert.tight_M, 4.0, 1e-3);
  EXPECT_TRUE(cert.separation);
  EXPECT_TRUE(cert.diameter_chain);
}

TEST(EggYolk, IntersectingYolkBound) {
  EXPECT_DOUBLE_EQ(cover::intersecting_yolk_ratio_bound(2.0), 1.0 / 6.0);
}

class CoverSuite : public ::testing::TestWithParam<std::tuple<std::string, double>> {};

TEST_P(CoverSuite, PostconditionsHold) {
  const auto& [name, M] = GetParam();
  cover::RandomFamilyOptions o;
  o.M = M;
  o.pairs = 15;
  o.lattice = 65;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto fam = cover::random_disk_family(plane_map(name), seed, o);
    fam.check_correspondence();
    const auto res = cover::egg_yolk_cover(fam);
    EXPECT_TRUE(res.post.all()) << name << " M=" << M << " seed=" << seed;
    EXPECT_GE(res.achieved_M, 2.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Maps, CoverSuite,
                         ::testing::Values(std::tuple<std::string, double>{"identity", 2.0},
                                           std::tuple<std::string, double>{"identity", 8.0},
                                           std::tuple<std::string, double>{"diag21", 4.0},
                                           std::tuple<std::string, double>{"rotscale", 4.0}));

TEST(Cover, DeterministicPerSeed) {
  const auto a = cover::egg_yolk_cover(cover::random_disk_family(plane_map("identity"), 5));
  const auto b = cover::egg_yolk_cover(cover::random_disk_family(plane_map("identity"), 5));
  EXPECT_EQ(a.regions, b.regions);
  EXPECT_EQ(a.achieved_M, b.achieved_M);
}

TEST(Cover, RejectsUnsupportedFamilies) {
  cover::RandomFamilyOptions o;
  o.M = 2.0;
  EXPECT_THROW(cover::random_disk_family(plane_map("diag21"), 1, o), DomainError);
  EXPECT_THROW(cover::random_disk_family(plane_map("cusp"), 1), DomainError);
}

TEST(Cover, BrokenCorrespondenceIsReported) {
  auto fam = cover::random_disk_family(plane_map("identity"), 2);
  fam.range.pop_back();
  EXPECT_THROW(fam.check_correspondence(), ConsistencyError);
  auto dup = cover::random_disk_family(plane_map("identity"), 2);
  dup.range[1] = dup.range[0];
  EXPECT_THROW(dup.check_correspondence(), ConsistencyError);
}
