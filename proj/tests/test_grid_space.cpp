#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fptlab/fptlab.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fptlab;

TEST(GridFunction, RejectsBadShapes) {
  EXPECT_THROW(GridFunction(3, std::vector<double>(7, 0.0)), std::invalid_argument);
  EXPECT_THROW(GridFunction(-1, {0.0}), std::invalid_argument);
  EXPECT_THROW(GridFunction::zero(max_grid_level + 1), std::invalid_argument);
  EXPECT_THROW(GridFunction(1, {0.0, std::nan("")}), std::invalid_argument);
}

TEST(GridFunction, NormAndIntegral) {
  const GridFunction f(2, {1.0, -3.0, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(l1_norm(f), 1.5);
  EXPECT_DOUBLE_EQ(integral(f), 0.0);
  EXPECT_DOUBLE_EQ(negative_mass(f), 0.75);
}

TEST(GridFunction, MixedLevelArithmeticRefinesCoarser) {
  const GridFunction f(1, {1.0, 2.0});
  const GridFunction g(2, {1.0, 1.0, 1.0, 3.0});
  const GridFunction sum = f + g;
  EXPECT_EQ(sum.level(), 2);
  EXPECT_EQ(sum, GridFunction(2, {2.0, 2.0, 3.0, 5.0}));
}

TEST(GridFunction, JsonRoundTrip) {
  const GridFunction f(2, {0.5, -1.0, 2.0, 0.0});
  const nlohmann::json j = f;
  EXPECT_EQ(j.get<GridFunction>(), f);
}

TEST(KyFan, PeakToZeroIsItsSupportWidth) {
  // 2^k on [0, 2^-k): min(|f|, 1) integrates to 2^-k
  for (int k = 0; k <= 10; ++k)
    EXPECT_DOUBLE_EQ(ky_fan_distance(peak_sequence(std::uint64_t{1} << k, 10), GridFunction::zero(10)),
                     std::ldexp(1.0, -k));
}

TEST(KyFan, RademacherPairsAreHalfApart) {
  // r_n and r_m differ by 2 on exactly half of [0,1] when n != m
  for (int n = 1; n <= 6; ++n)
    for (int m = 1; m <= 6; ++m) {
      const double expected = n == m ? 0.0 : 0.5;
      EXPECT_DOUBLE_EQ(ky_fan_distance(rademacher(n, 8), rademacher(m, 8)), expected) << n << "," << m;
    }
}

TEST(KyFan, ShiftedRademacherIsOneAway) {
  const GridFunction one = GridFunction::constant(1.0, 6);
  for (int n = 1; n <= 6; ++n) {
    EXPECT_DOUBLE_EQ(ky_fan_distance(one + rademacher(n, 6), one), 1.0);
    EXPECT_DOUBLE_EQ(l1_norm(rademacher(n, 6)), 1.0);
  }
}

TEST(KyFan, MatchesPointwiseOracle) {
  gen::Source src(11);
  for (int i = 0; i < 50; ++i) {
    const GridFunction f = src.grid(src.integer(0, 6));
    const GridFunction g = src.grid(src.integer(0, 6));
    EXPECT_NEAR(ky_fan_distance(f, g), oracle::ky_fan(f, g, 8), 1e-12);
    EXPECT_NEAR(l1_norm(f), oracle::l1(f, 8), 1e-9 * (1.0 + l1_norm(f)));
  }
}

TEST(KyFanProperty, MetricAxioms) {
  gen::Source src(2024);
  for (int i = 0; i < 250; ++i) {
    const GridFunction f = src.grid(src.integer(0, 7));
    const GridFunction g = src.grid(src.integer(0, 7));
    const GridFunction h = src.grid(src.integer(0, 7));
    const double fg = ky_fan_distance(f, g);
    EXPECT_GE(fg, 0.0);
    EXPECT_LE(fg, 1.0);
    EXPECT_DOUBLE_EQ(ky_fan_distance(f, f), 0.0);
    EXPECT_DOUBLE_EQ(fg, ky_fan_distance(g, f));
    EXPECT_LE(ky_fan_distance(f, h), fg + ky_fan_distance(g, h) + 1e-12);
    EXPECT_LE(fg, l1_norm(f - g) + 1e-12);
  }
}

TEST(KyFanProperty, RefinementInvariant) {
  gen::Source src(7);
  for (int i = 0; i < 100; ++i) {
    const int lv = src.integer(0, 6);
    const GridFunction f = src.grid(lv);
    const GridFunction g = src.grid(lv);
    const int up = lv + src.integer(1, 4);
    EXPECT_NEAR(ky_fan_distance(refine(f, up), refine(g, up)), ky_fan_distance(f, g), 1e-12);
    EXPECT_NEAR(l1_norm(refine(f, up)), l1_norm(f), 1e-12 * (1.0 + l1_norm(f)));
    EXPECT_NEAR(integral(refine(f, up)), integral(f), 1e-12 * (1.0 + l1_norm(f)));
  }
}

TEST(Generators, PeakRademacherIndicator) {
  const GridFunction p = peak_sequence(4, 3);
  EXPECT_EQ(p, GridFunction(3, {4, 4, 0, 0, 0, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(l1_norm(p), 1.0);
  EXPECT_THROW(peak_sequence(3, 4), std::invalid_argument);
  EXPECT_THROW(peak_sequence(32, 4), std::invalid_argument);

  const GridFunction r = rademacher(2, 2);
  EXPECT_EQ(r, GridFunction(2, {1, -1, 1, -1}));

  const GridFunction ind = indicator(0.5, 1.0, 3);
  EXPECT_DOUBLE_EQ(integral(ind), 0.5);
  EXPECT_DOUBLE_EQ(ind[3], 0.0);
  EXPECT_DOUBLE_EQ(ind[4], 1.0);
}

TEST(Tails, LimsupAndLiminfOverTrailingHalf) {
  std::vector<double> inv;
  for (int k = 1; k <= 100; ++k) inv.push_back(1.0 / k);
  // trailing half is k = 51..100
  EXPECT_DOUBLE_EQ(limsup_tail(inv), 1.0 / 51.0);
  EXPECT_DOUBLE_EQ(liminf_tail(inv), 1.0 / 100.0);
  EXPECT_EQ(tail_count(100, 0.5), 50u);
  EXPECT_EQ(tail_count(1, 0.5), 1u);
  EXPECT_THROW(tail_count(10, 0.0), std::invalid_argument);
  EXPECT_THROW(limsup_tail(std::span<const double>{}), std::invalid_argument);
}

TEST(CoordPoint, Basics) {
  EXPECT_THROW(CoordPoint(1.0, {1.0}), std::invalid_argument);
  EXPECT_THROW(CoordPoint(2.0, {1.0}), std::invalid_argument);
  const CoordPoint v1 = CoordPoint::vertex(1.5, 4, 1);
  const CoordPoint v3 = CoordPoint::vertex(1.5, 4, 3);
  EXPECT_DOUBLE_EQ(norm(v1), 0.5);
  EXPECT_DOUBLE_EQ(norm(v3), 1.0);
  EXPECT_DOUBLE_EQ(norm(v1 - v3), 1.5);
  EXPECT_DOUBLE_EQ(coefficient_sum(v1 + v3), 2.0);
  const nlohmann::json j = v3;
  EXPECT_EQ(j.get<CoordPoint>(), v3);
}

TEST(CoordPoint, KyFanMatchesRealizedFunctions) {
  gen::Source src(5);
  for (int i = 0; i < 60; ++i) {
    const double t = src.uniform(1.05, 1.95);
    const std::size_t m = static_cast<std::size_t>(src.integer(1, 9));
    const CoordPoint x = src.coords(t, m);
    const CoordPoint y = src.coords(t, m);
    const auto fx = oracle::realize(x);
    const auto fy = oracle::realize(y);
    EXPECT_NEAR(ky_fan_distance(x, y), oracle::ky_fan(fx, fy, static_cast<int>(m) + 1), 1e-12);
    EXPECT_NEAR(norm(x - y), oracle::l1(fx - fy, static_cast<int>(m) + 1), 1e-12);
    EXPECT_NEAR(integral(x), integral(fx), 1e-12);
  }
}

TEST(PointHelpers, ConvexCombinationAndCsv) {
  const GridFunction f(1, {1.0, 0.0});
  const GridFunction g(1, {0.0, 1.0});
  EXPECT_EQ(convex_combination(0.25, f, g), GridFunction(1, {0.25, 0.75}));
  std::ostringstream out;
  const std::vector<GridFunction> seq{f, g};
  write_sequence_csv(out, std::span<const GridFunction>(seq), f);
  EXPECT_EQ(out.str(), "index,l1_norm,ky_fan_to_limit\n1,0.5,0\n2,0.5,1\n");
}
