#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fptlab/fptlab.hpp"
#include "generators.hpp"

using namespace fptlab;

TEST(TBounds, ConeHullBracketsOnePlusA) {
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto rep = t_bounds(cone_hull(a, 12), peak_family(4, 12, 12));
    EXPECT_LE(rep.estimate_low, 1.0 + a + 1e-9) << a;
    EXPECT_GE(rep.estimate_high, 1.0 + a - 1e-9) << a;
    EXPECT_LE(rep.estimate_high - rep.estimate_low, 0.02 * (1.0 + a)) << a;
  }
}

TEST(TBounds, BallIsOne) {
  const auto rep = t_bounds(unit_ball(12), peak_family(4, 12, 12));
  EXPECT_NEAR(rep.estimate_low, 1.0, 1e-12);
  EXPECT_NEAR(rep.estimate_high, 1.0, 1e-12);
  EXPECT_EQ(rep.bound_type, BoundType::exact);
}

TEST(TBounds, CtSimplexIsT) {
  for (double t : {1.1, 1.25, 1.5, 1.75, 1.9}) {
    const auto rep = t_bounds(ct_simplex(t, 64), vertex_family(t, 64));
    EXPECT_NEAR(rep.estimate_low, t, 1e-9);
    EXPECT_NEAR(rep.estimate_high, t, 1e-9);
    EXPECT_EQ(rep.bound_type, BoundType::exact);
  }
}

TEST(TBounds, RejectsFamiliesOutsideTheBody) {
  SequenceFamily<GridFunction> fam{"zeros", {GridFunction::zero(4), GridFunction::zero(4)}};
  EXPECT_THROW(t_bounds(density_simplex(4), fam), std::invalid_argument);
  SequenceFamily<GridFunction> flat{"flat", {GridFunction::constant(1.0, 4), GridFunction::constant(1.0, 4)}};
  EXPECT_THROW(t_bounds(density_simplex(4), flat), estimation_error);
}

TEST(Report, JsonAndCsv) {
  const auto rep = t_bounds(unit_ball(8), peak_family(4, 8, 8));
  const nlohmann::json j = rep;
  EXPECT_EQ(j.at("quantity"), "t(ball)");
  EXPECT_EQ(j.at("bound_type"), "exact");
  const std::string row = csv_row(rep);
  EXPECT_EQ(std::count(row.begin(), row.end(), '\n'), 0);
  EXPECT_EQ(row.rfind("t(ball),", 0), 0u);
}

TEST(Star, DefectAlongPeaksShrinks) {
  const int level = 14;
  const GridFunction z = indicator(0.5, 1.0, level);
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 4; k <= 12; ++k) {
    std::vector<GridFunction> seq;
    for (int j = k; j <= k + 2; ++j) seq.push_back(peak_sequence(std::uint64_t{1} << j, level));
    const double d = star_equality_defect(std::span<const GridFunction>(seq), z);
    EXPECT_LE(d, std::ldexp(1.0, -k)) << k;
    EXPECT_LE(d, previous + 1e-15) << k;
    previous = d;
  }
}

TEST(Star, RefusesNonNullSequences) {
  const std::vector<GridFunction> seq{rademacher(1, 6), rademacher(2, 6), rademacher(3, 6)};
  EXPECT_THROW(star_equality_defect(std::span<const GridFunction>(seq), GridFunction::zero(6)),
               std::invalid_argument);
}

TEST(Opial, LOneValueAndCrossCheck) {
  EXPECT_DOUBLE_EQ(opial_one_plus_r("L1"), 2.0);
  EXPECT_THROW(opial_one_plus_r("L2"), std::invalid_argument);
  // ||2^k chi_[0,2^-k) - c|| = 1 + c - 2c 2^-k; the trailing half of k = 4..14
  // starts at k = 9, where the liminf sits
  const int level = 14;
  const auto fam = peak_family(4, level, level);
  for (double c : {0.25, 1.0}) {
    const auto chk = opial_cross_check(std::span<const GridFunction>(fam.terms), GridFunction::constant(c, level));
    EXPECT_NEAR(chk.value, 1.0 + c - 2.0 * c * std::ldexp(1.0, -9), 1e-12);
    EXPECT_LE(chk.relative_error, 0.02);
  }
}

TEST(Condition, Examples) {
  EXPECT_TRUE(theorem_condition(1.0, 1.0, 2.0).holds);
  const auto v = theorem_condition(2.0 / 1.5, 1.5, 2.0);
  EXPECT_FALSE(v.holds);
  EXPECT_TRUE(v.in_guard_band);
  EXPECT_TRUE(theorem_condition(2.0 / 1.5 - 0.01, 1.5, 2.0).holds);
  EXPECT_FALSE(theorem_condition(1.0, 2.0, 2.0).holds);
  EXPECT_THROW(theorem_condition(-1.0, 1.5, 2.0), std::invalid_argument);
  EXPECT_THROW(theorem_condition(1.0, 2.5, 2.0), std::invalid_argument);
  EXPECT_THROW(theorem_condition(1.0, 1.5, 0.5), std::invalid_argument);
}

TEST(ConditionProperty, ScaleConsistent) {
  gen::Source src(55);
  for (int i = 0; i < 500; ++i) {
    const double t = src.uniform(1.0, 2.0);
    const double opr = src.uniform(1.0, 3.0);
    const double s = src.uniform(0.0, 3.0);
    const double c = src.uniform(1.0, 2.0 / t);
    ASSERT_EQ(theorem_condition(s, t, opr).holds, theorem_condition(s, t * c, opr * c).holds ||
                                                      std::abs(opr / t - s) < 1e-12);
  }
}

TEST(Orlicz, PowerFunctions) {
  for (double p : {1.0, 2.0, 4.0})
    EXPECT_NEAR(orlicz_a([p](double t) { return std::pow(t, 1.0 / p); }, 0.5), std::pow(2.0, 1.0 / p), 1e-6);
  for (double delta : {0.25, 0.5, 0.75}) EXPECT_NEAR(orlicz_a([](double t) { return t; }, delta), 1.0 / delta, 1e-12);
}

TEST(Orlicz, ProbeGridAndValidation) {
  const auto grid = log_probe_grid();
  ASSERT_EQ(grid.size(), 1000u);
  EXPECT_NEAR(grid.front(), 1e-6, 1e-18);
  EXPECT_DOUBLE_EQ(grid.back(), 1e6);
  EXPECT_THROW(orlicz_a([](double t) { return t; }, 0.0), std::invalid_argument);
  EXPECT_THROW(orlicz_a([](double) { return 0.0; }, 0.5), std::invalid_argument);
  // t -> log(1 + t) has its inf at the large end of the grid
  const double a = orlicz_a([](double t) { return std::log1p(t); }, 0.5);
  EXPECT_NEAR(a, std::log1p(1e6) / std::log1p(5e5), 1e-12);
}
