#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fptlab/fptlab.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fptlab;

namespace {

std::vector<AffineOperator<GridFunction>> grid_operators() {
  return {identity_operator<GridFunction>(), doubling_shift(), normalizing_retraction(), composed_g(),
          cyclic_shift()};
}

// Members of C_0 (nonnegative, integral at most 1) with mass kept in the
// left part of the grid so that doubling orbits stay resolved.
GridFunction c0_point(gen::Source& src, int level) {
  std::vector<double> v(std::size_t{1} << level, 0.0);
  const std::size_t used = v.size() / 4 + 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < used; ++i) sum += v[i] = src.uniform(0.0, 1.0);
  const double mass = src.uniform(0.0, 1.0);
  for (double& x : v) x *= mass * static_cast<double>(v.size()) / sum;
  return GridFunction(level, std::move(v));
}

}  // namespace

TEST(Doubling, HandComputedImage) {
  const auto op = doubling_shift();
  EXPECT_EQ(apply(op, GridFunction::constant(1.0, 3)), GridFunction(3, {2, 2, 2, 2, 0, 0, 0, 0}));
  EXPECT_EQ(apply(op, GridFunction(2, {1, 3, 5, 7})), GridFunction(2, {4, 12, 0, 0}));
  EXPECT_DOUBLE_EQ(l1_norm(iterate(op, GridFunction::constant(1.0, 6), 4)), 1.0);
}

TEST(Doubling, HorizonCountsResolvedApplications) {
  const auto op = doubling_shift();
  EXPECT_EQ(horizon(op, GridFunction::constant(1.0, 6)), std::optional<std::size_t>(5));
  EXPECT_EQ(horizon(op, peak_sequence(64, 6)), std::optional<std::size_t>(0));
  EXPECT_EQ(horizon(op, GridFunction::zero(6)), std::nullopt);
  EXPECT_EQ(horizon(cyclic_shift(), GridFunction::constant(1.0, 6)), std::nullopt);
}

TEST(Cyclic, FullCycleReturnsAndMeansAreConstant) {
  gen::Source src(3);
  const auto op = cyclic_shift();
  const GridFunction f = src.grid(5);
  EXPECT_EQ(iterate(op, f, 32), f);
  EXPECT_EQ(apply(op, GridFunction(2, {1, 2, 3, 4})), GridFunction(2, {4, 1, 2, 3}));
  const auto means = cesaro_means(op, f, 32);
  const GridFunction expected = GridFunction::constant(integral(f), 5);
  EXPECT_LE(l1_norm(means.back() - expected), 1e-12 * (1.0 + l1_norm(f)));
}

TEST(Retraction, MapsC0OntoDensities) {
  const auto op = normalizing_retraction();
  const GridFunction f(2, {0.4, 0.0, 0.0, 0.0});
  const GridFunction rf = apply(op, f);
  EXPECT_EQ(rf, GridFunction(2, {1.3, 0.9, 0.9, 0.9}));
  EXPECT_DOUBLE_EQ(integral(rf), 1.0);
  EXPECT_EQ(apply(op, rf), rf);
  EXPECT_THROW(apply(op, GridFunction(1, {-1.0, 0.5})), domain_error);
  EXPECT_THROW(apply(op, GridFunction::constant(1.5, 1)), domain_error);
}

TEST(ComposedG, IsDoublingAfterRetraction) {
  gen::Source src(9);
  const auto g = composed_g();
  for (int i = 0; i < 20; ++i) {
    const GridFunction f = c0_point(src, 6);
    EXPECT_EQ(apply(g, f), apply(doubling_shift(), apply(normalizing_retraction(), f)));
  }
}

TEST(CtShift, ShiftsAndGuardsTheTruncation) {
  const auto op = ct_shift(1.5);
  const CoordPoint v2 = CoordPoint::vertex(1.5, 4, 2);
  EXPECT_EQ(apply(op, v2), CoordPoint::vertex(1.5, 4, 3));
  EXPECT_THROW(apply(op, CoordPoint::vertex(1.5, 4, 4)), domain_error);
  EXPECT_THROW(apply(op, CoordPoint(1.5, {0.5, 0.0, 0.0, 0.0})), domain_error);
  EXPECT_THROW(apply(op, CoordPoint::vertex(1.25, 4, 1)), domain_error);
  EXPECT_EQ(horizon(op, v2), std::optional<std::size_t>(2));
  EXPECT_THROW(ct_shift(2.0), std::invalid_argument);
}

TEST(CtShift, LipschitzIsTwoOverT) {
  // vertex 1 has norm t-1 but its image has norm 1
  for (double t : {1.1, 1.25, 1.5, 1.75, 1.9}) {
    const auto op = ct_shift(t);
    const CoordPoint a = CoordPoint::vertex(t, 16, 1);
    const CoordPoint b = CoordPoint::vertex(t, 16, 2);
    const double ratio = distance(apply(op, a), apply(op, b)) / distance(a, b);
    EXPECT_NEAR(ratio, 2.0 / t, 1e-12);
    EXPECT_NEAR(op.lipschitz_exact(1), 2.0 / t, 1e-15);
  }
}

TEST(Lipschitz, SampledNeverExceedsClosedForm) {
  const auto body = cone_hull(0.0, 8);
  for (const auto& op : {doubling_shift(), composed_g(), cyclic_shift()}) {
    for (int n = 1; n <= 4; ++n) {
      const double est = lipschitz_estimate(op, n, Sampler<GridFunction>(body.sample), 16, 100);
      EXPECT_LE(est, op.lipschitz_exact(n) + 1e-9) << op.name << " n=" << n;
      EXPECT_GT(est, 0.0);
    }
  }
}

TEST(Lipschitz, ProfileRunningMeans) {
  const auto prof = iterate_lipschitz_profile<CoordPoint>(ct_shift(1.25), 8, {}, true);
  EXPECT_TRUE(prof.exact);
  ASSERT_EQ(prof.constants.size(), 8u);
  for (double m : prof.running_means) EXPECT_DOUBLE_EQ(m, 1.6);
  EXPECT_DOUBLE_EQ(prof.s_value, 1.6);
  EXPECT_THROW(iterate_lipschitz_profile<CoordPoint>(ct_shift(1.25), 0, {}, true), std::invalid_argument);
}

TEST(Lipschitz, DegeneratePairsAreReported) {
  const std::vector<std::pair<GridFunction, GridFunction>> pairs{{GridFunction::zero(2), GridFunction::zero(2)}};
  EXPECT_THROW(lipschitz_estimate(cyclic_shift(), 1, std::span<const std::pair<GridFunction, GridFunction>>(pairs)),
               estimation_error);
}

TEST(CesaroMeans, BudgetAndValidation) {
  EXPECT_THROW(cesaro_means(cyclic_shift(), GridFunction::zero(2), 0), std::invalid_argument);
  const auto id = identity_operator<GridFunction>();
  const GridFunction f(1, {0.25, 0.75});
  for (const auto& z : cesaro_means(id, f, 5)) EXPECT_EQ(z, f);
}

TEST(OperatorProperty, AffinityOnRandomPairs) {
  gen::Source src(41);
  for (const auto& op : grid_operators()) {
    for (int i = 0; i < 120; ++i) {
      const GridFunction x = c0_point(src, 6);
      const GridFunction y = c0_point(src, 6);
      const double lambda = src.uniform(0.0, 1.0);
      EXPECT_LE(affinity_defect(op, x, y, lambda), 1e-12) << op.name;
    }
  }
  for (double t : {1.1, 1.5, 1.9}) {
    const auto op = ct_shift(t);
    const auto body = ct_simplex(t, 32);
    for (std::uint64_t i = 0; i < 100; ++i)
      EXPECT_LE(affinity_defect(op, body.sample(2 * i), body.sample(2 * i + 1), 0.3), 1e-12);
  }
}

TEST(OperatorProperty, CesaroAgreesWithNaiveSums) {
  gen::Source src(77);
  for (const auto& op : grid_operators()) {
    const GridFunction x0 = c0_point(src, 12);
    const auto means = cesaro_means(op, x0, 10);
    for (std::size_t s = 1; s <= 10; ++s)
      EXPECT_LE(l1_norm(means[s - 1] - oracle::naive_cesaro(op, x0, s)), 1e-12) << op.name;
  }
}

TEST(OperatorProperty, ResidualIdentity) {
  // ||z_s - T z_s|| = ||T x0 - T^{s+1} x0|| / s for affine T
  gen::Source src(123);
  for (const auto& op : grid_operators()) {
    for (int start = 0; start < 20; ++start) {
      const GridFunction x0 = c0_point(src, 8);
      const auto orb = orbit(op, x0, 65);
      const auto means = cesaro_means(op, x0, 64);
      for (std::size_t s = 1; s <= 64; ++s) {
        const GridFunction lhs = (means[s - 1] - op.map(means[s - 1])) -
                                 (orb[0] - orb[s]) / static_cast<double>(s);
        EXPECT_LE(l1_norm(lhs), 1e-9) << op.name << " s=" << s;
      }
    }
  }
  for (double t : {1.1, 1.5, 1.9}) {
    const auto op = ct_shift(t);
    const auto body = ct_simplex(t, 160);
    for (std::uint64_t start = 0; start < 20; ++start) {
      const CoordPoint x0 = body.sample(start);
      const auto orb = orbit(op, x0, 65);
      const auto means = cesaro_means(op, x0, 64);
      for (std::size_t s = 1; s <= 64; ++s) {
        const CoordPoint lhs = (means[s - 1] - op.map(means[s - 1])) - (orb[0] - orb[s]) / static_cast<double>(s);
        EXPECT_LE(norm(lhs), 1e-9);
      }
    }
  }
}
