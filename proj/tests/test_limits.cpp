#include <gtest/gtest.h>

#include <cmath>

#include "exolim/limits.hpp"

using namespace exolim;

TEST(Limits, ZValuesOfBothConventions) {
  EXPECT_NEAR(ConfidenceConvention{}.z(), 1.959963985, 1e-8);
  EXPECT_NEAR((ConfidenceConvention{0.95, Sidedness::one_sided}.z()), 1.644853627, 1e-8);
  EXPECT_NEAR((ConfidenceConvention{0.90, Sidedness::two_sided}.z()), 1.644853627, 1e-8);
  EXPECT_THROW((ConfidenceConvention{1.2, Sidedness::two_sided}.z()), std::invalid_argument);
}

TEST(Limits, BoundAddsStatisticalAndLargerSystematicInQuadrature) {
  const double b = upper_limit(-1.0, 3.0, -4.0, 2.0);
  EXPECT_NEAR(b, 1.0 + 1.959963985 * 5.0, 1e-8);
  EXPECT_THROW(upper_limit(0.0, -1.0, 0.0, 0.0), std::invalid_argument);
}

TEST(Limits, CouplingEstimateRejectsAVanishingKernel) {
  const KernelConstant k{InteractionKind::av, 1e-4, 2e10, 1e7};
  const auto e = coupling_estimate(1e-12, 2e-12, k);
  EXPECT_NEAR(e.value, 5e-23, 1e-36);
  EXPECT_NEAR(e.sigma_stat, 1e-22, 1e-36);
  EXPECT_THROW(coupling_estimate(1e-12, 1e-12, KernelConstant{InteractionKind::av, 1e-4, 1.0, 1.0}), LimitError);
}

TEST(Limits, RangeToMass) {
  // hbar c = 197.327 eV nm
  EXPECT_NEAR(lambda_to_mass(330e-6), 197.3269804e-9 / 330e-6, 1e-12);
  EXPECT_NEAR(lambda_to_mass(1e-6), 0.1973269804, 1e-9);
  EXPECT_THROW(lambda_to_mass(0.0), std::invalid_argument);
}

TEST(Limits, LogGridHasTheRequestedDensity) {
  const auto g = log_grid(1e-5, 1e-3, 40);
  ASSERT_EQ(g.size(), 81u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-5);
  EXPECT_NEAR(g.back(), 1e-3, 1e-18);
  EXPECT_NEAR(g[40], 1e-4, 1e-18);
  EXPECT_THROW(log_grid(1e-3, 1e-5), std::invalid_argument);
}

TEST(Limits, CurveRejectsBadGridsAndKeepsGridOrder) {
  BudgetContext ctx;
  ctx.mc.pair_count = 1u << 12;
  ctx.mc.time_samples = 16;
  const ChannelMeasurement m{0.1e-12, 1.4e-12, 1000};
  const std::vector<SystematicParameter> rows{{"Calib", SystematicKind::calibration, 2.29e5, 0.03e5}};
  EXPECT_THROW(exclusion_curve(InteractionKind::av, {1e-4, 5e-5}, m, rows, ctx), std::invalid_argument);
  EXPECT_THROW(exclusion_curve(InteractionKind::av, {1e-7}, m, rows, ctx), std::invalid_argument);
  EXPECT_THROW(exclusion_curve(InteractionKind::av, {1e-4}, ChannelMeasurement{}, rows, ctx), LimitError);
  const auto c = exclusion_curve(InteractionKind::av, {3e-5, 1e-4, 3e-4}, m, rows, ctx);
  ASSERT_EQ(c.points.size(), 3u);
  for (const auto& p : c.points) EXPECT_TRUE(p.ok()) << p.error;
  // A larger range gives a larger kernel, hence a tighter bound.
  EXPECT_GT(c.points[0].bound, c.points[1].bound);
  EXPECT_GT(c.points[1].bound, c.points[2].bound);
  EXPECT_NEAR(c.points[1].mass, lambda_to_mass(1e-4), 1e-15);
}

TEST(Limits, CoverageOfAShortSyntheticStudy) {
  HarmonicCoefficients unit;
  unit.n_max = 1;
  unit.a = {1e-12};
  unit.b = {0.0};
  unit.a_error = {0.0};
  unit.b_error = {0.0};
  NoiseModel noise;
  noise.duration = 30.0;
  const auto r = coverage_study(unit, InteractionKind::av, LockInChain{}, noise, 200);
  EXPECT_NEAR(r.coverage, 0.95, 0.05);
  EXPECT_GT(r.injected, 0.0);
}
