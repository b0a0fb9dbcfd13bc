#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "exolim/diamagnetism.hpp"
#include "exolim/random.hpp"

using namespace exolim;

namespace {

const SourceSphere kSphere{};
const Vec3 kBias{0.0, 2e-3 * std::sqrt(2.0 / 3.0), 2e-3 / std::sqrt(3.0)};

Vec3 exterior_point(CounterRng& rng, double min_gap, double max_gap) {
  const double mu = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double d = kSphere.radius * (1.0 + min_gap + (max_gap - min_gap) * rng.uniform());
  const double s = std::sqrt(1.0 - mu * mu);
  return Vec3{s * std::cos(phi), s * std::sin(phi), mu} * d;
}

}  // namespace

TEST(Diamagnetism, DipoleFieldHasTheClosedForm) {
  // On the axis of a uniformly magnetised ball, B = mu0 2 m / (4 pi r^3) with
  // m = chi V B0 / mu0 for |chi| << 1.
  const Vec3 b0{0.0, 0.0, 1e-3};
  const Vec3 p{0.0, 0.0, 3.0 * kSphere.radius};
  const Vec3 b = analytic_dipole_field(p, {}, kSphere, b0);
  const double r = norm(p);
  const double expected = 2.0 * kSphere.susceptibility * kSphere.volume() * 1e-3 / (4.0 * std::numbers::pi * r * r * r);
  EXPECT_NEAR(b.z, expected, 1e-12 * std::abs(expected));
  EXPECT_NEAR(b.x, 0.0, 1e-30);
}

TEST(Diamagnetism, ShellQuadratureMatchesTheDipoleNearTheSurface) {
  CounterRng rng(3, 9);
  DiamagOptions opt;
  opt.method = DiamagMethod::shell_quadrature;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = exterior_point(rng, 1e-3, 0.5);
    const Vec3 q = induced_field_at(p, {}, kSphere, kBias, opt);
    const Vec3 d = analytic_dipole_field(p, {}, kSphere, kBias);
    worst = std::max(worst, norm(q - d) / norm(d));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Diamagnetism, MonteCarloVolumeIntegralAgrees) {
  DiamagOptions opt;
  opt.method = DiamagMethod::monte_carlo;
  opt.mc_samples = 200000;
  const Vec3 p{0.2e-3, -0.1e-3, 1.5e-3};
  const Vec3 q = induced_field_at(p, {}, kSphere, kBias, opt);
  const Vec3 d = analytic_dipole_field(p, {}, kSphere, kBias);
  EXPECT_LT(norm(q - d) / norm(d), 0.02);
}

TEST(Diamagnetism, RejectsInteriorPoints) {
  EXPECT_THROW(induced_field_at({0.0, 0.0, 0.5 * kSphere.radius}, {}, kSphere, kBias), DiamagError);
  SourceSphere inert = kSphere;
  inert.susceptibility = 0.0;
  EXPECT_EQ(norm(induced_field_at({0.0, 0.0, 2e-3}, {}, inert, kBias)), 0.0);
}

TEST(Diamagnetism, GradedRuleIntegratesSmoothFunctions) {
  const auto rule = detail::graded_rule(2.0, 1e-4, 8, 0.3);
  double len = 0.0;
  double cube = 0.0;
  double peak = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    len += rule.weights[i];
    cube += rule.weights[i] * std::pow(rule.nodes[i], 3);
    peak += rule.weights[i] / std::pow(rule.nodes[i] + 1e-4, 2);
  }
  EXPECT_NEAR(len, 2.0, 1e-13);
  EXPECT_NEAR(cube, 4.0, 1e-12);
  EXPECT_NEAR(peak, 1.0 / 1e-4 - 1.0 / (2.0 + 1e-4), 1e-6 * 1e4);
}

// Closed-form dipole averaged with a 48 x 48 x 16 Gauss-Legendre slab rule,
// cross-checked against the graded shell quadrature.
TEST(Diamagnetism, SensorAverageOverTheCycle) {
  const ExperimentGeometry g;
  const auto e = diamag_vibration_extent(g, BiasField{});
  EXPECT_NEAR(e.min * 1e12, -0.81383, 2e-5);
  EXPECT_NEAR(e.max * 1e12, -0.80867, 2e-5);
  EXPECT_NEAR(e.peak_to_peak * 1e12, 0.005161, 2e-6);
  EXPECT_NEAR(std::abs(e.first_sine), 0.0, 1e-20);
}

TEST(Diamagnetism, ShellQuadratureSensorAverageMatchesTheDipole) {
  const ExperimentGeometry g;
  DiamagOptions coarse;
  coarse.slab_x_nodes = 8;
  coarse.slab_y_nodes = 8;
  coarse.slab_z_nodes = 4;
  DiamagOptions shell = coarse;
  shell.method = DiamagMethod::shell_quadrature;
  shell.nodes_per_panel = 6;
  shell.azimuthal_nodes = 24;
  const double a = diamag_sensor_average(g, BiasField{}, 0.0, coarse);
  const double b = diamag_sensor_average(g, BiasField{}, 0.0, shell);
  EXPECT_NEAR(b, a, 1e-4 * std::abs(a));
}

TEST(Diamagnetism, MisalignmentScanIncludesTheCentredPoint) {
  const ExperimentGeometry g;
  const auto scan = misalignment_scan(g, BiasField{}, 10e-6, 3);
  ASSERT_EQ(scan.points.size(), 9u);
  const auto& centre = scan.points[4];
  EXPECT_EQ(centre.offset_x, 0.0);
  EXPECT_EQ(centre.offset_y, 0.0);
  EXPECT_GE(scan.max_peak_to_peak, centre.extent.peak_to_peak);
  EXPECT_NEAR(scan.max_peak_to_peak * 1e12, 0.9884, 5e-4);
  EXPECT_NEAR(scan.max_first_cosine * 1e12, 0.4942, 5e-4);
}

TEST(Diamagnetism, MapIsMirrorSymmetricInX) {
  const ExperimentGeometry g;
  DiamagOptions opt;
  opt.slab_z_nodes = 4;
  const auto m = diamag_map(g, BiasField{}, 0.0, 5, 4, opt);
  ASSERT_EQ(m.values.size(), 20u);
  for (std::size_t j = 0; j < m.y.size(); ++j) {
    EXPECT_NEAR(m.at(0, j), m.at(4, j), 1e-9 * std::abs(m.at(0, j)));
  }
}
