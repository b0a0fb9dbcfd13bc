#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "exolim/lockin.hpp"

using namespace exolim;

namespace {

HarmonicCoefficients first_harmonic(double a, double b) {
  HarmonicCoefficients c;
  c.n_max = 1;
  c.modulation_frequency = 1953.0;
  c.a = {a};
  c.b = {b};
  c.a_error = {0.0};
  c.b_error = {0.0};
  return c;
}

}  // namespace

TEST(LockIn, DemodulationSplitsSineAndCosine) {
  LockInChain chain;
  const double f = chain.reference_frequency;
  const int spp = 50;
  const double fs = spp * f;
  std::vector<double> s(spp * 7);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double ph = 2.0 * std::numbers::pi * f * k / fs + chain.phase_delay;
    s[k] = 0.3 + 2.0 * std::sin(ph) - 0.7 * std::cos(ph) + 0.2 * std::sin(2 * ph);
  }
  const auto q = demodulate(s, fs, chain);
  EXPECT_NEAR(q.y, 2.0, 1e-12);
  EXPECT_NEAR(q.x, -0.7, 1e-12);
  const auto b = to_fields(q, chain);
  EXPECT_NEAR(b.b_av, 2.0 / chain.calibration_constant, 1e-18);
  EXPECT_NEAR(b.b_sp, -0.7 / chain.calibration_constant, 1e-18);
  chain.convention = ChannelConvention::in_phase_is_av;
  const auto swapped = to_fields(q, chain);
  EXPECT_DOUBLE_EQ(swapped.b_av, b.b_sp);
  EXPECT_DOUBLE_EQ(swapped.b_sp, b.b_av);
}

TEST(LockIn, RequiresWholePeriods) {
  const LockInChain chain;
  std::vector<double> s(75, 1.0);
  EXPECT_THROW(demodulate(s, 50 * chain.reference_frequency, chain), LockInError);
  EXPECT_THROW(demodulate({}, 1e5, chain), LockInError);
}

TEST(LockIn, SlopeFormula) {
  const PhysicalConstants c;
  EXPECT_NEAR(slope_to_calibration(0.816e-6, c.gamma_e), 0.816e-6 * 28e9, 1e-6);
  EXPECT_THROW(slope_to_calibration(-1.0, c.gamma_e), std::invalid_argument);
}

TEST(LockIn, PhaseCalibrationRecoversTheDelay) {
  LockInChain chain;
  chain.phase_delay = 0.0;
  const double f = chain.reference_frequency;
  const double phi = degrees(-32.0);
  const double amplitude = 1e-9;
  const int spp = 64;
  std::vector<double> s(spp * 3);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double t = k / (spp * f);
    s[k] = chain.calibration_constant * amplitude * std::cos(2.0 * std::numbers::pi * f * t + phi);
  }
  const auto q = demodulate(s, spp * f, chain);
  const auto e = calibrate_phase(amplitude, q, 1e-9);
  EXPECT_NEAR(e.phase, phi, 1e-12);
  EXPECT_NEAR(e.gain, chain.calibration_constant, 1e-6 * chain.calibration_constant);
  EXPECT_THROW(calibrate_phase(amplitude, q, 1.0), LockInError);
}

TEST(LockIn, NoiselessRunReturnsTheInjectedHarmonics) {
  const LockInChain chain;
  NoiseModel noise;
  noise.amplitude_spectral_density = 0.0;
  noise.duration = 2.0;
  const auto m = synthesize_from_fields({first_harmonic(3e-12, -1e-12)}, chain, noise);
  EXPECT_NEAR(m.av.fit.mean, 3e-12, 1e-24);
  EXPECT_NEAR(m.sp.fit.mean, -1e-12, 1e-24);
  EXPECT_EQ(m.periods_per_block, 20);
  EXPECT_NEAR(m.block_time, 20.0 / 1953.0, 1e-15);
}

TEST(LockIn, BlockAndWaveformModesAgreeInDistribution) {
  const LockInChain chain;
  NoiseModel noise;
  noise.duration = 20.0;
  NoiseModel wave = noise;
  wave.mode = SynthesisMode::waveform;
  const auto fields = std::vector<HarmonicCoefficients>{first_harmonic(2e-9, 1e-9)};
  const auto b = synthesize_from_fields(fields, chain, noise);
  const auto w = synthesize_from_fields(fields, chain, wave);
  ASSERT_EQ(b.block_count, w.block_count);
  const double expected = noise.amplitude_spectral_density / std::sqrt(b.block_time);
  const double tol = 4.0 * expected / std::sqrt(2.0 * b.block_count);
  for (const auto* m : {&b, &w}) {
    EXPECT_NEAR(m->av.fit.sigma, expected, tol);
    EXPECT_NEAR(m->sp.fit.sigma, expected, tol);
    EXPECT_NEAR(m->av.fit.mean, 2e-9, 4.0 * m->av.fit.standard_error);
    EXPECT_NEAR(m->sp.fit.mean, 1e-9, 4.0 * m->sp.fit.standard_error);
  }
}

TEST(LockIn, HistogramFitAgreesWithMoments) {
  const LockInChain chain;
  NoiseModel noise;
  noise.duration = 600.0;
  const auto m = synthesize_from_fields({}, chain, noise);
  EXPECT_NEAR(m.av.histogram_fit.mean, m.av.fit.mean, 0.02 * m.av.fit.sigma);
  EXPECT_NEAR(m.av.histogram_fit.sigma, m.av.fit.sigma, 0.01 * m.av.fit.sigma);
}

TEST(LockIn, SynthesisIsThreadInvariant) {
  const LockInChain chain;
  NoiseModel noise;
  noise.duration = 60.0;
  noise.recorded_blocks = 10;
  const auto a = synthesize_from_fields({}, chain, noise, 1);
  const auto b = synthesize_from_fields({}, chain, noise, 4);
  EXPECT_EQ(a.av.fit.mean, b.av.fit.mean);
  EXPECT_EQ(a.sp.fit.sigma, b.sp.fit.sigma);
  ASSERT_EQ(a.blocks.size(), 10u);
  for (std::size_t i = 0; i < a.blocks.size(); ++i) EXPECT_EQ(a.blocks[i].b_av, b.blocks[i].b_av);
}

TEST(LockIn, ValidatesInputs) {
  LockInChain chain;
  chain.calibration_constant = -1.0;
  EXPECT_THROW(validate(chain), std::invalid_argument);
  NoiseModel noise;
  noise.duration = 0.0;
  EXPECT_THROW(validate(noise), std::invalid_argument);
  noise = {};
  noise.duration = 1e-3;
  EXPECT_THROW(synthesize_from_fields({}, LockInChain{}, noise), std::invalid_argument);
  EXPECT_EQ(parse_channel_convention("in_phase_is_av"), ChannelConvention::in_phase_is_av);
  EXPECT_THROW(parse_synthesis_mode("fast"), std::invalid_argument);
}
