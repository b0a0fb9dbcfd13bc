#pragma once

// Second-stage lock-in at the vibration frequency. The first (FM) stage is
// folded into a calibration constant C (V/T) and a white noise floor.
//
// Reference r(t) = cos(w t + phi). Outputs over an integer number of periods
//   X = 2 <s(t) cos(w t + phi)>,   Y = 2 <s(t) sin(w t + phi)>.
// A signal delayed by the chain, s = C [a sin(w t + phi) + b cos(w t + phi)],
// gives X = C b and Y = C a.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "exolim/geometry.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/integrator.hpp"
#include "exolim/parallel.hpp"
#include "exolim/random.hpp"
#include "exolim/stats.hpp"

namespace exolim {

/// Which demodulated output carries B_AV. The AV field is the sine
/// component of the vibration (it follows the velocity), so with the
/// reference above it lands on the sine-referenced output Y.
enum class ChannelConvention {
  quadrature_is_av,  // Y -> B_AV, X -> B_SP
  in_phase_is_av,    // X -> B_AV, Y -> B_SP
};

inline std::string_view to_string(ChannelConvention c) {
  return c == ChannelConvention::quadrature_is_av ? "quadrature_is_av" : "in_phase_is_av";
}

inline ChannelConvention parse_channel_convention(std::string_view s) {
  if (s == "quadrature_is_av") return ChannelConvention::quadrature_is_av;
  if (s == "in_phase_is_av") return ChannelConvention::in_phase_is_av;
  throw std::invalid_argument("unknown channel convention '" + std::string(s) + "'");
}

inline double degrees(double deg) { return deg * std::numbers::pi / 180.0; }

struct LockInChain {
  double calibration_constant{2.29e5};  // V/T
  double phase_delay{degrees(-32.0)};   // rad
  double reference_frequency{1953.0};   // Hz
  ChannelConvention convention{ChannelConvention::quadrature_is_av};
};

inline void validate(const LockInChain& c) {
  if (!(c.calibration_constant > 0.0) || !std::isfinite(c.calibration_constant)) {
    throw std::invalid_argument("calibration constant must be positive");
  }
  if (!(c.phase_delay > -std::numbers::pi && c.phase_delay <= std::numbers::pi)) {
    throw std::invalid_argument("phase delay must lie in (-pi, pi]");
  }
  if (!(c.reference_frequency > 0.0)) throw std::invalid_argument("reference frequency must be positive");
}

struct Quadratures {
  double x{0.0};  // in-phase, V
  double y{0.0};  // quadrature, V
};

struct ChannelFields {
  double b_av{0.0};  // T
  double b_sp{0.0};  // T
};

class LockInError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Demodulates samples taken at `sample_rate` starting at t = 0. The record
/// must span a whole number of reference periods.
inline Quadratures demodulate(std::span<const double> samples, double sample_rate, const LockInChain& chain) {
  validate(chain);
  if (samples.empty()) throw LockInError("demodulate: empty record");
  if (!(sample_rate > 0.0)) throw LockInError("demodulate: sample rate must be positive");
  const double periods = static_cast<double>(samples.size()) * chain.reference_frequency / sample_rate;
  const double whole = std::round(periods);
  if (whole < 1.0 || std::abs(periods - whole) > 1e-9 * std::max(1.0, periods)) {
    throw LockInError("demodulate: record must contain an integer number of reference periods");
  }
  const double w = 2.0 * std::numbers::pi * chain.reference_frequency;
  CompensatedSum sx;
  CompensatedSum sy;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double phase = w * static_cast<double>(k) / sample_rate + chain.phase_delay;
    sx.add(samples[k] * std::cos(phase));
    sy.add(samples[k] * std::sin(phase));
  }
  const double scale = 2.0 / static_cast<double>(samples.size());
  return {scale * sx.value(), scale * sy.value()};
}

inline double volts_to_field(double volts, const LockInChain& chain) { return volts / chain.calibration_constant; }

/// Maps (X, Y) volts to (B_AV, B_SP) tesla under the chain's convention.
inline ChannelFields to_fields(const Quadratures& q, const LockInChain& chain) {
  const double x = volts_to_field(q.x, chain);
  const double y = volts_to_field(q.y, chain);
  return chain.convention == ChannelConvention::quadrature_is_av ? ChannelFields{y, x} : ChannelFields{x, y};
}

/// C = slope * gamma_e / (2 pi); slope in V per Hz of detuning.
inline double slope_to_calibration(double slope, double gamma_e) {
  if (!(slope > 0.0)) throw std::invalid_argument("slope must be positive");
  if (!(gamma_e > 0.0)) throw std::invalid_argument("gyromagnetic ratio must be positive");
  return slope * gamma_e / (2.0 * std::numbers::pi);
}

struct PhaseEstimate {
  double phase{0.0};  // rad
  double error{0.0};  // rad
  double response_amplitude{0.0};  // V
  double gain{0.0};   // V/T, response amplitude over injected amplitude
};

/// Phase of the chain from a calibration run: a field B cos(w t) is
/// injected and demodulated with zero reference phase, giving
/// X = C B cos(phi), Y = -C B sin(phi). `noise` is the per-channel
/// standard error of X and Y in volts.
inline PhaseEstimate calibrate_phase(double injected_amplitude, const Quadratures& response, double noise) {
  if (!(injected_amplitude > 0.0)) throw std::invalid_argument("injected amplitude must be positive");
  if (!(noise >= 0.0)) throw std::invalid_argument("response noise must be non-negative");
  const double amplitude = std::hypot(response.x, response.y);
  if (!(amplitude > 3.0 * noise) || amplitude == 0.0) {
    throw LockInError("calibration response below the noise floor (amplitude < 3 sigma)");
  }
  PhaseEstimate e;
  e.phase = std::atan2(-response.y, response.x);
  e.error = noise / amplitude;
  e.response_amplitude = amplitude;
  e.gain = amplitude / injected_amplitude;
  return e;
}

enum class SynthesisMode {
  blocks,    // draw each block's demodulated output directly
  waveform,  // sample s(t), add noise, demodulate every block
};

inline std::string_view to_string(SynthesisMode m) { return m == SynthesisMode::blocks ? "blocks" : "waveform"; }

inline SynthesisMode parse_synthesis_mode(std::string_view s) {
  if (s == "blocks") return SynthesisMode::blocks;
  if (s == "waveform") return SynthesisMode::waveform;
  throw std::invalid_argument("unknown synthesis mode '" + std::string(s) + "'");
}

struct NoiseModel {
  double amplitude_spectral_density{1.4e-9};  // T/sqrt(Hz), one-sided
  double duration{291.9 * 3600.0};            // s
  std::uint64_t seed{20220521};
  double block_time{10e-3};                   // s, rounded to whole periods
  SynthesisMode mode{SynthesisMode::blocks};
  int samples_per_period{64};                 // waveform mode
  std::size_t recorded_blocks{0};             // per-block outputs kept
  std::size_t histogram_bins{120};
};

inline void validate(const NoiseModel& n) {
  if (!(n.amplitude_spectral_density >= 0.0)) throw std::invalid_argument("noise ASD must be non-negative");
  if (!(n.duration > 0.0)) throw std::invalid_argument("run duration must be positive");
  if (!(n.block_time > 0.0)) throw std::invalid_argument("block time must be positive");
  if (n.samples_per_period < 4) throw std::invalid_argument("samples_per_period must be at least 4");
  if (n.histogram_bins < 1) throw std::invalid_argument("histogram needs at least one bin");
}

struct ChannelSummary {
  GaussianFit fit;        // from the running moments
  GaussianFit histogram_fit;
  Histogram histogram;
};

struct MeasurementResult {
  ChannelSummary av;
  ChannelSummary sp;
  std::uint64_t block_count{0};
  int periods_per_block{0};
  double block_time{0.0};  // s
  double expected_block_sigma{0.0};  // T per channel
  std::vector<ChannelFields> blocks;  // first recorded_blocks outputs
};

inline constexpr std::uint64_t kNoiseDomain = 0x7015E;

namespace detail {

/// Blocks are grouped into this many fixed chunks, each with its own stream.
inline constexpr std::size_t kNoiseChunks = 256;

/// Signal voltage C * B(t + phi / w) on a uniform grid of one period,
/// rebuilt from the harmonic content of the true field.
inline std::vector<double> delayed_signal(const std::vector<HarmonicCoefficients>& fields, const LockInChain& chain,
                                          int samples_per_period) {
  std::vector<double> s(static_cast<std::size_t>(samples_per_period), 0.0);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double psi = 2.0 * std::numbers::pi * static_cast<double>(k) / samples_per_period;
    for (const auto& c : fields) {
      double b = c.dc;
      for (int n = 1; n <= c.n_max; ++n) {
        const double arg = n * (psi + chain.phase_delay);
        b += c.sine(n) * std::sin(arg) + c.cosine(n) * std::cos(arg);
      }
      s[k] += chain.calibration_constant * b;
    }
  }
  return s;
}

}  // namespace detail

/// Synthetic measurement from known true fields (harmonic content of each
/// contribution): chain, white noise, block demodulation, Gaussian fits.
inline MeasurementResult synthesize_from_fields(const std::vector<HarmonicCoefficients>& fields,
                                                const LockInChain& chain, const NoiseModel& noise,
                                                unsigned threads = 1) {
  validate(chain);
  validate(noise);

  const double f = chain.reference_frequency;
  const int periods = std::max(1, static_cast<int>(std::lround(noise.block_time * f)));
  const double t_block = periods / f;
  const auto block_count = static_cast<std::uint64_t>(std::floor(noise.duration / t_block));
  if (block_count < 1) throw std::invalid_argument("run shorter than one demodulation block");

  const int spp = noise.samples_per_period;
  const auto one_period = detail::delayed_signal(fields, chain, spp);
  const double fs = spp * f;
  const auto clean = to_fields(demodulate(one_period, fs, chain), chain);
  const double block_sigma = noise.amplitude_spectral_density / std::sqrt(t_block);  // T
  const double sample_sigma = noise.amplitude_spectral_density * std::sqrt(fs / 2.0) * chain.calibration_constant;

  const auto make_hist = [&](double centre) {
    const double half_range = block_sigma > 0.0 ? 6.0 * block_sigma : std::max(1e-6 * std::abs(centre), 1e-18);
    return Histogram(centre - half_range, centre + half_range, noise.histogram_bins);
  };

  struct Chunk {
    RunningStats av, sp;
    Histogram hav, hsp;
    std::vector<ChannelFields> recorded;
  };
  const std::size_t chunks = static_cast<std::size_t>(std::min<std::uint64_t>(detail::kNoiseChunks, block_count));
  std::vector<Chunk> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::uint64_t first = block_count * c / chunks;
    const std::uint64_t last = block_count * (c + 1) / chunks;
    Chunk& part = parts[c];
    part.hav = make_hist(clean.b_av);
    part.hsp = make_hist(clean.b_sp);
    CounterRng rng(noise.seed, stream_id(kNoiseDomain, c));
    std::vector<double> wave(static_cast<std::size_t>(spp * periods));
    for (std::uint64_t b = first; b < last; ++b) {
      ChannelFields out;
      if (noise.mode == SynthesisMode::blocks) {
        out.b_av = clean.b_av + block_sigma * rng.normal();
        out.b_sp = clean.b_sp + block_sigma * rng.normal();
      } else {
        for (std::size_t k = 0; k < wave.size(); ++k) {
          wave[k] = one_period[k % static_cast<std::size_t>(spp)] + sample_sigma * rng.normal();
        }
        out = to_fields(demodulate(wave, fs, chain), chain);
      }
      part.av.add(out.b_av);
      part.sp.add(out.b_sp);
      part.hav.add(out.b_av);
      part.hsp.add(out.b_sp);
      if (b < noise.recorded_blocks) part.recorded.push_back(out);
    }
  });

  MeasurementResult r;
  r.block_count = block_count;
  r.periods_per_block = periods;
  r.block_time = t_block;
  r.expected_block_sigma = block_sigma;
  RunningStats av;
  RunningStats sp;
  r.av.histogram = make_hist(clean.b_av);
  r.sp.histogram = make_hist(clean.b_sp);
  for (const auto& p : parts) {
    av.merge(p.av);
    sp.merge(p.sp);
    r.av.histogram.merge(p.hav);
    r.sp.histogram.merge(p.hsp);
    r.blocks.insert(r.blocks.end(), p.recorded.begin(), p.recorded.end());
  }
  r.av.fit = gaussian_fit(av);
  r.sp.fit = gaussian_fit(sp);
  r.av.histogram_fit = fit_histogram(r.av.histogram);
  r.sp.histogram_fit = fit_histogram(r.sp.histogram);
  return r;
}

/// End-to-end synthetic measurement for a set of coupling hypotheses.
inline MeasurementResult synthesize_run(const std::vector<CouplingHypothesis>& hypotheses,
                                        const ExperimentGeometry& g, const LockInChain& chain,
                                        const NoiseModel& noise, const MCConfig& mc = {}, unsigned threads = 1) {
  validate(g);
  std::vector<HarmonicCoefficients> fields;
  for (const auto& h : hypotheses) {
    if (h.coupling == 0.0) continue;
    fields.push_back(fourier_coefficients(field_time_series(h, g, mc), 3));
  }
  return synthesize_from_fields(fields, chain, noise, threads);
}

}  // namespace exolim
