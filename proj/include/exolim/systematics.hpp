#pragma once

// Systematic error budget on the inferred coupling g_hat = B / K. Each row
// maps the uncertainty of one input into an interval (lower <= 0 <= upper)
// of corrections to g_hat; rows are combined in quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "exolim/diamagnetism.hpp"
#include "exolim/geometry.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/integrator.hpp"
#include "exolim/kernels.hpp"
#include "exolim/lockin.hpp"
#include "exolim/random.hpp"
#include "exolim/stats.hpp"

namespace exolim {

enum class SystematicKind { kernel, field_offset, phase, calibration };

inline std::string_view to_string(SystematicKind k) {
  switch (k) {
    case SystematicKind::kernel: return "kernel";
    case SystematicKind::field_offset: return "field_offset";
    case SystematicKind::phase: return "phase";
    case SystematicKind::calibration: return "calibration";
  }
  return "kernel";
}

inline SystematicKind parse_systematic_kind(std::string_view s) {
  if (s == "kernel") return SystematicKind::kernel;
  if (s == "field_offset") return SystematicKind::field_offset;
  if (s == "phase") return SystematicKind::phase;
  if (s == "calibration") return SystematicKind::calibration;
  throw std::invalid_argument("unknown systematic kind '" + std::string(s) + "'");
}

/// Geometry input perturbed by a kernel row.
enum class KernelTarget { min_gap, radius, thickness, amplitude, nv_angle, deviation };

inline std::string_view to_string(KernelTarget t) {
  switch (t) {
    case KernelTarget::min_gap: return "d0";
    case KernelTarget::radius: return "radius";
    case KernelTarget::thickness: return "thickness";
    case KernelTarget::amplitude: return "amplitude";
    case KernelTarget::nv_angle: return "theta";
    case KernelTarget::deviation: return "deviation";
  }
  return "d0";
}

inline KernelTarget parse_kernel_target(std::string_view s) {
  if (s == "d0") return KernelTarget::min_gap;
  if (s == "radius") return KernelTarget::radius;
  if (s == "thickness") return KernelTarget::thickness;
  if (s == "amplitude") return KernelTarget::amplitude;
  if (s == "theta") return KernelTarget::nv_angle;
  if (s == "deviation") return KernelTarget::deviation;
  throw std::invalid_argument("unknown kernel target '" + std::string(s) + "'");
}

/// Where a field-offset row takes its Delta B from.
enum class OffsetSource {
  fixed,                 // `mean` is Delta B in tesla
  diamag_first_harmonic, // max demodulated diamagnetic harmonic over the misalignment scan
  diamag_peak_to_peak,   // max peak-to-peak over the scan
};

inline std::string_view to_string(OffsetSource s) {
  switch (s) {
    case OffsetSource::fixed: return "fixed";
    case OffsetSource::diamag_first_harmonic: return "diamag_first_harmonic";
    case OffsetSource::diamag_peak_to_peak: return "diamag_peak_to_peak";
  }
  return "fixed";
}

inline OffsetSource parse_offset_source(std::string_view s) {
  if (s == "fixed") return OffsetSource::fixed;
  if (s == "diamag_first_harmonic") return OffsetSource::diamag_first_harmonic;
  if (s == "diamag_peak_to_peak") return OffsetSource::diamag_peak_to_peak;
  throw std::invalid_argument("unknown offset source '" + std::string(s) + "'");
}

struct SystematicParameter {
  std::string name;
  SystematicKind kind{SystematicKind::kernel};
  double mean{0.0};   // SI units (m, rad, V/T, T)
  double sigma{0.0};
  KernelTarget target{KernelTarget::min_gap};        // kernel rows
  OffsetSource offset_source{OffsetSource::fixed};   // field_offset rows
  std::uint64_t sample_count{100000};
};

struct SystematicEntry {
  std::string name;
  SystematicKind kind{SystematicKind::kernel};
  double value{0.0};  // parameter mean (or Delta B for offsets)
  double sigma{0.0};
  double lower{0.0};  // Delta g, <= 0
  double upper{0.0};  // Delta g, >= 0
  bool noise_limited{false};
};

struct SystematicBudget {
  InteractionKind kind{InteractionKind::av};
  double range{0.0};
  double measured_field{0.0};  // T
  double kernel_constant{0.0};
  double coupling_estimate{0.0};
  std::vector<SystematicEntry> entries;
  double total_lower{0.0};
  double total_upper{0.0};
  /// sqrt(sum max(|lower|, upper)^2)
  double total_symmetric{0.0};
};

/// Inputs shared by every row of one budget.
struct BudgetContext {
  InteractionKind kind{InteractionKind::av};
  double range{330e-6};
  ExperimentGeometry geometry{};
  double measured_field{0.1e-12};  // T
  MCConfig mc{};                    // main kernel constant
  MCConfig sensitivity_mc{.pair_count = 1u << 18, .time_samples = 16};  // response curves
  LockInChain chain{};
  BiasField bias{};
  DiamagOptions diamag{};
  /// Precomputed misalignment scan; built on demand when absent.
  std::optional<MisalignmentScan> scan{};
  double misalignment_limit{10e-6};
  int misalignment_grid{5};
  std::uint64_t seed{20220521};
  unsigned threads{1};
};

inline constexpr std::uint64_t kSystematicsDomain = 0x5757;

namespace detail {

inline void set_target(ExperimentGeometry& g, KernelTarget t, double v) {
  switch (t) {
    case KernelTarget::min_gap: g.kinematics.min_gap = v; break;
    case KernelTarget::radius: g.sphere.radius = v; break;
    case KernelTarget::thickness: g.slab.thickness = v; break;
    case KernelTarget::amplitude: g.kinematics.amplitude = v; break;
    case KernelTarget::nv_angle: g.slab.nv_polar_angle = v; break;
    case KernelTarget::deviation: g.sphere.offset_x = v; break;
  }
}

/// K as a smooth function of a standardised parameter u = (p - mean)/sigma,
/// interpolated through nodes u = -3..3 and continued linearly outside.
class ResponseCurve {
 public:
  static constexpr int kNodes = 7;
  static constexpr double kFirst = -3.0;

  ResponseCurve(const std::array<double, kNodes>& values, double centre_relative_error)
      : spline_(values.begin(), values.end(), kFirst, 1.0),
        centre_(values[kNodes / 2]),
        centre_relative_error_(centre_relative_error) {}

  double operator()(double u) const {
    const double last = kFirst + (kNodes - 1);
    if (u < kFirst) return spline_(kFirst) + spline_.prime(kFirst) * (u - kFirst);
    if (u > last) return spline_(last) + spline_.prime(last) * (u - last);
    return spline_(u);
  }
  double centre() const { return centre_; }
  double centre_relative_error() const { return centre_relative_error_; }

 private:
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
  double centre_;
  double centre_relative_error_;
};

template <typename Setter>
ResponseCurve response_curve(const BudgetContext& ctx, double mean, double sigma, Setter&& set) {
  std::array<double, ResponseCurve::kNodes> values{};
  double centre_error = 0.0;
  for (int k = 0; k < ResponseCurve::kNodes; ++k) {
    ExperimentGeometry g = ctx.geometry;
    set(g, mean + sigma * (ResponseCurve::kFirst + k));
    const auto kc = kernel_constant(ctx.kind, ctx.range, g, ctx.sensitivity_mc);
    values[static_cast<std::size_t>(k)] = kc.value;
    if (k == ResponseCurve::kNodes / 2) centre_error = kc.relative_error();
  }
  return ResponseCurve(values, centre_error);
}

/// 16th/84th percentiles of the shifts, widened to include zero.
inline std::pair<double, double> percentile_interval(std::vector<double> shifts) {
  const double lo = percentile(shifts, 0.15865525393145707);
  const double hi = percentile(std::move(shifts), 0.8413447460685429);
  return {std::min(lo, 0.0), std::max(hi, 0.0)};
}

}  // namespace detail

/// Samples p ~ N(mean, sigma^2), maps each draw through g_hat = B / K(p) and
/// reports the 16th/84th percentile shifts from g_hat(mean). K(p) comes from
/// a response curve built with common random numbers.
inline SystematicEntry kernel_sensitivity(const SystematicParameter& p, const BudgetContext& ctx) {
  if (p.kind != SystematicKind::kernel) throw std::invalid_argument("kernel_sensitivity needs a kernel row");
  if (!(p.sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  if (p.sample_count < 1000) throw std::invalid_argument("sample_count must be at least 1000");
  SystematicEntry e{p.name, p.kind, p.mean, p.sigma};
  if (p.sigma == 0.0 || ctx.measured_field == 0.0) return e;

  const double b = ctx.measured_field;
  CounterRng rng(ctx.seed, stream_id(kSystematicsDomain, name_hash(p.name)));
  std::vector<double> shifts(p.sample_count);
  double g0 = 0.0;
  double k_rel = 0.0;
  if (p.target == KernelTarget::deviation) {
    // Lateral offsets in x and y, drawn independently; K(dx, dy) is taken
    // as separable, K0 * (Kx(dx)/K0) * (Ky(dy)/K0).
    const auto kx = detail::response_curve(ctx, p.mean, p.sigma,
                                           [](ExperimentGeometry& g, double v) { g.sphere.offset_x = v; });
    const auto ky = detail::response_curve(ctx, p.mean, p.sigma,
                                           [](ExperimentGeometry& g, double v) { g.sphere.offset_y = v; });
    const double k0 = 0.5 * (kx.centre() + ky.centre());
    g0 = b / k0;
    k_rel = kx.centre_relative_error();
    for (auto& s : shifts) {
      const double ux = rng.normal();
      const double uy = rng.normal();
      s = b / (kx(ux) * ky(uy) / k0) - g0;
    }
  } else {
    const auto curve = detail::response_curve(
        ctx, p.mean, p.sigma, [&](ExperimentGeometry& g, double v) { detail::set_target(g, p.target, v); });
    g0 = b / curve.centre();
    k_rel = curve.centre_relative_error();
    for (auto& s : shifts) s = b / curve(rng.normal()) - g0;
  }
  std::tie(e.lower, e.upper) = detail::percentile_interval(std::move(shifts));
  // The spread should dominate the relative MC error of K.
  e.noise_limited = std::max(-e.lower, e.upper) < 2.0 * k_rel * std::abs(g0);
  return e;
}

/// Delta g = Delta B / K endpoint-wise for the symmetric interval +-|Delta B|.
inline SystematicEntry field_offset_correction(const std::string& name, double delta_b, double kernel) {
  if (kernel == 0.0) throw std::invalid_argument("kernel constant is zero");
  SystematicEntry e{name, SystematicKind::field_offset, delta_b, 0.0};
  const double dg = std::abs(delta_b / kernel);
  e.lower = -dg;
  e.upper = dg;
  return e;
}

/// Reference phase error d ~ N(0, sigma^2) around the calibrated phase.
/// With X = C (b cos d - a sin d) and Y = C (a cos d + b sin d), the
/// channel of the interaction sees an effective K_eff(d) built from its own
/// first harmonic (a for AV on Y, b for SP on X) and the other quadrature
/// of the same field; g_hat(d) = B / K_eff(d).
inline SystematicEntry phase_correction(const std::string& name, double mean, double sigma, double own_harmonic,
                                        double other_harmonic, InteractionKind kind, double measured_field,
                                        std::uint64_t sample_count, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  SystematicEntry e{name, SystematicKind::phase, mean, sigma};
  if (sigma == 0.0 || measured_field == 0.0) return e;
  if (own_harmonic == 0.0) throw std::invalid_argument("phase_correction: kernel constant is zero");
  const double sign = kind == InteractionKind::av ? 1.0 : -1.0;
  const double g0 = measured_field / own_harmonic;
  CounterRng rng(seed, stream_id(kSystematicsDomain, name_hash(name)));
  std::vector<double> shifts(sample_count);
  for (auto& s : shifts) {
    const double d = sigma * rng.normal();
    const double k_eff = own_harmonic * std::cos(d) + sign * other_harmonic * std::sin(d);
    s = measured_field / k_eff - g0;
  }
  std::tie(e.lower, e.upper) = detail::percentile_interval(std::move(shifts));
  return e;
}

/// Multiplicative error of the calibration constant: Delta g = +-|g_hat| sigma_C / C.
inline SystematicEntry calibration_correction(const std::string& name, double c_mean, double c_sigma,
                                              double coupling_estimate) {
  if (!(c_mean > 0.0)) throw std::invalid_argument("calibration constant must be positive");
  if (!(c_sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  SystematicEntry e{name, SystematicKind::calibration, c_mean, c_sigma};
  const double dg = std::abs(coupling_estimate) * c_sigma / c_mean;
  e.lower = -dg;
  e.upper = dg;
  return e;
}

/// Per-side quadrature, plus the symmetric total of the larger sides.
inline SystematicBudget combine_budget(std::vector<SystematicEntry> entries) {
  if (entries.empty()) throw std::invalid_argument("combine_budget needs at least one entry");
  SystematicBudget b;
  double lo = 0.0;
  double hi = 0.0;
  double sym = 0.0;
  for (const auto& e : entries) {
    lo += e.lower * e.lower;
    hi += e.upper * e.upper;
    const double m = std::max(std::abs(e.lower), std::abs(e.upper));
    sym += m * m;
  }
  b.total_lower = -std::sqrt(lo);
  b.total_upper = std::sqrt(hi);
  b.total_symmetric = std::sqrt(sym);
  b.entries = std::move(entries);
  return b;
}

/// Default rows in the order of the published budget.
inline std::vector<SystematicParameter> default_systematic_parameters() {
  std::vector<SystematicParameter> rows;
  SystematicParameter p;
  p = {"Diamagnetism", SystematicKind::field_offset, 0.0, 0.0};
  p.offset_source = OffsetSource::diamag_first_harmonic;
  rows.push_back(p);
  p = {"theta", SystematicKind::kernel, degrees(54.7), degrees(1.3), KernelTarget::nv_angle};
  rows.push_back(p);
  p = {"Distance", SystematicKind::kernel, 9.3e-6, 0.5e-6, KernelTarget::min_gap};
  rows.push_back(p);
  p = {"Radius", SystematicKind::kernel, 978e-6, 3e-6, KernelTarget::radius};
  rows.push_back(p);
  p = {"Thickness", SystematicKind::kernel, 23e-6, 1e-6, KernelTarget::thickness};
  rows.push_back(p);
  p = {"Amplitude", SystematicKind::kernel, 718e-9, 7e-9, KernelTarget::amplitude};
  rows.push_back(p);
  p = {"Deviation", SystematicKind::kernel, 0.0, 10e-6, KernelTarget::deviation};
  rows.push_back(p);
  p = {"Phase delay", SystematicKind::phase, degrees(-32.0), degrees(9.0)};
  rows.push_back(p);
  p = {"Calib. Const.", SystematicKind::calibration, 2.29e5, 0.03e5};
  rows.push_back(p);
  return rows;
}

/// Evaluates every row for one interaction kind and range.
inline SystematicBudget build_budget(const std::vector<SystematicParameter>& rows, const BudgetContext& ctx) {
  const CouplingHypothesis unit{ctx.kind, kReferenceCoupling, ctx.range};
  const auto coeffs = fourier_coefficients(field_time_series(unit, ctx.geometry, ctx.mc), 1);
  const bool av = ctx.kind == InteractionKind::av;
  const double own = (av ? coeffs.sine(1) : coeffs.cosine(1)) / kReferenceCoupling;
  const double other = (av ? coeffs.cosine(1) : coeffs.sine(1)) / kReferenceCoupling;
  const double g_hat = ctx.measured_field / own;

  std::optional<MisalignmentScan> scan = ctx.scan;
  std::vector<SystematicEntry> entries;
  for (const auto& p : rows) {
    switch (p.kind) {
      case SystematicKind::kernel:
        entries.push_back(kernel_sensitivity(p, ctx));
        break;
      case SystematicKind::field_offset: {
        double delta_b = p.mean;
        if (p.offset_source != OffsetSource::fixed) {
          if (!scan) {
            scan = misalignment_scan(ctx.geometry, ctx.bias, ctx.misalignment_limit, ctx.misalignment_grid,
                                     ctx.diamag);
          }
          if (p.offset_source == OffsetSource::diamag_peak_to_peak) {
            delta_b = scan->max_peak_to_peak;
          } else {
            delta_b = av ? scan->max_first_sine : scan->max_first_cosine;
          }
        }
        entries.push_back(field_offset_correction(p.name, delta_b, own));
        break;
      }
      case SystematicKind::phase:
        entries.push_back(phase_correction(p.name, p.mean, p.sigma, own, other, ctx.kind, ctx.measured_field,
                                           p.sample_count, ctx.seed));
        break;
      case SystematicKind::calibration:
        entries.push_back(calibration_correction(p.name, p.mean, p.sigma, g_hat));
        break;
    }
  }
  auto budget = combine_budget(std::move(entries));
  budget.kind = ctx.kind;
  budget.range = ctx.range;
  budget.measured_field = ctx.measured_field;
  budget.kernel_constant = own;
  budget.coupling_estimate = g_hat;
  return budget;
}

}  // namespace exolim
