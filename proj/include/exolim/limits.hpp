#pragma once

// Coupling estimates and confidence-level upper bounds,
//   g_hat = B / K(lambda),  bound = |g_hat| + z(CL) sqrt(sigma_stat^2 + syst^2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "exolim/constants.hpp"
#include "exolim/diamagnetism.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/integrator.hpp"
#include "exolim/kernels.hpp"
#include "exolim/lockin.hpp"
#include "exolim/stats.hpp"
#include "exolim/systematics.hpp"

namespace exolim {

enum class Sidedness { two_sided, one_sided };

inline std::string_view to_string(Sidedness s) { return s == Sidedness::two_sided ? "two_sided" : "one_sided"; }

inline Sidedness parse_sidedness(std::string_view s) {
  if (s == "two_sided") return Sidedness::two_sided;
  if (s == "one_sided") return Sidedness::one_sided;
  throw std::invalid_argument("unknown CL convention '" + std::string(s) + "' (expected two_sided|one_sided)");
}

struct ConfidenceConvention {
  double level{0.95};
  Sidedness sidedness{Sidedness::two_sided};

  /// 1.96 two-sided, 1.645 one-sided at 95%.
  double z() const {
    if (!(level > 0.5 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0.5, 1)");
    return sidedness == Sidedness::two_sided ? normal_quantile(0.5 + 0.5 * level) : normal_quantile(level);
  }
};

/// One demodulated channel summarised by its Gaussian fit.
struct ChannelMeasurement {
  double mean{0.0};            // T
  double standard_error{0.0};  // T
  std::uint64_t samples{0};    // demodulation blocks

  bool empty() const { return samples == 0; }
};

struct CouplingEstimate {
  double value{0.0};
  double sigma_stat{0.0};
};

class LimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// g_hat = B / K, sigma = sigma_B / |K|. Rejects a K that is consistent
/// with zero (|K| < 3 MC errors).
inline CouplingEstimate coupling_estimate(double field, double field_error, const KernelConstant& k) {
  if (!(std::abs(k.value) > 3.0 * k.error) || k.value == 0.0) {
    throw LimitError("kernel constant is consistent with zero");
  }
  if (!(field_error >= 0.0)) throw std::invalid_argument("field error must be non-negative");
  return {field / k.value, field_error / std::abs(k.value)};
}

/// |g_hat| + z sqrt(sigma_stat^2 + max(|syst_lower|, syst_upper)^2).
inline double upper_limit(double g_hat, double sigma_stat, double syst_lower, double syst_upper,
                          const ConfidenceConvention& cl = {}) {
  if (!(sigma_stat >= 0.0)) throw std::invalid_argument("statistical error must be non-negative");
  const double syst = std::max(std::abs(syst_lower), std::abs(syst_upper));
  return std::abs(g_hat) + cl.z() * std::hypot(sigma_stat, syst);
}

inline double upper_limit(double g_hat, double sigma_stat, const SystematicBudget& b,
                          const ConfidenceConvention& cl = {}) {
  return upper_limit(g_hat, sigma_stat, b.total_lower, b.total_upper, cl);
}

/// Boson rest energy m c^2 = hbar c / lambda, in eV.
inline double lambda_to_mass(double range, const PhysicalConstants& c = {}) {
  if (!(range > 0.0)) throw std::invalid_argument("lambda must be positive");
  return c.hbar * c.speed_of_light / (range * c.elementary_charge);
}

/// Log-spaced grid with `per_decade` points per decade, both ends included.
inline std::vector<double> log_grid(double lo, double hi, int per_decade = 40) {
  if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("log grid needs 0 < lo < hi");
  if (per_decade < 1) throw std::invalid_argument("need at least one point per decade");
  const int steps = std::max(1, static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade - 1e-9)));
  std::vector<double> g;
  for (int i = 0; i <= steps; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / steps));
  return g;
}

struct ExclusionPoint {
  double range{0.0};  // m
  double mass{0.0};   // eV
  double bound{0.0};
  double g_hat{0.0};
  double sigma_stat{0.0};
  double syst_lower{0.0};
  double syst_upper{0.0};
  double kernel_constant{0.0};
  std::string error;  // non-empty when this point failed

  bool ok() const { return error.empty(); }
};

struct ExclusionCurve {
  InteractionKind kind{InteractionKind::av};
  ConfidenceConvention convention{};
  std::vector<ExclusionPoint> points;
};

/// K, budget and bound for every lambda in the grid. A failing point is
/// recorded with its error and the rest of the curve is still produced.
inline ExclusionCurve exclusion_curve(InteractionKind kind, const std::vector<double>& grid,
                                      const ChannelMeasurement& measurement,
                                      const std::vector<SystematicParameter>& rows, BudgetContext ctx,
                                      const ConfidenceConvention& cl = {}) {
  if (measurement.empty()) throw LimitError("exclusion_curve: empty measurement");
  if (grid.empty()) throw std::invalid_argument("exclusion_curve: empty lambda grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 1e-6 && grid[i] <= 1e-2)) throw std::invalid_argument("lambda grid must lie in [1 um, 1 cm]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("lambda grid must be strictly increasing");
  }
  ctx.kind = kind;
  ctx.measured_field = measurement.mean;
  const bool needs_scan = std::any_of(rows.begin(), rows.end(), [](const SystematicParameter& p) {
    return p.kind == SystematicKind::field_offset && p.offset_source != OffsetSource::fixed;
  });
  if (needs_scan && !ctx.scan) {
    ctx.scan = misalignment_scan(ctx.geometry, ctx.bias, ctx.misalignment_limit, ctx.misalignment_grid, ctx.diamag);
  }
  ExclusionCurve curve;
  curve.kind = kind;
  curve.convention = cl;
  for (double range : grid) {
    ExclusionPoint pt;
    pt.range = range;
    pt.mass = lambda_to_mass(range, ctx.mc.constants);
    try {
      ctx.range = range;
      const auto k = kernel_constant(kind, range, ctx.geometry, ctx.mc);
      const auto est = coupling_estimate(measurement.mean, measurement.standard_error, k);
      const auto budget = build_budget(rows, ctx);
      pt.kernel_constant = k.value;
      pt.g_hat = est.value;
      pt.sigma_stat = est.sigma_stat;
      pt.syst_lower = budget.total_lower;
      pt.syst_upper = budget.total_upper;
      pt.bound = upper_limit(est.value, est.sigma_stat, budget, cl);
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

struct CoverageResult {
  std::size_t trials{0};
  double injected{0.0};  // coupling
  double coverage{0.0};
  double mean_sigma_stat{0.0};
};

/// Coverage of the interval construction with synthetic runs. First the
/// median bound of `trials` zero-signal runs is found; then `trials` runs
/// with that coupling injected are analysed and the fraction whose interval
/// contains it is reported (central interval for two-sided, upper bound
/// for one-sided).
inline CoverageResult coverage_study(const HarmonicCoefficients& unit_field, InteractionKind kind,
                                     const LockInChain& chain, NoiseModel noise, std::size_t trials,
                                     const ConfidenceConvention& cl = {}, unsigned threads = 1) {
  if (trials < 10) throw std::invalid_argument("coverage study needs at least 10 trials");
  const double k = kind == InteractionKind::av ? unit_field.sine(1) : unit_field.cosine(1);
  if (k == 0.0) throw LimitError("coverage study: zero kernel constant");
  const double z = cl.z();
  const auto scaled = [&](double g) {
    HarmonicCoefficients c = unit_field;
    const double f = g / kReferenceCoupling;
    c.dc *= f;
    for (auto& v : c.a) v *= f;
    for (auto& v : c.b) v *= f;
    return c;
  };
  const auto estimate = [&](const MeasurementResult& m) {
    const auto& fit = kind == InteractionKind::av ? m.av.fit : m.sp.fit;
    return CouplingEstimate{fit.mean / k * kReferenceCoupling, fit.standard_error / std::abs(k) * kReferenceCoupling};
  };
  const std::uint64_t base_seed = noise.seed;

  std::vector<double> bounds;
  for (std::size_t i = 0; i < trials; ++i) {
    noise.seed = base_seed + i;
    const auto est = estimate(synthesize_from_fields({}, chain, noise, threads));
    bounds.push_back(std::abs(est.value) + z * est.sigma_stat);
  }
  CoverageResult r;
  r.trials = trials;
  r.injected = percentile(bounds, 0.5);
  const std::vector<HarmonicCoefficients> fields{scaled(r.injected)};
  std::size_t covered = 0;
  double sigma_sum = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    noise.seed = base_seed + trials + i;
    const auto est = estimate(synthesize_from_fields(fields, chain, noise, threads));
    sigma_sum += est.sigma_stat;
    const bool inside = cl.sidedness == Sidedness::two_sided ? std::abs(est.value - r.injected) <= z * est.sigma_stat
                                                             : r.injected <= est.value + z * est.sigma_stat;
    if (inside) ++covered;
  }
  r.coverage = static_cast<double>(covered) / static_cast<double>(trials);
  r.mean_sigma_stat = sigma_sum / static_cast<double>(trials);
  return r;
}

}  // namespace exolim
