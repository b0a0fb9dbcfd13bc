#pragma once

// Volume-averaged effective field
//   B(t) = (1/V_slab) int_slab int_ball rho k(x_e - x_N(t)) dV_N dV_e
// by Monte Carlo, on one modulation period with common random numbers, and
// by a deterministic tensor quadrature used as an oracle.
//
// Two estimators share the same sample streams:
//   pairs          uniform (nucleon, electron) pairs, N_nucleon * mean(k)
//   analytic_ball  the ball integral is done in closed form (shell theorem
//                  for the Yukawa kernel) and only electron points are
//                  sampled; same expectation, far smaller variance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "exolim/constants.hpp"
#include "exolim/geometry.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/kernels.hpp"
#include "exolim/numerics.hpp"
#include "exolim/parallel.hpp"
#include "exolim/random.hpp"
#include "exolim/series.hpp"
#include "exolim/vec3.hpp"

namespace exolim {

enum class IntegrationScheme { analytic_ball, pairs };

inline std::string_view to_string(IntegrationScheme s) {
  return s == IntegrationScheme::pairs ? "pairs" : "analytic_ball";
}

inline IntegrationScheme parse_integration_scheme(std::string_view s) {
  if (s == "analytic_ball") return IntegrationScheme::analytic_ball;
  if (s == "pairs") return IntegrationScheme::pairs;
  throw std::invalid_argument("unknown integration scheme '" + std::string(s) +
                              "' (expected analytic_ball|pairs)");
}

/// Per-axis node counts for the quadrature oracle. The check run doubles
/// every count.
struct QuadratureGrid {
  int radial{8};
  int polar{8};
  int azimuthal{8};
  int x{8};
  int y{8};
  int z{4};

  QuadratureGrid doubled() const { return {2 * radial, 2 * polar, 2 * azimuthal, 2 * x, 2 * y, 2 * z}; }
};

struct MCConfig {
  std::uint64_t pair_count{1u << 20};
  std::uint64_t seed{20220521};
  int time_samples{64};
  /// Fixed number of sample batches; one batch is one parallel work item
  /// and one unit of the batch-means error estimate.
  int batches{64};
  unsigned threads{1};
  IntegrationScheme scheme{IntegrationScheme::analytic_ball};
  KernelMode kernel_mode{KernelMode::projected};
  QuadratureGrid oracle_grid{};
  double oracle_tolerance{1e-3};
  PhysicalConstants constants{};
};

struct FieldEstimate {
  double mean{0.0};            // T
  double standard_error{0.0};  // T
  std::uint64_t pair_count{0};
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kIntegratorDomain = 0x1A7E;

namespace detail {

/// log of 4 pi lambda^3 (x cosh x - sinh x), x = R/lambda, without overflow.
inline double log_ball_form_factor(double radius, double range) {
  const double x = radius / range;
  if (x < 0.5) return std::log(ball_form_factor_series(radius, x));
  return std::log(2.0 * std::numbers::pi) + 3.0 * std::log(range) + x +
         std::log((x - 1.0) + (x + 1.0) * std::exp(-2.0 * x));
}

struct TimeNode {
  Vec3 center;   // sphere centre
  double speed;  // electron velocity relative to the nucleons, along z
};

/// Integrand of one Monte Carlo sample at one time node, already carrying
/// every constant factor so that the estimator is a plain mean.
class SampleKernel {
 public:
  SampleKernel(const CouplingHypothesis& h, const ExperimentGeometry& g, IntegrationScheme scheme,
               KernelMode mode, const PhysicalConstants& c)
      : kind_(h.kind), scheme_(scheme), mode_(mode), range_(h.range), axis_(nv_axis(g.slab)) {
    const double cos_theta = std::cos(g.slab.nv_polar_angle);
    const double weight = scheme == IntegrationScheme::pairs ? g.sphere.nucleon_count() : g.sphere.nucleon_density;
    if (kind_ == InteractionKind::av) {
      // v is along z for both modes, so n . v = cos(theta) v.
      prefactor_ = av_prefactor(h, c) * cos_theta * weight;
    } else {
      prefactor_ = sp_prefactor(h, c) * (mode == KernelMode::projected ? cos_theta : 1.0) * weight;
    }
    if (scheme == IntegrationScheme::analytic_ball) {
      log_form_factor_ = log_ball_form_factor(g.sphere.radius, h.range);
    }
  }

  double operator()(const Vec3& source_point, const Vec3& sensor_point, const TimeNode& node) const {
    const Vec3 r = scheme_ == IntegrationScheme::pairs ? sensor_point - (source_point + node.center)
                                                       : sensor_point - node.center;
    const double d = norm(r);
    const double decay = scheme_ == IntegrationScheme::pairs ? std::exp(-d / range_)
                                                             : std::exp(log_form_factor_ - d / range_);
    if (kind_ == InteractionKind::av) return prefactor_ * node.speed * decay / d;
    const double projection = mode_ == KernelMode::projected ? r.z / d : dot(axis_, r) / d;
    return prefactor_ * yukawa_radial(d, range_) * decay * projection;
  }

  bool needs_source_point() const { return scheme_ == IntegrationScheme::pairs; }

 private:
  InteractionKind kind_;
  IntegrationScheme scheme_;
  KernelMode mode_;
  double range_;
  Vec3 axis_;
  double prefactor_{0.0};
  double log_form_factor_{0.0};
};

inline std::vector<TimeNode> time_nodes(const ExperimentGeometry& g, std::span<const double> times) {
  std::vector<TimeNode> nodes;
  nodes.reserve(times.size());
  for (double t : times) {
    if (!std::isfinite(t)) throw std::invalid_argument("time must be finite");
    nodes.push_back({sphere_center(g, t), -velocity_profile(g.kinematics, t)});
  }
  return nodes;
}

/// Shifted first and second moments of one batch, per time node.
struct BatchMoments {
  std::uint64_t count{0};
  std::vector<double> mean;
  std::vector<double> m2;  // sum of squared deviations
};

struct Accumulation {
  std::uint64_t count{0};
  std::vector<double> mean;
  std::vector<double> variance;  // sample variance of the integrand
  std::vector<BatchMoments> batches;
};

inline void validate_config(const MCConfig& cfg) {
  if (cfg.pair_count < 1) throw std::invalid_argument("pair_count must be at least 1");
  if (cfg.time_samples < 4) throw std::invalid_argument("time_samples must be at least 4");
  if (cfg.batches < 1) throw std::invalid_argument("batches must be at least 1");
}

inline void validate_hypothesis(const CouplingHypothesis& h) {
  if (!(h.range > 0.0)) throw std::invalid_argument("force range lambda must be positive");
  if (!std::isfinite(h.coupling)) throw std::invalid_argument("coupling must be finite");
}

inline Accumulation integrate(const CouplingHypothesis& h, const ExperimentGeometry& g,
                              std::span<const double> times, const MCConfig& cfg) {
  validate(g);
  validate_hypothesis(h);
  validate_config(cfg);
  const auto nodes = time_nodes(g, times);
  const std::size_t nt = nodes.size();
  const SampleKernel kernel(h, g, cfg.scheme, cfg.kernel_mode, cfg.constants);
  const std::uint64_t n = cfg.pair_count;
  const auto batch_count = static_cast<std::size_t>(std::min<std::uint64_t>(cfg.batches, n));
  const std::uint64_t stream = stream_id(kIntegratorDomain, 0);

  std::vector<BatchMoments> batches(batch_count);
  parallel_for(batch_count, cfg.threads, [&](std::size_t b) {
    const std::uint64_t first = n * b / batch_count;
    const std::uint64_t last = n * (b + 1) / batch_count;
    std::vector<CompensatedSum> s1(nt);
    std::vector<CompensatedSum> s2(nt);
    std::vector<double> shift(nt, 0.0);
    std::vector<double> row(nt);
    for (std::uint64_t i = first; i < last; ++i) {
      // Three Philox blocks (six uniforms) per sample, whatever the scheme.
      CounterRng rng(cfg.seed, stream, 3 * i);
      const Vec3 sensor = sample_slab_point(g.slab, rng);
      const Vec3 source = kernel.needs_source_point() ? sample_sphere_point(g.sphere, rng) : Vec3{};
      for (std::size_t j = 0; j < nt; ++j) row[j] = kernel(source, sensor, nodes[j]);
      if (i == first) shift = row;
      for (std::size_t j = 0; j < nt; ++j) {
        const double dv = row[j] - shift[j];
        s1[j].add(dv);
        s2[j].add(dv * dv);
      }
    }
    BatchMoments& out = batches[b];
    out.count = last - first;
    out.mean.resize(nt);
    out.m2.resize(nt);
    const auto m = static_cast<double>(out.count);
    for (std::size_t j = 0; j < nt; ++j) {
      const double a = s1[j].value();
      out.mean[j] = shift[j] + a / m;
      out.m2[j] = std::max(0.0, s2[j].value() - a * a / m);
    }
  });

  Accumulation acc;
  acc.count = n;
  acc.mean.resize(nt);
  acc.variance.resize(nt);
  std::vector<double> terms(batch_count);
  const auto total = static_cast<double>(n);
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t b = 0; b < batch_count; ++b) {
      terms[b] = static_cast<double>(batches[b].count) * batches[b].mean[j];
    }
    const double mean = pairwise_sum(terms) / total;
    for (std::size_t b = 0; b < batch_count; ++b) {
      const double dm = batches[b].mean[j] - mean;
      terms[b] = batches[b].m2[j] + static_cast<double>(batches[b].count) * dm * dm;
    }
    acc.mean[j] = mean;
    acc.variance[j] = n > 1 ? pairwise_sum(terms) / (total - 1.0) : 0.0;
  }
  acc.batches = std::move(batches);
  return acc;
}

}  // namespace detail

/// Monte Carlo estimate of the slab-averaged NV-axis field at time t.
inline FieldEstimate mc_average_field(const CouplingHypothesis& h, const ExperimentGeometry& g, double t,
                                      const MCConfig& cfg = {}) {
  const double times[] = {t};
  const auto acc = detail::integrate(h, g, times, cfg);
  return {acc.mean[0], std::sqrt(acc.variance[0] / static_cast<double>(acc.count)), acc.count};
}

/// Field over one period on t_j = j / (N_t f_M), one common sample set for
/// every t_j. For even N_t only j <= N_t/2 is integrated: d(T - t) = d(t)
/// and v(T - t) = -v(t), so the AV series is odd and the SP series even
/// about t = 0.
inline FieldTimeSeries field_time_series(const CouplingHypothesis& h, const ExperimentGeometry& g,
                                         const MCConfig& cfg = {}) {
  detail::validate_config(cfg);
  const auto nt = static_cast<std::size_t>(cfg.time_samples);
  const double f = g.kinematics.frequency;
  const bool mirror = nt % 2 == 0;
  const std::size_t computed = mirror ? nt / 2 + 1 : nt;
  std::vector<double> times(computed);
  for (std::size_t j = 0; j < computed; ++j) times[j] = static_cast<double>(j) / (static_cast<double>(nt) * f);
  const auto acc = detail::integrate(h, g, times, cfg);

  const double parity = h.kind == InteractionKind::av ? -1.0 : 1.0;
  const auto expand = [&](const std::vector<double>& half, double sign) {
    std::vector<double> full(nt);
    for (std::size_t j = 0; j < nt; ++j) {
      if (j < computed) {
        full[j] = half[j];
      } else {
        full[j] = sign * half[nt - j];
      }
    }
    return full;
  };

  FieldTimeSeries out;
  out.modulation_frequency = f;
  out.values = expand(acc.mean, parity);
  std::vector<double> errs(computed);
  for (std::size_t j = 0; j < computed; ++j) {
    errs[j] = std::sqrt(acc.variance[j] / static_cast<double>(acc.count));
  }
  out.errors = expand(errs, 1.0);
  for (const auto& b : acc.batches) {
    out.batch_means.push_back(expand(b.mean, parity));
    out.batch_weights.push_back(static_cast<double>(b.count) / static_cast<double>(acc.count));
  }
  return out;
}

struct KernelConstant {
  InteractionKind kind{InteractionKind::av};
  double range{0.0};
  double value{0.0};  // T per unit coupling
  double error{0.0};
  double relative_error() const { return value != 0.0 ? std::abs(error / value) : std::numeric_limits<double>::infinity(); }
};

inline constexpr double kReferenceCoupling = 1e-20;

/// First-harmonic amplitude per unit coupling: a_AV1/g or b_SP1/g.
inline KernelConstant kernel_constant(InteractionKind kind, double range, const ExperimentGeometry& g,
                                      const MCConfig& cfg = {}) {
  if (!(range > 0.0)) throw std::invalid_argument("kernel_constant: lambda must be positive");
  const CouplingHypothesis h{kind, kReferenceCoupling, range};
  const auto coeffs = fourier_coefficients(field_time_series(h, g, cfg), 1);
  KernelConstant k;
  k.kind = kind;
  k.range = range;
  if (kind == InteractionKind::av) {
    k.value = coeffs.sine(1) / kReferenceCoupling;
    k.error = coeffs.sine_error(1) / kReferenceCoupling;
  } else {
    k.value = coeffs.cosine(1) / kReferenceCoupling;
    k.error = coeffs.cosine_error(1) / kReferenceCoupling;
  }
  return k;
}

struct QuadratureResult {
  double value{0.0};   // result on the doubled grid, T
  double coarse{0.0};  // result on the base grid, T
  double relative_difference{0.0};
};

class QuadratureNotConverged : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

namespace detail {

/// Deterministic tensor rule: Gauss-Legendre in (r, cos polar) and periodic
/// trapezoid in azimuth over the ball, Gauss-Legendre over the slab. Uses
/// the pointwise pair kernel, so it shares no closed form with the MC path.
inline double quadrature_average(const CouplingHypothesis& h, const ExperimentGeometry& g, double t,
                                 const QuadratureGrid& grid, const MCConfig& cfg) {
  const SampleKernel kernel(h, g, IntegrationScheme::pairs, cfg.kernel_mode, cfg.constants);
  const double times[] = {t};
  const TimeNode node = time_nodes(g, times)[0];
  const double r_ball = g.sphere.radius;
  const auto rr = gauss_legendre(grid.radial, 0.0, r_ball);
  const auto mu = gauss_legendre(grid.polar, -1.0, 1.0);
  const auto phi = periodic_trapezoid(grid.azimuthal);
  const auto gx = gauss_legendre(grid.x, -0.5 * g.slab.extent_x, 0.5 * g.slab.extent_x);
  const auto gy = gauss_legendre(grid.y, -0.5 * g.slab.extent_y, 0.5 * g.slab.extent_y);
  const auto gz = gauss_legendre(grid.z, -g.slab.thickness, 0.0);

  struct Node {
    Vec3 p;
    double w;
  };
  std::vector<Node> ball;
  ball.reserve(rr.nodes.size() * mu.nodes.size() * phi.nodes.size());
  for (std::size_t a = 0; a < rr.nodes.size(); ++a) {
    const double r = rr.nodes[a];
    for (std::size_t b = 0; b < mu.nodes.size(); ++b) {
      const double m = mu.nodes[b];
      const double s = std::sqrt(std::max(0.0, 1.0 - m * m));
      for (std::size_t c = 0; c < phi.nodes.size(); ++c) {
        ball.push_back({{r * s * std::cos(phi.nodes[c]), r * s * std::sin(phi.nodes[c]), r * m},
                        rr.weights[a] * r * r * mu.weights[b] * phi.weights[c]});
      }
    }
  }
  // The pair kernel already carries N_nucleon; the ball rule integrates to V.
  const double per_volume = 1.0 / g.sphere.volume();

  std::vector<double> rows(gx.nodes.size());
  parallel_for(gx.nodes.size(), cfg.threads, [&](std::size_t ix) {
    CompensatedSum row;
    for (std::size_t iy = 0; iy < gy.nodes.size(); ++iy) {
      for (std::size_t iz = 0; iz < gz.nodes.size(); ++iz) {
        const Vec3 e{gx.nodes[ix], gy.nodes[iy], gz.nodes[iz]};
        const double we = gy.weights[iy] * gz.weights[iz];
        CompensatedSum inner;
        for (const auto& n : ball) inner.add(n.w * kernel(n.p, e, node));
        row.add(we * inner.value());
      }
    }
    rows[ix] = gx.weights[ix] * row.value();
  });
  return pairwise_sum(rows) * per_volume / g.slab.volume();
}

}  // namespace detail

/// Quadrature oracle for mc_average_field. Evaluates on `grid` and on the
/// doubled grid and returns the doubled result; throws if the two differ by
/// more than cfg.oracle_tolerance (relative).
inline QuadratureResult quad_average_field(const CouplingHypothesis& h, const ExperimentGeometry& g, double t,
                                           const QuadratureGrid& grid, const MCConfig& cfg = {}) {
  validate(g);
  detail::validate_hypothesis(h);
  if (std::min({grid.radial, grid.polar, grid.azimuthal, grid.x, grid.y, grid.z}) < 1) {
    throw std::invalid_argument("quadrature grid needs at least one node per axis");
  }
  QuadratureResult out;
  out.coarse = detail::quadrature_average(h, g, t, grid, cfg);
  out.value = detail::quadrature_average(h, g, t, grid.doubled(), cfg);
  const double scale = std::max(std::abs(out.value), std::abs(out.coarse));
  out.relative_difference = scale > 0.0 ? std::abs(out.value - out.coarse) / scale : 0.0;
  if (out.relative_difference > cfg.oracle_tolerance) {
    throw QuadratureNotConverged("quadrature not converged: n vs 2n differ by " +
                                 std::to_string(out.relative_difference) + " (tolerance " +
                                 std::to_string(cfg.oracle_tolerance) + ")");
  }
  return out;
}

inline QuadratureResult quad_average_field(const CouplingHypothesis& h, const ExperimentGeometry& g, double t,
                                           const MCConfig& cfg = {}) {
  return quad_average_field(h, g, t, cfg.oracle_grid, cfg);
}

}  // namespace exolim
