#pragma once

// Field of the lead sphere magnetised by the bias field, to first order in
// chi: every volume element carries a moment (chi B0 / mu0) dV, so
//   dB = chi / (4 pi) [3 r (B0 . r) / r^5 - B0 / r^3] dV.
// Outside the ball the integral is exactly the dipole of the whole sphere.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "exolim/geometry.hpp"
#include "exolim/harmonics.hpp"
#include "exolim/numerics.hpp"
#include "exolim/parallel.hpp"
#include "exolim/random.hpp"
#include "exolim/series.hpp"
#include "exolim/vec3.hpp"

namespace exolim {

struct BiasField {
  double magnitude{2e-3};  // T, along the NV axis
};

inline Vec3 bias_vector(const BiasField& b, const SensorSlab& slab) { return nv_axis(slab) * b.magnitude; }

enum class DiamagMethod {
  dipole,           // closed form
  shell_quadrature, // Gauss-Legendre volume integral over the ball
  monte_carlo,      // uniform ball samples
};

inline std::string_view to_string(DiamagMethod m) {
  switch (m) {
    case DiamagMethod::dipole: return "dipole";
    case DiamagMethod::shell_quadrature: return "shell_quadrature";
    case DiamagMethod::monte_carlo: return "monte_carlo";
  }
  return "dipole";
}

inline DiamagMethod parse_diamag_method(std::string_view s) {
  if (s == "dipole") return DiamagMethod::dipole;
  if (s == "shell_quadrature") return DiamagMethod::shell_quadrature;
  if (s == "monte_carlo") return DiamagMethod::monte_carlo;
  throw std::invalid_argument("unknown diamagnetism method '" + std::string(s) + "'");
}

struct DiamagOptions {
  DiamagMethod method{DiamagMethod::dipole};
  int nodes_per_panel{8};
  double grading_ratio{0.3};
  int azimuthal_nodes{32};
  std::uint64_t mc_samples{1u << 16};
  std::uint64_t seed{20220521};
  int slab_x_nodes{48};
  int slab_y_nodes{48};
  int slab_z_nodes{16};
  int time_samples{64};
  unsigned threads{1};
};

class DiamagError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline Vec3 exterior_offset(const Vec3& point, const Vec3& center, const SourceSphere& s) {
  const Vec3 r = point - center;
  if (!(norm(r) > s.radius)) throw DiamagError("field point must lie outside the sphere");
  return r;
}

/// chi / (4 pi) [3 r (B0 . r) / r^5 - B0 / r^3]
inline Vec3 dipole_density_kernel(const Vec3& r, const Vec3& b0, double chi) {
  const double d2 = dot(r, r);
  const double d = std::sqrt(d2);
  const double inv3 = 1.0 / (d2 * d);
  return (r * (3.0 * dot(b0, r) / d2) - b0) * (chi / (4.0 * std::numbers::pi) * inv3);
}

/// Orthonormal frame whose third vector is `w`.
inline void frame_around(const Vec3& w, Vec3& u, Vec3& v) {
  const Vec3 helper = std::abs(w.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  u = helper - w * dot(helper, w);
  u = u / norm(u);
  v = {w.y * u.z - w.z * u.y, w.z * u.x - w.x * u.z, w.x * u.y - w.y * u.x};
}

/// Composite Gauss-Legendre rule on [0, length] whose panels shrink
/// geometrically toward 0, down to about `finest`.
inline QuadratureRule graded_rule(double length, double finest, int nodes_per_panel, double ratio) {
  if (nodes_per_panel < 1) throw std::invalid_argument("graded rule needs at least one node per panel");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("grading ratio must lie in (0, 1)");
  std::vector<double> breaks{length};
  while (breaks.back() * ratio > finest && breaks.size() < 64) breaks.push_back(breaks.back() * ratio);
  breaks.push_back(0.0);
  QuadratureRule rule;
  for (std::size_t i = breaks.size() - 1; i > 0; --i) {
    const auto panel = gauss_legendre(nodes_per_panel, breaks[i], breaks[i - 1]);
    rule.nodes.insert(rule.nodes.end(), panel.nodes.begin(), panel.nodes.end());
    rule.weights.insert(rule.weights.end(), panel.weights.begin(), panel.weights.end());
  }
  return rule;
}

}  // namespace detail

/// Closed-form exterior field, chi V / (4 pi) [3 e (B0 . e) - B0] / r^3.
inline Vec3 analytic_dipole_field(const Vec3& point, const Vec3& center, const SourceSphere& s, const Vec3& b0) {
  const Vec3 r = detail::exterior_offset(point, center, s);
  return detail::dipole_density_kernel(r, b0, s.susceptibility) * s.volume();
}

/// Volume integral of the magnetisation kernel over the ball. The polar
/// axis of the quadrature points at the field point.
inline Vec3 induced_field_at(const Vec3& point, const Vec3& center, const SourceSphere& s, const Vec3& b0,
                             const DiamagOptions& opt = {}) {
  const Vec3 r = detail::exterior_offset(point, center, s);
  if (s.susceptibility == 0.0) return {};
  if (opt.method == DiamagMethod::dipole) return analytic_dipole_field(point, center, s, b0);

  if (opt.method == DiamagMethod::monte_carlo) {
    if (opt.mc_samples < 1) throw std::invalid_argument("diamagnetism MC needs at least one sample");
    CounterRng rng(opt.seed, stream_id(0xD1A, 0));
    CompensatedSum bx, by, bz;
    for (std::uint64_t i = 0; i < opt.mc_samples; ++i) {
      const Vec3 k = detail::dipole_density_kernel(r - sample_sphere_point(s, rng), b0, s.susceptibility);
      bx.add(k.x);
      by.add(k.y);
      bz.add(k.z);
    }
    const double scale = s.volume() / static_cast<double>(opt.mc_samples);
    return Vec3{bx.value(), by.value(), bz.value()} * scale;
  }

  // Composite rules graded toward the surface point nearest the field
  // point (radius R, polar angle 0), where the kernel is sharply peaked.
  const Vec3 w = r / norm(r);
  Vec3 u;
  Vec3 v;
  detail::frame_around(w, u, v);
  const double gap = norm(r) - s.radius;
  const auto rad = detail::graded_rule(s.radius, 0.5 * gap, opt.nodes_per_panel, opt.grading_ratio);
  const auto pol = detail::graded_rule(std::numbers::pi, 0.5 * gap / s.radius, opt.nodes_per_panel, opt.grading_ratio);
  const auto phi = periodic_trapezoid(opt.azimuthal_nodes);
  CompensatedSum bx, by, bz;
  for (std::size_t a = 0; a < rad.nodes.size(); ++a) {
    const double rr = s.radius - rad.nodes[a];
    for (std::size_t b = 0; b < pol.nodes.size(); ++b) {
      const double th = pol.nodes[b];
      const double sn = std::sin(th);
      const double cs = std::cos(th);
      for (std::size_t c = 0; c < phi.nodes.size(); ++c) {
        const Vec3 q = (u * (sn * std::cos(phi.nodes[c])) + v * (sn * std::sin(phi.nodes[c])) + w * cs) * rr;
        const double wt = rad.weights[a] * rr * rr * pol.weights[b] * sn * phi.weights[c];
        const Vec3 k = detail::dipole_density_kernel(r - q, b0, s.susceptibility) * wt;
        bx.add(k.x);
        by.add(k.y);
        bz.add(k.z);
      }
    }
  }
  return {bx.value(), by.value(), bz.value()};
}

/// Slab average of the NV-axis projection of the induced field with the
/// sphere at its position for time t.
inline double diamag_sensor_average(const ExperimentGeometry& g, const BiasField& bias, double t,
                                    const DiamagOptions& opt = {}) {
  validate(g);
  if (!(bias.magnitude >= 0.0)) throw std::invalid_argument("bias field magnitude must be non-negative");
  const Vec3 axis = nv_axis(g.slab);
  const Vec3 b0 = bias_vector(bias, g.slab);
  const Vec3 c = sphere_center(g, t);
  const auto gx = gauss_legendre(opt.slab_x_nodes, -0.5 * g.slab.extent_x, 0.5 * g.slab.extent_x);
  const auto gy = gauss_legendre(opt.slab_y_nodes, -0.5 * g.slab.extent_y, 0.5 * g.slab.extent_y);
  const auto gz = gauss_legendre(opt.slab_z_nodes, -g.slab.thickness, 0.0);
  std::vector<double> rows(gx.nodes.size());
  parallel_for(gx.nodes.size(), opt.threads, [&](std::size_t i) {
    CompensatedSum row;
    for (std::size_t j = 0; j < gy.nodes.size(); ++j) {
      for (std::size_t k = 0; k < gz.nodes.size(); ++k) {
        const Vec3 p{gx.nodes[i], gy.nodes[j], gz.nodes[k]};
        row.add(gy.weights[j] * gz.weights[k] * dot(axis, induced_field_at(p, c, g.sphere, b0, opt)));
      }
    }
    rows[i] = gx.weights[i] * row.value();
  });
  return pairwise_sum(rows) / g.slab.volume();
}

struct DiamagExtent {
  FieldTimeSeries series;
  double min{0.0};
  double max{0.0};
  double peak_to_peak{0.0};
  double mean{0.0};
  double first_sine{0.0};    // lands on the AV channel
  double first_cosine{0.0};  // lands on the SP channel
};

/// Sensor average over the phase grid of one period.
inline DiamagExtent diamag_vibration_extent(const ExperimentGeometry& g, const BiasField& bias,
                                            const DiamagOptions& opt = {}) {
  if (opt.time_samples < 4) throw std::invalid_argument("diamagnetism needs at least 4 time samples");
  DiamagExtent e;
  const auto nt = static_cast<std::size_t>(opt.time_samples);
  e.series.modulation_frequency = g.kinematics.frequency;
  e.series.values.resize(nt);
  e.series.errors.assign(nt, 0.0);
  for (std::size_t j = 0; j < nt; ++j) {
    const double t = static_cast<double>(j) / (static_cast<double>(nt) * g.kinematics.frequency);
    e.series.values[j] = diamag_sensor_average(g, bias, t, opt);
  }
  const auto [lo, hi] = std::minmax_element(e.series.values.begin(), e.series.values.end());
  e.min = *lo;
  e.max = *hi;
  e.peak_to_peak = e.max - e.min;
  const auto coeffs = fourier_coefficients(e.series, 1);
  e.mean = coeffs.dc;
  e.first_sine = coeffs.sine(1);
  e.first_cosine = coeffs.cosine(1);
  return e;
}

struct MisalignmentPoint {
  double offset_x{0.0};
  double offset_y{0.0};
  DiamagExtent extent;
};

struct MisalignmentScan {
  std::vector<MisalignmentPoint> points;
  double centered_mean{0.0};
  double max_peak_to_peak{0.0};
  double max_first_sine{0.0};      // max |a1|
  double max_first_cosine{0.0};    // max |b1|
  double max_mean_shift{0.0};      // max |mean - centered mean|
};

/// Lateral offsets on an n x n grid over [-limit, limit]^2 (n odd keeps
/// the centred point).
inline MisalignmentScan misalignment_scan(const ExperimentGeometry& g, const BiasField& bias, double limit = 10e-6,
                                          int n = 5, const DiamagOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("misalignment scan needs at least one point per axis");
  if (!(limit >= 0.0)) throw std::invalid_argument("misalignment limit must be non-negative");
  MisalignmentScan scan;
  ExperimentGeometry centred = g;
  centred.sphere.offset_x = 0.0;
  centred.sphere.offset_y = 0.0;
  scan.centered_mean = diamag_vibration_extent(centred, bias, opt).mean;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = n == 1 ? 0.0 : -limit + 2.0 * limit * i / (n - 1);
      const double dy = n == 1 ? 0.0 : -limit + 2.0 * limit * j / (n - 1);
      ExperimentGeometry shifted = g;
      shifted.sphere.offset_x = g.sphere.offset_x + dx;
      shifted.sphere.offset_y = g.sphere.offset_y + dy;
      MisalignmentPoint p{dx, dy, diamag_vibration_extent(shifted, bias, opt)};
      scan.max_peak_to_peak = std::max(scan.max_peak_to_peak, p.extent.peak_to_peak);
      scan.max_first_sine = std::max(scan.max_first_sine, std::abs(p.extent.first_sine));
      scan.max_first_cosine = std::max(scan.max_first_cosine, std::abs(p.extent.first_cosine));
      scan.max_mean_shift = std::max(scan.max_mean_shift, std::abs(p.extent.mean - scan.centered_mean));
      scan.points.push_back(std::move(p));
    }
  }
  return scan;
}

struct DiamagMap {
  std::vector<double> x;  // m, cell centres
  std::vector<double> y;
  std::vector<double> values;  // [ix * ny + iy], T, depth-averaged B_par

  double at(std::size_t ix, std::size_t iy) const { return values[ix * y.size() + iy]; }
};

/// NV-axis field averaged over the slab depth on an nx x ny grid of cell
/// centres.
inline DiamagMap diamag_map(const ExperimentGeometry& g, const BiasField& bias, double t, int nx, int ny,
                            const DiamagOptions& opt = {}) {
  validate(g);
  if (nx < 1 || ny < 1) throw std::invalid_argument("map needs at least one cell per axis");
  DiamagMap m;
  for (int i = 0; i < nx; ++i) m.x.push_back(g.slab.extent_x * ((i + 0.5) / nx - 0.5));
  for (int j = 0; j < ny; ++j) m.y.push_back(g.slab.extent_y * ((j + 0.5) / ny - 0.5));
  m.values.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  const Vec3 axis = nv_axis(g.slab);
  const Vec3 b0 = bias_vector(bias, g.slab);
  const Vec3 c = sphere_center(g, t);
  const auto gz = gauss_legendre(opt.slab_z_nodes, -g.slab.thickness, 0.0);
  parallel_for(m.x.size(), opt.threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < m.y.size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < gz.nodes.size(); ++k) {
        acc += gz.weights[k] * dot(axis, induced_field_at({m.x[i], m.y[j], gz.nodes[k]}, c, g.sphere, b0, opt));
      }
      m.values[i * m.y.size() + j] = acc / g.slab.thickness;
    }
  });
  return m;
}

}  // namespace exolim
