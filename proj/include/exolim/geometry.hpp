#pragma once

// Frame: z along the vibration, pointing up out of the diamond surface.
// The NV layer fills z in [-h, 0], centred on the origin in x-y. The lead
// sphere hangs above with its centre at (dx, dy, d(t) + R). The NV axis lies
// in the y-z plane, so x is perpendicular to it.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "exolim/random.hpp"
#include "exolim/vec3.hpp"

namespace exolim {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Default NV polar angle, arccos(1/sqrt 3).
inline const double kMagicAngle = std::acos(1.0 / std::sqrt(3.0));

struct SourceSphere {
  double radius{978e-6};          // m
  double nucleon_density{6.8e30};  // m^-3
  double susceptibility{-16e-6};
  double offset_x{0.0};  // m
  double offset_y{0.0};  // m

  double volume() const { return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius; }
  double nucleon_count() const { return nucleon_density * volume(); }
};

struct VibrationKinematics {
  double min_gap{9.3e-6};     // d0, m
  double amplitude{718e-9};   // A, m
  double frequency{1953.0};   // f_M, Hz

  double period() const { return 1.0 / frequency; }
  double angular_frequency() const { return 2.0 * std::numbers::pi * frequency; }
};

struct SensorSlab {
  double extent_x{660e-6};   // m
  double extent_y{661e-6};   // m
  double thickness{23e-6};   // m
  double nv_polar_angle{kMagicAngle};  // rad, from the vibration axis

  double volume() const { return extent_x * extent_y * thickness; }
};

struct ExperimentGeometry {
  SourceSphere sphere;
  VibrationKinematics kinematics;
  SensorSlab slab;
};

/// NV axis unit vector (0, sin theta, cos theta).
inline Vec3 nv_axis(const SensorSlab& slab) {
  return {0.0, std::sin(slab.nv_polar_angle), std::cos(slab.nv_polar_angle)};
}

/// Gap between the bottom of the sphere and the diamond surface,
/// d(t) = d0 + A [1 + cos(2 pi f t)]. Maximal at t = 0.
inline double distance_profile(const VibrationKinematics& k, double t) {
  return k.min_gap + k.amplitude * (1.0 + std::cos(k.angular_frequency() * t));
}

/// Sphere velocity along +z, the time derivative of distance_profile.
inline double velocity_profile(const VibrationKinematics& k, double t) {
  return -k.angular_frequency() * k.amplitude * std::sin(k.angular_frequency() * t);
}

inline Vec3 sphere_center(const ExperimentGeometry& g, double t) {
  return {g.sphere.offset_x, g.sphere.offset_y,
          distance_profile(g.kinematics, t) + g.sphere.radius};
}

inline void validate(const ExperimentGeometry& g) {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw GeometryError(what);
  };
  const auto& s = g.sphere;
  const auto& k = g.kinematics;
  const auto& b = g.slab;
  require(s.radius > 0.0 && std::isfinite(s.radius), "sphere radius must be positive");
  require(s.nucleon_density > 0.0 && std::isfinite(s.nucleon_density),
          "nucleon density must be positive");
  require(std::abs(s.susceptibility) < 1.0, "|susceptibility| must be below 1");
  require(std::isfinite(s.offset_x) && std::isfinite(s.offset_y), "lateral offset must be finite");
  require(k.min_gap > 0.0 && std::isfinite(k.min_gap),
          "minimal gap d0 must be positive (volumes would overlap)");
  require(k.amplitude >= 0.0 && std::isfinite(k.amplitude), "amplitude must be non-negative");
  require(k.frequency > 0.0 && std::isfinite(k.frequency), "frequency must be positive");
  require(b.extent_x > 0.0 && b.extent_y > 0.0 && b.thickness > 0.0,
          "slab dimensions must be positive");
  require(b.nv_polar_angle >= 0.0 && b.nv_polar_angle <= std::numbers::pi / 2.0,
          "NV polar angle must lie in [0, pi/2]");
}

/// Uniform point in the ball, relative to its centre. Inverse transform:
/// radius R u^(1/3), cos(polar) uniform on [-1, 1], azimuth uniform.
/// Consumes exactly three uniforms.
inline Vec3 sample_sphere_point(const SourceSphere& s, CounterRng& rng) {
  const double r = s.radius * std::cbrt(rng.uniform());
  const double mu = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double rho = r * std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return {rho * std::cos(phi), rho * std::sin(phi), r * mu};
}

/// Uniform point in the slab. Consumes exactly three uniforms.
inline Vec3 sample_slab_point(const SensorSlab& s, CounterRng& rng) {
  const double x = (rng.uniform() - 0.5) * s.extent_x;
  const double y = (rng.uniform() - 0.5) * s.extent_y;
  const double z = -s.thickness * rng.uniform();
  return {x, y, z};
}

/// Displacement from a source nucleon to a sensor electron at time t.
inline Vec3 pair_displacement(const Vec3& source_point, const Vec3& sensor_point,
                              const ExperimentGeometry& g, double t) {
  if (!(g.kinematics.min_gap > 0.0)) {
    throw GeometryError("source and sensor volumes overlap (d0 <= 0)");
  }
  return sensor_point - (source_point + sphere_center(g, t));
}

}  // namespace exolim
