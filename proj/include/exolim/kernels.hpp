#pragma once

// Pairwise potentials and effective-field kernels for the two interactions
//   AV: g_A^e g_V^N, spin-velocity
//   SP: g_S^N g_P^e, monopole-dipole
// plus their integrals over a uniform ball (Yukawa shell theorem), which the
// integrator uses to collapse the source volume analytically.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include "exolim/constants.hpp"
#include "exolim/vec3.hpp"

namespace exolim {

enum class InteractionKind { av, sp };

inline std::string_view to_string(InteractionKind k) { return k == InteractionKind::av ? "av" : "sp"; }

inline InteractionKind parse_interaction_kind(std::string_view s) {
  if (s == "av" || s == "AV") return InteractionKind::av;
  if (s == "sp" || s == "SP") return InteractionKind::sp;
  throw std::invalid_argument("unknown interaction kind '" + std::string(s) + "' (expected av|sp)");
}

struct CouplingHypothesis {
  InteractionKind kind{InteractionKind::av};
  double coupling{0.0};  // dimensionless product
  double range{1e-4};    // lambda, m
};

/// How the spin projection is taken inside the integrand.
enum class KernelMode {
  projected,    // cos(theta) and z/r factors, as in the reference algorithm
  full_vector,  // complete e_r projected on the NV axis
};

class KernelError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline double checked_distance(const Vec3& r) {
  const double d = norm(r);
  if (!(d > 0.0)) throw KernelError("kernel evaluated at zero separation");
  return d;
}

inline void require_kind(const CouplingHypothesis& h, InteractionKind k) {
  if (h.kind != k) throw KernelError("kernel called with the wrong interaction kind");
}

/// 1/(lambda r) + 1/r^2, well defined for lambda = inf.
inline double yukawa_radial(double r, double range) { return 1.0 / (range * r) + 1.0 / (r * r); }

}  // namespace detail

/// V_AV = g (hbar / 4 pi) e^{-r/lambda} / r (sigma . v), in joules.
inline double potential_av(const Vec3& r, const Vec3& v, const Vec3& spin, const CouplingHypothesis& h,
                           const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::av);
  const double d = detail::checked_distance(r);
  return h.coupling * c.hbar / (4.0 * std::numbers::pi) * std::exp(-d / h.range) / d * dot(spin, v);
}

/// V_SP = g (hbar^2 / 8 pi m_e) (1/(lambda r) + 1/r^2) e^{-r/lambda} (sigma . e_r).
inline double potential_sp(const Vec3& r, const Vec3& spin, const CouplingHypothesis& h,
                           const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::sp);
  const double d = detail::checked_distance(r);
  return h.coupling * c.hbar * c.hbar / (8.0 * std::numbers::pi * c.electron_mass) *
         detail::yukawa_radial(d, h.range) * std::exp(-d / h.range) * dot(spin, r) / d;
}

/// g / (2 pi gamma_e): field per unit of (e^{-r/lambda}/r) v.
inline double av_prefactor(const CouplingHypothesis& h, const PhysicalConstants& c) {
  return h.coupling / (2.0 * std::numbers::pi * c.gamma_e);
}

/// g hbar / (4 pi m_e gamma_e).
inline double sp_prefactor(const CouplingHypothesis& h, const PhysicalConstants& c) {
  return h.coupling * c.hbar / (4.0 * std::numbers::pi * c.electron_mass * c.gamma_e);
}

/// AV effective field along the NV axis. `speed` is the signed relative
/// velocity (electron with respect to nucleon) along z. Only |r| enters.
inline double projected_field_av(const Vec3& r, double speed, double theta, const CouplingHypothesis& h,
                                 const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::av);
  const double d = detail::checked_distance(r);
  return av_prefactor(h, c) * std::exp(-d / h.range) / d * speed * std::cos(theta);
}

/// SP effective field along the NV axis with the (z/r) cos(theta) projection.
inline double projected_field_sp(const Vec3& r, double theta, const CouplingHypothesis& h,
                                 const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::sp);
  const double d = detail::checked_distance(r);
  return sp_prefactor(h, c) * detail::yukawa_radial(d, h.range) * std::exp(-d / h.range) * (r.z / d) *
         std::cos(theta);
}

/// SP effective field projected on an arbitrary unit axis (full-vector mode).
inline double axis_field_sp(const Vec3& r, const Vec3& axis, const CouplingHypothesis& h,
                            const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::sp);
  const double d = detail::checked_distance(r);
  return sp_prefactor(h, c) * detail::yukawa_radial(d, h.range) * std::exp(-d / h.range) * dot(axis, r) / d;
}

/// Full AV effective-field vector, g/(2 pi gamma) e^{-r/lambda}/r v.
inline Vec3 field_vector_av(const Vec3& r, const Vec3& v, const CouplingHypothesis& h,
                            const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::av);
  const double d = detail::checked_distance(r);
  return v * (av_prefactor(h, c) * std::exp(-d / h.range) / d);
}

/// Full SP effective-field vector along e_r.
inline Vec3 field_vector_sp(const Vec3& r, const CouplingHypothesis& h, const PhysicalConstants& c = {}) {
  detail::require_kind(h, InteractionKind::sp);
  const double d = detail::checked_distance(r);
  return r * (sp_prefactor(h, c) * detail::yukawa_radial(d, h.range) * std::exp(-d / h.range) / d);
}

namespace detail {

/// 4 pi lambda^3 (x cosh x - sinh x) with x = R/lambda, for x < 0.5, written
/// as 4 pi R^3 sum_k 2k/(2k+1)! x^(2k-2) so lambda = inf is exact.
inline double ball_form_factor_series(double radius, double x) {
  const double x2 = x * x;
  double term_power = 1.0;
  double factorial = 6.0;  // (2k+1)! at k = 1
  double sum = 0.0;
  for (int k = 1; k <= 14; ++k) {
    sum += 2.0 * k / factorial * term_power;
    term_power *= x2;
    factorial *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
  }
  return 4.0 * std::numbers::pi * radius * radius * radius * sum;
}

/// 4 pi lambda^3 (x cosh x - sinh x) e^{-D/lambda}, overflow-safe.
inline double ball_form_factor_decayed(double radius, double range, double center_distance) {
  const double x = radius / range;
  if (x < 0.5) return ball_form_factor_series(radius, x) * std::exp(-center_distance / range);
  const double l3 = range * range * range;
  const double a = center_distance / range;
  return 2.0 * std::numbers::pi * l3 * ((x - 1.0) * std::exp(x - a) + (x + 1.0) * std::exp(-x - a));
}

}  // namespace detail

/// Integral of e^{-|p - x|/lambda} / |p - x| over a ball of radius R, for a
/// point p at distance D >= R from the centre.
inline double yukawa_ball_potential(double radius, double range, double center_distance) {
  if (!(center_distance >= radius)) throw KernelError("ball integral requires an exterior point");
  return detail::ball_form_factor_decayed(radius, range, center_distance) / center_distance;
}

/// Magnitude of the integral of (1/(lambda r) + 1/r^2) e^{-r/lambda} e_r over
/// the ball; the vector points from the centre to p.
inline double yukawa_ball_radial_field(double radius, double range, double center_distance) {
  if (!(center_distance >= radius)) throw KernelError("ball integral requires an exterior point");
  return detail::ball_form_factor_decayed(radius, range, center_distance) *
         detail::yukawa_radial(center_distance, range);
}

}  // namespace exolim
