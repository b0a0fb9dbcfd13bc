#pragma once

#include <numbers>

namespace exolim {

/// SI constants used by the kernels. The electron gyromagnetic ratio
/// defaults to 2*pi*28 GHz/T rather than CODATA, matching the calibration
/// of the magnetometer.
struct PhysicalConstants {
  double hbar{1.054571817e-34};         // J s
  double speed_of_light{299792458.0};   // m/s
  double electron_mass{9.1093837015e-31};  // kg
  double gamma_e{2.0 * std::numbers::pi * 28.0e9};  // rad s^-1 T^-1
  double mu0{1.25663706212e-6};         // T m / A
  double elementary_charge{1.602176634e-19};  // C (J per eV)
};

}  // namespace exolim
