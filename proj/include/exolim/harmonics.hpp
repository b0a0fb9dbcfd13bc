#pragma once

// Fourier decomposition of one modulation period,
//   B(t) = b0 + sum_n [a_n sin(2 pi n f t) + b_n cos(2 pi n f t)],
// by the rectangle rule on the uniform periodic grid, which is exact for
// trigonometric polynomials of degree below N_t / 2.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "exolim/series.hpp"

namespace exolim {

struct HarmonicCoefficients {
  int n_max{0};
  double modulation_frequency{1953.0};
  double dc{0.0};  // b0
  double dc_error{0.0};
  std::vector<double> a;  // a[n-1], T
  std::vector<double> b;  // b[n-1], T
  std::vector<double> a_error;
  std::vector<double> b_error;

  double sine(int n) const { return a.at(static_cast<std::size_t>(n - 1)); }
  double cosine(int n) const { return b.at(static_cast<std::size_t>(n - 1)); }
  double sine_error(int n) const { return a_error.at(static_cast<std::size_t>(n - 1)); }
  double cosine_error(int n) const { return b_error.at(static_cast<std::size_t>(n - 1)); }
};

struct HarmonicPair {
  double sine{0.0};
  double cosine{0.0};
};

namespace detail {

inline HarmonicPair project(const std::vector<double>& values, int n) {
  const auto count = values.size();
  double s = 0.0;
  double c = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(n) * static_cast<double>(j) /
                         static_cast<double>(count);
    s += std::sin(phase) * values[j];
    c += std::cos(phase) * values[j];
  }
  const double scale = 2.0 / static_cast<double>(count);
  return {scale * s, scale * c};
}

inline double mean_of(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

/// Standard error of a weighted mean of batch estimates.
inline double batch_error(const std::vector<double>& per_batch, const std::vector<double>& weights,
                          double centre) {
  const auto count = per_batch.size();
  if (count < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double d = per_batch[k] - centre;
    acc += weights[k] * weights[k] * d * d;
  }
  return std::sqrt(acc * static_cast<double>(count) / static_cast<double>(count - 1));
}

}  // namespace detail

/// Coefficient of one harmonic for each batch of the series.
inline std::vector<HarmonicPair> batch_harmonics(const FieldTimeSeries& series, int n) {
  std::vector<HarmonicPair> out;
  out.reserve(series.batch_means.size());
  for (const auto& batch : series.batch_means) out.push_back(detail::project(batch, n));
  return out;
}

inline HarmonicCoefficients fourier_coefficients(const FieldTimeSeries& series, int n_max) {
  const auto count = series.size();
  if (n_max < 1) throw std::invalid_argument("fourier_coefficients: n_max must be at least 1");
  if (static_cast<std::size_t>(2 * n_max) >= count) {
    throw std::invalid_argument("fourier_coefficients: N_t must exceed 2 n_max");
  }
  HarmonicCoefficients out;
  out.n_max = n_max;
  out.modulation_frequency = series.modulation_frequency;
  out.dc = detail::mean_of(series.values);

  const bool batched = series.has_batches();
  const bool have_point_errors = series.errors.size() == count;

  if (batched) {
    std::vector<double> dcs;
    for (const auto& batch : series.batch_means) dcs.push_back(detail::mean_of(batch));
    out.dc_error = detail::batch_error(dcs, series.batch_weights, out.dc);
  } else if (have_point_errors) {
    double acc = 0.0;
    for (double e : series.errors) acc += e * e;
    out.dc_error = std::sqrt(acc) / static_cast<double>(count);
  }

  for (int n = 1; n <= n_max; ++n) {
    const auto coeff = detail::project(series.values, n);
    out.a.push_back(coeff.sine);
    out.b.push_back(coeff.cosine);
    double sa = 0.0;
    double sb = 0.0;
    if (batched) {
      std::vector<double> as;
      std::vector<double> bs;
      for (const auto& p : batch_harmonics(series, n)) {
        as.push_back(p.sine);
        bs.push_back(p.cosine);
      }
      sa = detail::batch_error(as, series.batch_weights, coeff.sine);
      sb = detail::batch_error(bs, series.batch_weights, coeff.cosine);
    } else if (have_point_errors) {
      // Independent per-point errors.
      const double scale = 2.0 / static_cast<double>(count);
      for (std::size_t j = 0; j < count; ++j) {
        const double phase = 2.0 * std::numbers::pi * n * static_cast<double>(j) / static_cast<double>(count);
        const double e = series.errors[j];
        sa += std::pow(scale * std::sin(phase) * e, 2);
        sb += std::pow(scale * std::cos(phase) * e, 2);
      }
      sa = std::sqrt(sa);
      sb = std::sqrt(sb);
    }
    out.a_error.push_back(sa);
    out.b_error.push_back(sb);
  }
  return out;
}

/// Truncated Fourier synthesis on the uniform grid of `time_samples` points.
inline FieldTimeSeries reconstruct(const HarmonicCoefficients& coeffs, std::size_t time_samples) {
  if (time_samples == 0) throw std::invalid_argument("reconstruct: need at least one sample");
  FieldTimeSeries out;
  out.modulation_frequency = coeffs.modulation_frequency;
  out.values.assign(time_samples, coeffs.dc);
  out.errors.assign(time_samples, 0.0);
  for (std::size_t j = 0; j < time_samples; ++j) {
    for (int n = 1; n <= coeffs.n_max; ++n) {
      const double phase =
          2.0 * std::numbers::pi * n * static_cast<double>(j) / static_cast<double>(time_samples);
      out.values[j] += coeffs.sine(n) * std::sin(phase) + coeffs.cosine(n) * std::cos(phase);
    }
  }
  return out;
}

}  // namespace exolim
