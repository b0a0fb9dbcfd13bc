#pragma once

#include <cstddef>
#include <vector>

namespace exolim {

/// Effective field sampled on the uniform phase grid t_j = j / (N_t f_M).
///
/// `batch_means` optionally holds the same series estimated from disjoint
/// sample batches that share the common random numbers across time. Linear
/// functionals of the series (Fourier coefficients) get their Monte Carlo
/// error from the spread of those batch estimates, which accounts for the
/// strong correlation between time points.
struct FieldTimeSeries {
  double modulation_frequency{1953.0};  // Hz
  std::vector<double> values;           // T
  std::vector<double> errors;           // T, per-point MC standard error
  std::vector<std::vector<double>> batch_means;  // [batch][j], T
  std::vector<double> batch_weights;             // sum to 1

  std::size_t size() const { return values.size(); }
  double time(std::size_t j) const {
    return static_cast<double>(j) / (static_cast<double>(values.size()) * modulation_frequency);
  }
  bool has_batches() const { return batch_means.size() >= 2; }
};

}  // namespace exolim
