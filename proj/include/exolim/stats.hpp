#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace exolim {

/// Streaming mean and variance (Welford), mergeable in a fixed order.
class RunningStats {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
    min_ = count_ == 1 ? x : std::min(min_, x);
    max_ = count_ == 1 ? x : std::max(max_, x);
  }

  void merge(const RunningStats& o) {
    if (o.count_ == 0) return;
    if (count_ == 0) {
      *this = o;
      return;
    }
    const auto n = static_cast<double>(count_ + o.count_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * static_cast<double>(o.count_) / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(count_) * static_cast<double>(o.count_) / n;
    count_ += o.count_;
    min_ = std::min(min_, o.min_);
    max_ = std::max(max_, o.max_);
  }

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double min() const { return min_; }
  double max() const { return max_; }

 private:
  std::uint64_t count_{0};
  double mean_{0.0};
  double m2_{0.0};
  double min_{0.0};
  double max_{0.0};
};

/// Fixed-range histogram; out-of-range values go to the underflow and
/// overflow counters.
struct Histogram {
  double lower{0.0};
  double upper{1.0};
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow{0};
  std::uint64_t overflow{0};

  Histogram() = default;
  Histogram(double lo, double hi, std::size_t bins) : lower(lo), upper(hi), counts(bins, 0) {
    if (!(hi > lo) || bins == 0) throw std::invalid_argument("histogram needs hi > lo and at least one bin");
  }

  double bin_width() const { return (upper - lower) / static_cast<double>(counts.size()); }
  double bin_center(std::size_t i) const { return lower + (static_cast<double>(i) + 0.5) * bin_width(); }

  void add(double x) {
    if (x < lower) {
      ++underflow;
    } else if (x >= upper) {
      ++overflow;
    } else {
      auto i = static_cast<std::size_t>((x - lower) / bin_width());
      ++counts[std::min(i, counts.size() - 1)];
    }
  }

  void merge(const Histogram& o) {
    if (o.counts.size() != counts.size() || o.lower != lower || o.upper != upper) {
      throw std::invalid_argument("histogram binning mismatch");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    underflow += o.underflow;
    overflow += o.overflow;
  }
};

struct GaussianFit {
  double mean{0.0};
  double sigma{0.0};
  double standard_error{0.0};
  std::uint64_t count{0};
  bool degenerate{false};  // zero spread
};

/// Maximum-likelihood Gaussian parameters from running moments. The ML
/// sigma uses 1/N; the reported sigma uses the unbiased 1/(N-1) form, which
/// differs by a factor sqrt(N/(N-1)).
inline GaussianFit gaussian_fit(const RunningStats& s) {
  GaussianFit f;
  f.count = s.count();
  f.mean = s.mean();
  f.sigma = s.stddev();
  f.standard_error = f.count > 0 ? f.sigma / std::sqrt(static_cast<double>(f.count)) : 0.0;
  f.degenerate = !(f.sigma > 0.0);
  return f;
}

inline constexpr std::size_t kMinimumFitSamples = 100;

inline GaussianFit gaussian_fit(std::span<const double> samples) {
  if (samples.size() < kMinimumFitSamples) {
    throw std::invalid_argument("gaussian_fit needs at least 100 samples");
  }
  RunningStats s;
  for (double x : samples) s.add(x);
  return gaussian_fit(s);
}

/// Gaussian parameters from binned data (bin centres, Sheppard-corrected).
inline GaussianFit fit_histogram(const Histogram& h) {
  double n = 0.0;
  double s1 = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    n += static_cast<double>(h.counts[i]);
    s1 += static_cast<double>(h.counts[i]) * h.bin_center(i);
  }
  GaussianFit f;
  if (n < 2.0) {
    f.degenerate = true;
    return f;
  }
  f.count = static_cast<std::uint64_t>(n);
  f.mean = s1 / n;
  double s2 = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double d = h.bin_center(i) - f.mean;
    s2 += static_cast<double>(h.counts[i]) * d * d;
  }
  const double w = h.bin_width();
  f.sigma = std::sqrt(std::max(0.0, s2 / (n - 1.0) - w * w / 12.0));
  f.standard_error = f.sigma / std::sqrt(n);
  f.degenerate = !(f.sigma > 0.0);
  return f;
}

/// Linear-interpolation percentile (q in [0, 1]) of unsorted data.
inline double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("percentile of empty data");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile level must lie in [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

inline double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>{}, x); }

}  // namespace exolim
