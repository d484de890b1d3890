#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace panfuse {

/// Equidistant 1D grid of `count` points spanning [start, end].
struct GridSpec {
  double start = 0.0;
  double end = 1.0;
  int count = 0;

  double step() const { return (end - start) / (count - 1); }

  double point(int j) const { return start + step() * j; }

  void validate() const {
    if (count < 16) throw std::invalid_argument("GridSpec: need at least 16 grid points");
    if (!(start < end)) throw std::invalid_argument("GridSpec: start must be below end");
  }
};

/// Sample mass spread over a grid by linear binning; `sample_count` keeps the
/// original number of samples m (sum of counts equals m).
struct BinnedSample {
  GridSpec grid;
  std::vector<double> counts;
  std::size_t sample_count = 0;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline double sample_std(std::span<const double> samples) {
  const std::size_t n = samples.size();
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1));
}

}  // namespace detail

/// Silverman's rule-of-thumb bandwidth (robust form with the IQR guard).
inline double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = detail::sample_std(samples);
  const double iqr =
      detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
  double scale = sd;
  if (iqr > 0.0) scale = std::min(scale, iqr / 1.34);
  if (!(scale > 0.0)) scale = sd;
  return 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
}

/// Builds a grid covering the samples with `padding_bandwidths` Silverman
/// bandwidths of margin on each side. Fails on degenerate (zero-range)
/// samples.
inline GridSpec make_grid(std::span<const double> samples, int count,
                          double padding_bandwidths) {
  if (count < 16) throw std::invalid_argument("make_grid: need at least 16 grid points");
  if (samples.size() < 2) throw std::invalid_argument("make_grid: need at least 2 samples");
  const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
  if (!(*min_it < *max_it))
    throw std::invalid_argument("make_grid: samples have zero range");
  double pad = 0.0;
  if (padding_bandwidths > 0.0)
    pad = padding_bandwidths * silverman_bandwidth(samples);
  GridSpec grid{*min_it - pad, *max_it + pad, count};
  grid.validate();
  return grid;
}

/// Splits each sample's unit mass between its two bracketing grid points,
/// proportionally to proximity. Samples outside the grid are rejected.
inline BinnedSample linear_binning(std::span<const double> samples, const GridSpec& grid) {
  grid.validate();
  BinnedSample binned{grid, std::vector<double>(grid.count, 0.0), samples.size()};
  const double step = grid.step();
  for (double x : samples) {
    if (x < grid.start || x > grid.end)
      throw std::out_of_range("linear_binning: sample outside grid range");
    const double pos = (x - grid.start) / step;
    int j = static_cast<int>(pos);
    if (j >= grid.count - 1) j = grid.count - 2;
    const double frac = pos - j;
    binned.counts[j] += 1.0 - frac;
    binned.counts[j + 1] += frac;
  }
  return binned;
}

}  // namespace panfuse
