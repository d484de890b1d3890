#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "panfuse/fft.hpp"
#include "panfuse/grid.hpp"

namespace panfuse {

/// Density values over an equidistant grid, normalized so the trapezoidal
/// integral is 1, together with the bandwidth that produced them.
struct DensityEstimate {
  GridSpec grid;
  std::vector<double> densities;
  double bandwidth = 0.0;
};

namespace detail {

inline double gauss_pdf(double u) {
  static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::acos(-1.0));
  return inv_sqrt_2pi * std::exp(-0.5 * u * u);
}

inline double trapezoid_integral(const GridSpec& grid, std::span<const double> values) {
  double sum = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    const bool edge = (j == 0 || j + 1 == values.size());
    sum += values[j] * (edge ? 0.5 : 1.0);
  }
  return sum * grid.step();
}

}  // namespace detail

/// Binned kernel density estimate: convolves the grid counts with Gaussian
/// kernel taps sampled at grid-step multiples and scaled by 1/(mH). The
/// convolution is linear (zero-padded FFT), O(M log M), and the result is
/// renormalized to unit trapezoidal integral.
inline DensityEstimate fft_kde(const BinnedSample& binned, double bandwidth) {
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("fft_kde: bandwidth must be positive");
  const GridSpec& grid = binned.grid;
  grid.validate();
  if (static_cast<int>(binned.counts.size()) != grid.count)
    throw std::invalid_argument("fft_kde: counts/grid size mismatch");
  if (binned.sample_count == 0) throw std::invalid_argument("fft_kde: empty sample");

  const int m = grid.count;
  const double step = grid.step();
  const double scale = 1.0 / (static_cast<double>(binned.sample_count) * bandwidth);

  // Kernel taps for offsets -(M-1) .. M-1.
  std::vector<double> taps(2 * m - 1);
  for (int i = -(m - 1); i <= m - 1; ++i)
    taps[i + m - 1] = scale * detail::gauss_pdf(step * i / bandwidth);

  const std::vector<double> full = detail::convolve_full(binned.counts, taps);

  DensityEstimate est{grid, std::vector<double>(m), bandwidth};
  for (int j = 0; j < m; ++j)
    est.densities[j] = std::max(0.0, full[j + m - 1]);

  const double integral = detail::trapezoid_integral(grid, est.densities);
  if (!(integral > 0.0)) throw std::runtime_error("fft_kde: zero-mass density");
  for (double& d : est.densities) d /= integral;
  return est;
}

/// Direct kernel density estimate f(d) = 1/(mH) sum_i G((d - d_i)/H),
/// evaluated at arbitrary points in O(m * |eval_points|). Not normalized;
/// this is the reference evaluator the binned path is checked against.
inline std::vector<double> direct_kde(std::span<const double> samples, double bandwidth,
                                      std::span<const double> eval_points) {
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("direct_kde: bandwidth must be positive");
  if (samples.empty()) throw std::invalid_argument("direct_kde: empty sample");

  std::vector<double> out(eval_points.size(), 0.0);
  const double scale = 1.0 / (samples.size() * bandwidth);
  for (std::size_t j = 0; j < eval_points.size(); ++j) {
    double acc = 0.0;
    for (double x : samples) acc += detail::gauss_pdf((eval_points[j] - x) / bandwidth);
    out[j] = acc * scale;
  }
  return out;
}

}  // namespace panfuse
