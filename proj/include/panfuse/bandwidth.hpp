#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "panfuse/fft.hpp"
#include "panfuse/grid.hpp"

namespace panfuse {

/// Selected kernel bandwidth in meters. `silverman_fallback` is set when the
/// ISJ fixed-point equation had no admissible root and the rule-of-thumb was
/// used instead.
struct BandwidthResult {
  double bandwidth = 0.0;
  bool silverman_fallback = false;
};

namespace detail {

/// Botev fixed-point residual t - xi * gamma^[7](t), evaluated on squared
/// cosine coefficients a2_k of the binned sample distribution. `k2` holds
/// k^2 for k = 1..M-1.
inline double isj_fixed_point(double t, double n, const std::vector<double>& k2,
                              const std::vector<double>& a2) {
  constexpr int kStages = 7;
  const double pi = std::acos(-1.0);
  const std::size_t m = k2.size();

  double f = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    f += std::pow(k2[i], kStages) * a2[i] * std::exp(-k2[i] * pi * pi * t);
  f *= 2.0 * std::pow(pi, 2 * kStages);

  for (int s = kStages - 1; s >= 2; --s) {
    double odd_factorial = 1.0;  // (2s - 1)!!
    for (int i = 3; i <= 2 * s - 1; i += 2) odd_factorial *= i;
    const double k0 = odd_factorial / std::sqrt(2.0 * pi);
    const double cst = (1.0 + std::pow(0.5, s + 0.5)) / 3.0;
    if (!(f > 0.0) || !std::isfinite(f)) return std::numeric_limits<double>::quiet_NaN();
    const double time = std::pow(2.0 * cst * k0 / (n * f), 2.0 / (3.0 + 2.0 * s));
    f = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      f += std::pow(k2[i], s) * a2[i] * std::exp(-k2[i] * pi * pi * time);
    f *= 2.0 * std::pow(pi, 2 * s);
  }
  if (!(f > 0.0) || !std::isfinite(f)) return std::numeric_limits<double>::quiet_NaN();
  return t - std::pow(2.0 * n * std::sqrt(pi) * f, -0.4);
}

/// Silverman's rule evaluated on binned weights (meters).
inline double silverman_from_binned(const BinnedSample& binned) {
  const GridSpec& grid = binned.grid;
  const double total = std::accumulate(binned.counts.begin(), binned.counts.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("silverman_from_binned: empty binning");

  double mean = 0.0;
  for (int j = 0; j < grid.count; ++j) mean += binned.counts[j] * grid.point(j);
  mean /= total;
  double var = 0.0;
  for (int j = 0; j < grid.count; ++j) {
    const double d = grid.point(j) - mean;
    var += binned.counts[j] * d * d;
  }
  var /= total;

  auto weighted_quantile = [&](double q) {
    const double target = q * total;
    double cum = 0.0;
    for (int j = 0; j < grid.count; ++j) {
      const double next = cum + binned.counts[j];
      if (next >= target) {
        if (binned.counts[j] <= 0.0) return grid.point(j);
        const double frac = (target - cum) / binned.counts[j];
        return grid.point(j) - grid.step() * 0.5 + grid.step() * frac;
      }
      cum = next;
    }
    return grid.end;
  };

  const double sd = std::sqrt(var);
  const double iqr = weighted_quantile(0.75) - weighted_quantile(0.25);
  double scale = sd;
  if (iqr > 0.0) scale = std::min(scale, iqr / 1.34);
  return 0.9 * scale * std::pow(static_cast<double>(binned.sample_count), -0.2);
}

}  // namespace detail

/// Improved Sheather-Jones plug-in bandwidth: the fixed-point equation is
/// solved over the DCT-II coefficients of the binned counts, with the grid
/// range mapped to the unit interval, then rescaled. Falls back to
/// Silverman's rule when no root exists in (0, 0.1 * range^2] or when the
/// root lies below one grid step (see below).
inline BandwidthResult isj_bandwidth(const BinnedSample& binned) {
  const GridSpec& grid = binned.grid;
  grid.validate();
  if (binned.sample_count < 2)
    throw std::invalid_argument("isj_bandwidth: need at least 2 samples");
  if (static_cast<int>(binned.counts.size()) != grid.count)
    throw std::invalid_argument("isj_bandwidth: counts/grid size mismatch");

  const double total = std::accumulate(binned.counts.begin(), binned.counts.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("isj_bandwidth: empty binning");

  std::vector<double> probs(binned.counts.size());
  for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = binned.counts[j] / total;

  // Variance precondition, checked on the binned distribution.
  {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < grid.count; ++j) mean += probs[j] * grid.point(j);
    for (int j = 0; j < grid.count; ++j) {
      const double d = grid.point(j) - mean;
      var += probs[j] * d * d;
    }
    if (!(var > 1e-12))
      throw std::invalid_argument("isj_bandwidth: sample variance is degenerate");
  }

  const std::vector<double> dct = detail::dct2(probs);
  const std::size_t m = dct.size() - 1;
  std::vector<double> k2(m), a2(m);
  double a2_total = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    k2[k - 1] = static_cast<double>(k) * static_cast<double>(k);
    const double coeff = dct[k] / 2.0;
    a2[k - 1] = coeff * coeff;
    a2_total += a2[k - 1];
  }

  const double n = static_cast<double>(binned.sample_count);
  const double range = grid.end - grid.start;
  const auto silverman = [&] {
    return BandwidthResult{detail::silverman_from_binned(binned), true};
  };
  if (!(a2_total > 0.0)) return silverman();

  auto residual = [&](double t) { return detail::isj_fixed_point(t, n, k2, a2); };

  // Bracket the smallest root: expand the upper end until the residual turns
  // positive, then bisect. t lives in units of range^2.
  const double n_clamped = std::clamp(n, 50.0, 1050.0);
  double hi = 1e-12 + 0.01 * (n_clamped - 50.0) / 1000.0;
  const double f_lo = residual(0.0);
  if (std::isnan(f_lo)) return silverman();

  double f_hi = residual(hi);
  while (!(f_hi > 0.0)) {
    if (std::isnan(f_hi)) return silverman();
    hi *= 2.0;
    if (hi > 0.1) return silverman();
    f_hi = residual(hi);
  }

  double lo = 0.0;
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = residual(mid);
    if (std::isnan(f_mid)) return silverman();
    if (f_mid > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  const double t_star = 0.5 * (lo + hi);
  if (!(t_star > 0.0)) return silverman();

  // Tied or quantized samples put atoms into the empirical distribution, and
  // the fixed point then collapses towards zero, tracking the tick structure
  // rather than any continuous density. A kernel narrower than one grid step
  // is below the resolution of the binned estimator itself, so such a root is
  // not an admissible solution; treat it like a failed solve.
  const double h = std::sqrt(t_star) * range;
  if (h < grid.step()) return silverman();
  return BandwidthResult{h, false};
}

}  // namespace panfuse
