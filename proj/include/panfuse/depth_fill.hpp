#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "panfuse/image.hpp"

namespace panfuse {

/// Gaussian hole-filling window: odd kernel size g and its sigma in pixels.
struct HoleFillConfig {
  int kernel_size = 5;
  double sigma = 1.0;
};

/// Centered g x g Gaussian weights normalized to sum 1.
/// Returned row-major with the kernel center at (g/2, g/2).
inline std::vector<double> gaussian_kernel_2d(int g, double sigma) {
  if (g < 3 || g % 2 == 0)
    throw std::invalid_argument("gaussian_kernel_2d: kernel size must be odd and >= 3");
  if (!(sigma > 0.0))
    throw std::invalid_argument("gaussian_kernel_2d: sigma must be positive");

  const int half = g / 2;
  std::vector<double> weights(static_cast<std::size_t>(g) * g);
  double sum = 0.0;
  for (int v = -half; v <= half; ++v) {
    for (int u = -half; u <= half; ++u) {
      const double w = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
      weights[static_cast<std::size_t>(v + half) * g + (u + half)] = w;
      sum += w;
    }
  }
  for (double& w : weights) w /= sum;
  return weights;
}

/// Interpolates zero (missing) pixels from the Gaussian-weighted mean of the
/// nonzero pixels in their g x g neighborhood, renormalizing the weights over
/// the nonzero support. Pixels whose whole neighborhood is zero stay zero;
/// nonzero pixels pass through untouched. Reads only the input map, so the
/// result does not depend on traversal order.
inline DepthMap fill_holes(const DepthMap& depth, const HoleFillConfig& cfg = {}) {
  validate_depth_map(depth);
  const std::vector<double> kernel = gaussian_kernel_2d(cfg.kernel_size, cfg.sigma);
  const int half = cfg.kernel_size / 2;
  const int w = depth.width();
  const int h = depth.height();

  DepthMap out = depth;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (depth(x, y) != 0.0) continue;
      double acc = 0.0;
      double weight_sum = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) continue;
        for (int dx = -half; dx <= half; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= w) continue;
          const double d = depth(nx, ny);
          if (d == 0.0) continue;
          const double kw =
              kernel[static_cast<std::size_t>(dy + half) * cfg.kernel_size + (dx + half)];
          acc += kw * d;
          weight_sum += kw;
        }
      }
      if (weight_sum > 0.0) out(x, y) = acc / weight_sum;
    }
  }
  return out;
}

}  // namespace panfuse
