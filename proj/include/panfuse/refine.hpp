#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "panfuse/bandwidth.hpp"
#include "panfuse/grid.hpp"
#include "panfuse/image.hpp"
#include "panfuse/kde.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

/// Depth acceptance window found on the density line.
struct DepthCutoffs {
  double low = 0.0;
  double high = 0.0;
};

struct RefineConfig {
  int grid_size = 1024;             // KDE grid points M
  double padding_bandwidths = 3.0;  // grid margin beyond sample extremes
  double density_threshold = 1e-6;  // per-meter density below which a tail is cut
  std::size_t min_samples = 32;     // masks smaller than this are left untouched
};

enum class RefineStatus {
  refined,
  skipped_empty,
  skipped_too_small,
  skipped_degenerate,
  skipped_stuff,
  skipped_no_cutoffs,
};

inline const char* to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::refined: return "refined";
    case RefineStatus::skipped_empty: return "skipped (empty mask)";
    case RefineStatus::skipped_too_small: return "skipped (too few pixels)";
    case RefineStatus::skipped_degenerate: return "skipped (degenerate depth)";
    case RefineStatus::skipped_stuff: return "skipped (stuff class)";
    case RefineStatus::skipped_no_cutoffs: return "skipped (no usable density)";
  }
  return "unknown";
}

struct RefineResult {
  InstanceMask mask;
  RefineStatus status = RefineStatus::refined;
  std::optional<DepthCutoffs> cutoffs;
  std::size_t pixels_before = 0;
  std::size_t pixels_after = 0;
  bool bandwidth_fallback = false;
};

/// Per-frame aggregate of refinement outcomes, in input mask order.
struct FrameRefineReport {
  std::vector<RefineStatus> statuses;
  std::size_t refined_count = 0;
  std::size_t skipped_count = 0;
};

/// Depth values under the mask, holes (zero depth) excluded. Reads only;
/// never mutates the caller's depth map.
inline std::vector<double> extract_instance_depths(const InstanceMask& mask,
                                                   const DepthMap& depth) {
  if (!mask.bitmap.same_size(depth))
    throw std::invalid_argument("extract_instance_depths: mask/depth dimensions differ");
  std::vector<double> out;
  const auto& bits = mask.bitmap.data();
  const auto& vals = depth.data();
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] != 0 && vals[i] != 0.0) out.push_back(vals[i]);
  return out;
}

/// Walks outward from the density peak and returns the grid values at the
/// nearest sub-threshold index on each side; a tail that never drops below
/// the threshold keeps the grid end. Degenerate (flat or everywhere
/// sub-threshold) densities yield no cutoffs.
inline std::optional<DepthCutoffs> find_cutoffs(const DensityEstimate& density,
                                                double threshold) {
  if (!(threshold > 0.0))
    throw std::invalid_argument("find_cutoffs: threshold must be positive");
  const auto& f = density.densities;
  if (f.empty()) return std::nullopt;

  const auto peak_it = std::max_element(f.begin(), f.end());
  const int peak = static_cast<int>(peak_it - f.begin());
  if (!(*peak_it > threshold) || !std::isfinite(*peak_it)) return std::nullopt;
  if (*peak_it == *std::min_element(f.begin(), f.end())) return std::nullopt;

  int left = -1;
  for (int j = peak - 1; j >= 0; --j) {
    if (f[j] < threshold) {
      left = j;
      break;
    }
  }
  int right = -1;
  for (int j = peak + 1; j < static_cast<int>(f.size()); ++j) {
    if (f[j] < threshold) {
      right = j;
      break;
    }
  }

  DepthCutoffs cutoffs;
  cutoffs.low = (left >= 0) ? density.grid.point(left) : density.grid.start;
  cutoffs.high = (right >= 0) ? density.grid.point(right) : density.grid.end;
  return cutoffs;
}

namespace detail {

inline bool depth_distribution_degenerate(const std::vector<double>& depths) {
  const double mean =
      std::accumulate(depths.begin(), depths.end(), 0.0) / depths.size();
  double var = 0.0;
  for (double d : depths) var += (d - mean) * (d - mean);
  var /= depths.size();
  return var < 1e-12;
}

inline RefineResult skipped(const InstanceMask& mask, RefineStatus status) {
  RefineResult res;
  res.mask = mask;
  res.status = status;
  res.pixels_before = mask.set_count();
  res.pixels_after = res.pixels_before;
  return res;
}

}  // namespace detail

/// Single-instance depth-density refinement: estimate the depth density under
/// the mask, locate the cutoff window around the dominant mode, and clear
/// mask pixels whose depth is missing or falls outside the window. Masks that
/// cannot support a density estimate come back unchanged with a skip status.
inline RefineResult refine_mask(const InstanceMask& mask, const DepthMap& depth,
                                const RefineConfig& cfg = {}) {
  std::vector<double> depths = extract_instance_depths(mask, depth);
  if (depths.empty()) return detail::skipped(mask, RefineStatus::skipped_empty);
  if (depths.size() < cfg.min_samples)
    return detail::skipped(mask, RefineStatus::skipped_too_small);
  if (detail::depth_distribution_degenerate(depths))
    return detail::skipped(mask, RefineStatus::skipped_degenerate);

  GridSpec grid;
  try {
    grid = make_grid(depths, cfg.grid_size, cfg.padding_bandwidths);
  } catch (const std::invalid_argument&) {
    return detail::skipped(mask, RefineStatus::skipped_degenerate);
  }
  const BinnedSample binned = linear_binning(depths, grid);

  BandwidthResult bw;
  try {
    bw = isj_bandwidth(binned);
  } catch (const std::invalid_argument&) {
    return detail::skipped(mask, RefineStatus::skipped_degenerate);
  }
  const DensityEstimate density = fft_kde(binned, bw.bandwidth);

  const std::optional<DepthCutoffs> cutoffs =
      find_cutoffs(density, cfg.density_threshold);
  if (!cutoffs) {
    RefineResult res = detail::skipped(mask, RefineStatus::skipped_no_cutoffs);
    res.bandwidth_fallback = bw.silverman_fallback;
    return res;
  }

  RefineResult res;
  res.status = RefineStatus::refined;
  res.cutoffs = cutoffs;
  res.bandwidth_fallback = bw.silverman_fallback;
  res.mask.label = mask.label;
  res.mask.bitmap = mask.bitmap;
  res.pixels_before = mask.set_count();

  auto& bits = res.mask.bitmap.data();
  const auto& vals = depth.data();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == 0) continue;
    const double d = vals[i];
    if (d == 0.0 || d < cutoffs->low || d > cutoffs->high)
      bits[i] = 0;
    else
      ++kept;
  }
  res.pixels_after = kept;
  return res;
}

/// Refines every "thing" instance against the original depth map; "stuff"
/// masks pass through. Output order matches input order and results are
/// identical whether instances are processed serially or in parallel.
inline std::vector<RefineResult> refine_all(const std::vector<InstanceMask>& masks,
                                            const DepthMap& depth,
                                            const RefineConfig& cfg = {},
                                            unsigned worker_threads = 1) {
  std::vector<RefineResult> results(masks.size());
  auto process = [&](std::size_t i) {
    if (masks[i].label.is_stuff())
      results[i] = detail::skipped(masks[i], RefineStatus::skipped_stuff);
    else
      results[i] = refine_mask(masks[i], depth, cfg);
  };

  if (worker_threads <= 1 || masks.size() <= 1) {
    for (std::size_t i = 0; i < masks.size(); ++i) process(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const unsigned count = std::min<unsigned>(worker_threads, masks.size());
    for (unsigned t = 0; t < count; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < masks.size(); i = next.fetch_add(1))
          process(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return results;
}

inline FrameRefineReport summarize_refinement(const std::vector<RefineResult>& results) {
  FrameRefineReport report;
  for (const RefineResult& r : results) {
    report.statuses.push_back(r.status);
    if (r.status == RefineStatus::refined)
      ++report.refined_count;
    else
      ++report.skipped_count;
  }
  return report;
}

}  // namespace panfuse
