#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "panfuse/frame.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

struct VoxelCoord {
  std::int32_t x = 0, y = 0, z = 0;
  friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

/// Truncated-SDF voxel: cumulative signed distance, cumulative weight, and
/// per-label accumulated vote weight (kept sorted by label).
struct Voxel {
  double tsdf = 0.0;
  double weight = 0.0;
  std::vector<std::pair<PanopticLabel, double>> label_votes;

  friend bool operator==(const Voxel&, const Voxel&) = default;
};

/// Recursive weighted SDF update: the cumulative distance becomes the
/// weighted mean of all samples seen so far, and the label vote for this
/// observation is added with the same weight.
inline void voxel_sdf_update(Voxel& voxel, double sdf_sample, double weight,
                             const std::optional<PanopticLabel>& label = std::nullopt) {
  if (!(weight > 0.0))
    throw std::invalid_argument("voxel_sdf_update: weight must be positive");
  voxel.tsdf = (voxel.weight * voxel.tsdf + weight * sdf_sample) / (voxel.weight + weight);
  voxel.weight += weight;
  if (label) {
    auto it = std::lower_bound(
        voxel.label_votes.begin(), voxel.label_votes.end(), *label,
        [](const auto& entry, const PanopticLabel& l) { return entry.first < l; });
    if (it != voxel.label_votes.end() && it->first == *label)
      it->second += weight;
    else
      voxel.label_votes.insert(it, {*label, weight});
  }
}

/// Winning label by accumulated vote weight; ties break toward the smallest
/// (class_id, instance_id). Empty when the voxel never received a vote.
inline std::optional<PanopticLabel> voxel_label(const Voxel& voxel) {
  std::optional<PanopticLabel> best;
  double best_weight = 0.0;
  for (const auto& [label, w] : voxel.label_votes) {
    if (!best || w > best_weight) {
      best = label;
      best_weight = w;
    }
  }
  return best;
}

/// Sparse truncated-SDF map with per-voxel panoptic label votes. Voxels are
/// stored in 8^3 blocks; a voxel is "observed" once its weight is positive.
class PanopticVoxelMap {
 public:
  static constexpr int kBlockEdge = 8;
  static constexpr int kBlockVoxels = kBlockEdge * kBlockEdge * kBlockEdge;

  PanopticVoxelMap(double voxel_size, double truncation,
                   const Eigen::Vector3d& origin = Eigen::Vector3d::Zero())
      : voxel_size_(voxel_size), truncation_(truncation), origin_(origin) {
    if (!(voxel_size > 0.0))
      throw std::invalid_argument("PanopticVoxelMap: voxel size must be positive");
    if (!(truncation >= voxel_size))
      throw std::invalid_argument("PanopticVoxelMap: truncation must be >= voxel size");
  }

  double voxel_size() const { return voxel_size_; }
  double truncation() const { return truncation_; }
  const Eigen::Vector3d& origin() const { return origin_; }

  std::size_t voxel_count() const { return observed_count_; }
  std::size_t block_count() const { return blocks_.size(); }

  VoxelCoord coord_of(const Eigen::Vector3d& point) const {
    const Eigen::Vector3d rel = (point - origin_) / voxel_size_;
    return {static_cast<std::int32_t>(std::floor(rel.x())),
            static_cast<std::int32_t>(std::floor(rel.y())),
            static_cast<std::int32_t>(std::floor(rel.z()))};
  }

  Eigen::Vector3d center_of(const VoxelCoord& c) const {
    return origin_ + voxel_size_ * Eigen::Vector3d(c.x + 0.5, c.y + 0.5, c.z + 0.5);
  }

  /// Observed voxel at the coordinate, or nullptr.
  const Voxel* find_voxel(const VoxelCoord& c) const {
    const auto it = blocks_.find(block_of(c));
    if (it == blocks_.end()) return nullptr;
    const Voxel& v = it->second[slot_of(c)];
    return v.weight > 0.0 ? &v : nullptr;
  }

  /// Applies one SDF observation at the coordinate, allocating on demand.
  void apply_update(const VoxelCoord& c, double sdf_sample, double weight,
                    const std::optional<PanopticLabel>& label = std::nullopt) {
    Voxel& v = voxel_at(c);
    const bool fresh = !(v.weight > 0.0);
    voxel_sdf_update(v, sdf_sample, weight, label);
    if (fresh) ++observed_count_;
  }

  /// Places a fully-specified voxel, replacing any existing state. Used when
  /// reconstructing a map from storage; the weight must be positive and the
  /// votes sorted by label.
  void set_voxel(const VoxelCoord& c, Voxel voxel) {
    if (!(voxel.weight > 0.0))
      throw std::invalid_argument("set_voxel: weight must be positive");
    if (!std::is_sorted(voxel.label_votes.begin(), voxel.label_votes.end(),
                        [](const auto& a, const auto& b) { return a.first < b.first; }))
      throw std::invalid_argument("set_voxel: votes must be sorted by label");
    Voxel& v = voxel_at(c);
    if (!(v.weight > 0.0)) ++observed_count_;
    v = std::move(voxel);
  }

  template <typename Fn>
  void for_each_observed(Fn&& fn) const {
    for (const auto& [bc, block] : blocks_) {
      for (int slot = 0; slot < kBlockVoxels; ++slot) {
        const Voxel& v = block[slot];
        if (v.weight > 0.0) fn(coord_at(bc, slot), v);
      }
    }
  }

  std::vector<VoxelCoord> observed_coords_sorted() const {
    std::vector<VoxelCoord> coords;
    coords.reserve(observed_count_);
    for_each_observed([&](const VoxelCoord& c, const Voxel&) { coords.push_back(c); });
    std::sort(coords.begin(), coords.end());
    return coords;
  }

  friend bool operator==(const PanopticVoxelMap& a, const PanopticVoxelMap& b) {
    if (a.voxel_size_ != b.voxel_size_ || a.truncation_ != b.truncation_ ||
        a.origin_ != b.origin_ || a.observed_count_ != b.observed_count_)
      return false;
    bool equal = true;
    a.for_each_observed([&](const VoxelCoord& c, const Voxel& v) {
      if (!equal) return;
      const Voxel* other = b.find_voxel(c);
      equal = other != nullptr && *other == v;
    });
    return equal;
  }

 private:
  struct BlockCoord {
    std::int32_t x = 0, y = 0, z = 0;
    friend bool operator==(const BlockCoord&, const BlockCoord&) = default;
  };

  struct BlockHash {
    std::size_t operator()(const BlockCoord& c) const {
      std::size_t h = static_cast<std::uint32_t>(c.x) * 73856093u;
      h ^= static_cast<std::uint32_t>(c.y) * 19349663u;
      h ^= static_cast<std::uint32_t>(c.z) * 83492791u;
      return h;
    }
  };

  static std::int32_t floor_div(std::int32_t a, std::int32_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
  }

  static BlockCoord block_of(const VoxelCoord& c) {
    return {floor_div(c.x, kBlockEdge), floor_div(c.y, kBlockEdge),
            floor_div(c.z, kBlockEdge)};
  }

  static int local_of(std::int32_t c) {
    const std::int32_t m = c % kBlockEdge;
    return m >= 0 ? m : m + kBlockEdge;
  }

  static int slot_of(const VoxelCoord& c) {
    return (local_of(c.z) * kBlockEdge + local_of(c.y)) * kBlockEdge + local_of(c.x);
  }

  static VoxelCoord coord_at(const BlockCoord& bc, int slot) {
    const int lx = slot % kBlockEdge;
    const int ly = (slot / kBlockEdge) % kBlockEdge;
    const int lz = slot / (kBlockEdge * kBlockEdge);
    return {bc.x * kBlockEdge + lx, bc.y * kBlockEdge + ly, bc.z * kBlockEdge + lz};
  }

  Voxel& voxel_at(const VoxelCoord& c) {
    auto& block = blocks_[block_of(c)];
    if (block.empty()) block.resize(kBlockVoxels);
    return block[slot_of(c)];
  }

  double voxel_size_;
  double truncation_;
  Eigen::Vector3d origin_;
  std::unordered_map<BlockCoord, std::vector<Voxel>, BlockHash> blocks_;
  std::size_t observed_count_ = 0;
};

enum class WeightMode { constant, inverse_square };

struct IntegrateConfig {
  WeightMode weight_mode = WeightMode::constant;
};

struct IntegrationStats {
  std::size_t voxels_updated = 0;
  std::size_t votes_cast = 0;
  std::size_t valid_depth_pixels = 0;
};

/// Projective TSDF integration of one frame: every voxel whose center falls
/// in the frustum with a valid depth pixel receives the truncated signed
/// distance (pixel depth minus voxel camera depth); voxels more than the
/// truncation behind the surface are occluded and skipped. Label votes come
/// from the frame's masks, later masks winning overlapped pixels.
inline IntegrationStats integrate_frame(PanopticVoxelMap& map,
                                        const LabeledRgbdFrame& frame,
                                        const IntegrateConfig& cfg = {}) {
  frame.validate();
  IntegrationStats stats;

  const CameraIntrinsics& intr = frame.intrinsics;
  const int w = intr.width, h = intr.height;

  // Per-pixel winning mask index (-1 unlabeled).
  Image<std::int32_t> label_index(w, h, -1);
  for (std::size_t i = 0; i < frame.masks.size(); ++i) {
    const auto& bits = frame.masks[i].bitmap.data();
    auto& idx = label_index.data();
    for (std::size_t p = 0; p < bits.size(); ++p)
      if (bits[p] != 0) idx[p] = static_cast<std::int32_t>(i);
  }

  double depth_max = 0.0;
  for (double d : frame.depth.data()) {
    if (d > 0.0) {
      depth_max = std::max(depth_max, d);
      ++stats.valid_depth_pixels;
    }
  }
  if (stats.valid_depth_pixels == 0) return stats;

  const double tau = map.truncation();
  const double far = depth_max + tau;
  const Eigen::Matrix3d world_to_cam = frame.pose.rotation.transpose();
  const Eigen::Vector3d cam_pos = frame.pose.translation;

  // World-space AABB of the visible cone (apex plus far-plane corners).
  Eigen::Vector3d lo = cam_pos, hi = cam_pos;
  for (const auto& [u, v] : {std::pair{0.0, 0.0}, std::pair{double(w - 1), 0.0},
                             std::pair{0.0, double(h - 1)},
                             std::pair{double(w - 1), double(h - 1)}}) {
    const Eigen::Vector3d dir((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    const Eigen::Vector3d corner = frame.pose.to_world(dir * far);
    lo = lo.cwiseMin(corner);
    hi = hi.cwiseMax(corner);
  }

  const double vs = map.voxel_size();
  const VoxelCoord cmin = map.coord_of(lo);
  const VoxelCoord cmax = map.coord_of(hi);
  constexpr int kB = PanopticVoxelMap::kBlockEdge;
  const auto block_floor = [](std::int32_t c) {
    return c >= 0 ? c / kB : -((-c + kB - 1) / kB);
  };

  // Normalized side-plane normals in the camera frame (interior positive).
  const double sl = (0.0 - intr.cx) / intr.fx;
  const double sr = (w - 1 - intr.cx) / intr.fx;
  const double st = (0.0 - intr.cy) / intr.fy;
  const double sb = (h - 1 - intr.cy) / intr.fy;
  const Eigen::Vector3d planes[4] = {
      Eigen::Vector3d(1, 0, -sl).normalized(), Eigen::Vector3d(-1, 0, sr).normalized(),
      Eigen::Vector3d(0, 1, -st).normalized(), Eigen::Vector3d(0, -1, sb).normalized()};
  const double block_radius = 0.5 * std::sqrt(3.0) * kB * vs;

  for (std::int32_t bz = block_floor(cmin.z); bz <= block_floor(cmax.z); ++bz) {
    for (std::int32_t by = block_floor(cmin.y); by <= block_floor(cmax.y); ++by) {
      for (std::int32_t bx = block_floor(cmin.x); bx <= block_floor(cmax.x); ++bx) {
        const Eigen::Vector3d block_center =
            map.origin() + vs * Eigen::Vector3d((bx + 0.5) * kB, (by + 0.5) * kB,
                                                (bz + 0.5) * kB);
        const Eigen::Vector3d bc_cam = world_to_cam * (block_center - cam_pos);
        if (bc_cam.z() < -block_radius || bc_cam.z() > far + block_radius) continue;
        bool culled = false;
        for (const Eigen::Vector3d& n : planes) {
          if (n.dot(bc_cam) < -block_radius) {
            culled = true;
            break;
          }
        }
        if (culled) continue;

        for (int lz = 0; lz < kB; ++lz) {
          for (int ly = 0; ly < kB; ++ly) {
            for (int lx = 0; lx < kB; ++lx) {
              const VoxelCoord vc{bx * kB + lx, by * kB + ly, bz * kB + lz};
              const Eigen::Vector3d p_cam =
                  world_to_cam * (map.center_of(vc) - cam_pos);
              const double z = p_cam.z();
              if (!(z > 0.0)) continue;
              const double u = intr.fx * p_cam.x() / z + intr.cx;
              const double v = intr.fy * p_cam.y() / z + intr.cy;
              if (u < 0.0 || u > w - 1 || v < 0.0 || v > h - 1) continue;
              const int px = static_cast<int>(std::lround(u));
              const int py = static_cast<int>(std::lround(v));
              const double pixel_depth = frame.depth(px, py);
              if (pixel_depth == 0.0) continue;
              double d = pixel_depth - z;
              if (d < -tau) continue;
              d = std::min(d, tau);

              const double weight =
                  cfg.weight_mode == WeightMode::constant ? 1.0 : 1.0 / (z * z);
              std::optional<PanopticLabel> label;
              const std::int32_t mi = label_index(px, py);
              if (mi >= 0) {
                label = frame.masks[mi].label;
                ++stats.votes_cast;
              }
              map.apply_update(vc, d, weight, label);
              ++stats.voxels_updated;
            }
          }
        }
      }
    }
  }
  return stats;
}

struct SurfacePoint {
  Eigen::Vector3d position;
  std::optional<PanopticLabel> label;
  double weight = 0.0;
};

/// Centers of observed voxels within |tsdf| < band, sorted by voxel
/// coordinate, each carrying the winning label and cumulative weight.
inline std::vector<SurfacePoint> extract_surface_points(const PanopticVoxelMap& map,
                                                        double band) {
  if (!(band > 0.0))
    throw std::invalid_argument("extract_surface_points: band must be positive");
  std::vector<SurfacePoint> points;
  for (const VoxelCoord& c : map.observed_coords_sorted()) {
    const Voxel* v = map.find_voxel(c);
    if (std::abs(v->tsdf) < band)
      points.push_back({map.center_of(c), voxel_label(*v), v->weight});
  }
  return points;
}

}  // namespace panfuse
