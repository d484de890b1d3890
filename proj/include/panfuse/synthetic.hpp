#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "panfuse/camera.hpp"
#include "panfuse/color.hpp"
#include "panfuse/dataset.hpp"
#include "panfuse/image.hpp"
#include "panfuse/png_io.hpp"

namespace panfuse {

enum class SceneKind { plane, sphere, boxes_room };

inline SceneKind parse_scene_kind(const std::string& name) {
  if (name == "plane") return SceneKind::plane;
  if (name == "sphere") return SceneKind::sphere;
  if (name == "boxes-room") return SceneKind::boxes_room;
  throw std::invalid_argument("unknown scene '" + name +
                              "' (expected plane, sphere, or boxes-room)");
}

inline const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::plane: return "plane";
    case SceneKind::sphere: return "sphere";
    default: return "boxes-room";
  }
}

/// Parameters of a rendered test sequence. World frame is y-down (matching
/// the camera convention: x right, y down, z forward); the room floor lies
/// at y=0 and cameras hover at negative y.
struct SyntheticSceneSpec {
  SceneKind kind = SceneKind::boxes_room;
  int frames = 30;
  int width = 640;
  int height = 480;
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  double depth_scale = 1000.0;
  double depth_sigma = 0.0;  // Gaussian depth noise, meters
  double hole_prob = 0.0;    // iid chance a valid depth pixel is dropped
  double leak_prob = 0.0;    // chance a near-boundary background pixel leaks
                             // into a thing mask
  std::uint64_t seed = 12345;
  bool write_rgb = true;

  CameraIntrinsics intrinsics() const {
    return {fx, fy, cx, cy, width, height, depth_scale};
  }

  void validate() const {
    intrinsics().validate();
    if (frames <= 0) throw std::invalid_argument("frames must be positive");
    if (depth_sigma < 0.0) throw std::invalid_argument("depth_sigma must be >= 0");
    if (hole_prob < 0.0 || hole_prob >= 1.0)
      throw std::invalid_argument("hole_prob must be in [0, 1)");
    if (leak_prob < 0.0 || leak_prob > 1.0)
      throw std::invalid_argument("leak_prob must be in [0, 1]");
  }
};

struct RenderedFrame {
  Pose pose;
  DepthMap depth;                    // corrupted and quantized
  Image<std::uint16_t> gt_mask;      // true instance ids
  Image<std::uint16_t> input_mask;   // corrupted instance ids
  RgbImage rgb;
};

struct SyntheticSequence {
  SequenceManifest manifest;
  std::vector<RenderedFrame> frames;
};

namespace detail {

struct ScenePlane {
  Eigen::Vector3d point, normal;
  std::uint16_t id;
};

struct SceneSphere {
  Eigen::Vector3d center;
  double radius;
  std::uint16_t id;
};

struct SceneBox {
  Eigen::Vector3d min, max;
  std::uint16_t id;
};

struct SceneModel {
  std::vector<ScenePlane> planes;
  std::vector<SceneSphere> spheres;
  std::vector<SceneBox> boxes;
  std::vector<std::uint16_t> thing_ids;  // instances subject to mask corruption
};

/// Nearest intersection of the ray o + s*d (d unnormalized, camera-frame
/// z component 1, so s equals camera depth). Returns s and the instance id.
inline bool ray_hit(const SceneModel& scene, const Eigen::Vector3d& o,
                    const Eigen::Vector3d& d, double& s_out,
                    std::uint16_t& id_out) {
  double best = std::numeric_limits<double>::infinity();
  std::uint16_t best_id = 0;
  constexpr double kMin = 1e-9;

  for (const ScenePlane& p : scene.planes) {
    const double denom = d.dot(p.normal);
    if (std::abs(denom) < 1e-12) continue;
    const double s = (p.point - o).dot(p.normal) / denom;
    if (s > kMin && s < best) {
      best = s;
      best_id = p.id;
    }
  }
  for (const SceneSphere& sp : scene.spheres) {
    const Eigen::Vector3d oc = o - sp.center;
    const double a = d.squaredNorm();
    const double b = 2.0 * d.dot(oc);
    const double c = oc.squaredNorm() - sp.radius * sp.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) continue;
    const double root = std::sqrt(disc);
    for (const double s : {(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)}) {
      if (s > kMin && s < best) {
        best = s;
        best_id = sp.id;
        break;
      }
    }
  }
  for (const SceneBox& box : scene.boxes) {
    double s_enter = kMin, s_exit = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int axis = 0; axis < 3 && !miss; ++axis) {
      if (std::abs(d[axis]) < 1e-12) {
        miss = o[axis] < box.min[axis] || o[axis] > box.max[axis];
        continue;
      }
      double s0 = (box.min[axis] - o[axis]) / d[axis];
      double s1 = (box.max[axis] - o[axis]) / d[axis];
      if (s0 > s1) std::swap(s0, s1);
      s_enter = std::max(s_enter, s0);
      s_exit = std::min(s_exit, s1);
      miss = s_enter > s_exit;
    }
    if (!miss && s_enter < best) {
      best = s_enter;
      best_id = box.id;
    }
  }
  if (!std::isfinite(best)) return false;
  s_out = best;
  id_out = best_id;
  return true;
}

/// Camera-to-world pose looking from eye toward target, camera y pointing
/// toward world +y (down).
inline Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = Eigen::Vector3d(0, 1, 0).cross(z);
  if (x.norm() < 1e-9) x = Eigen::Vector3d(1, 0, 0);  // looking straight down
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Pose pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = z;
  pose.translation = eye;
  return pose;
}

inline SceneModel build_scene(SceneKind kind, SequenceManifest& manifest) {
  SceneModel scene;
  switch (kind) {
    case SceneKind::plane:
      scene.planes.push_back({{0, 0, 2}, {0, 0, -1}, 1});
      scene.thing_ids = {1};
      manifest.classes[1] = {1, "plane", true};
      manifest.instance_classes[1] = 1;
      break;
    case SceneKind::sphere:
      scene.spheres.push_back({{0, 0, 0}, 1.0, 1});
      scene.thing_ids = {1};
      manifest.classes[1] = {1, "sphere", true};
      manifest.instance_classes[1] = 1;
      break;
    case SceneKind::boxes_room:
      // Room shell: floor at y=0 (labeled stuff) and four unlabeled walls.
      scene.planes.push_back({{0, 0, 0}, {0, -1, 0}, 1});
      scene.planes.push_back({{3, 0, 0}, {-1, 0, 0}, 0});
      scene.planes.push_back({{-3, 0, 0}, {1, 0, 0}, 0});
      scene.planes.push_back({{0, 0, 3}, {0, 0, -1}, 0});
      scene.planes.push_back({{0, 0, -3}, {0, 0, 1}, 0});
      // Boxes hover in the room interior so every silhouette stands against
      // background well behind it, the regime mask refinement targets.
      scene.boxes.push_back({{-1.45, -1.15, -1.1}, {-0.85, -0.55, -0.5}, 10});
      scene.boxes.push_back({{0.75, -1.25, -0.4}, {1.45, -0.65, 0.25}, 11});
      scene.boxes.push_back({{-0.35, -1.05, 0.95}, {0.25, -0.55, 1.45}, 12});
      scene.thing_ids = {10, 11, 12};
      manifest.classes[1] = {1, "floor", false};
      manifest.classes[2] = {2, "box", true};
      manifest.instance_classes[1] = 1;
      manifest.instance_classes[10] = 2;
      manifest.instance_classes[11] = 2;
      manifest.instance_classes[12] = 2;
      break;
  }
  return scene;
}

inline Pose trajectory_pose(SceneKind kind, int frame, int total) {
  const double t = total > 1 ? double(frame) / (total - 1) : 0.0;
  const double theta = 2.0 * std::numbers::pi * t;
  switch (kind) {
    case SceneKind::plane:
      return look_at({0.25 * std::sin(theta), 0.15 * std::cos(theta), 0.3 * t},
                     {0, 0, 2});
    case SceneKind::sphere:
      return look_at({3.0 * std::sin(theta), 0.9 * std::sin(2.0 * theta),
                      3.0 * std::cos(theta)},
                     {0, 0, 0});
    default:
      // Orbit at box height looking level, keeping the boxes framed against
      // the walls and floor a couple of meters behind them.
      return look_at({2.6 * std::sin(theta), -1.0 + 0.15 * std::sin(2.0 * theta),
                      2.6 * std::cos(theta)},
                     {0, -0.9, 0});
  }
}

/// Corrupts one thing mask: the one-pixel dilation ring is always leaked,
/// and background pixels within Chebyshev distance 8 leak with leak_prob.
inline void corrupt_mask(Image<std::uint16_t>& input_mask,
                         const Image<std::uint16_t>& gt_mask, std::uint16_t id,
                         double leak_prob, std::mt19937_64& rng) {
  const int w = gt_mask.width(), h = gt_mask.height();
  int x0 = w, x1 = -1, y0 = h, y1 = -1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt_mask(x, y) == id) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < x0) return;  // instance not visible in this frame

  constexpr int kReach = 8;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int y = std::max(0, y0 - kReach); y <= std::min(h - 1, y1 + kReach); ++y) {
    for (int x = std::max(0, x0 - kReach); x <= std::min(w - 1, x1 + kReach); ++x) {
      if (gt_mask(x, y) == id) continue;
      int dist = kReach + 1;
      for (int dy = -kReach; dy <= kReach && dist > 1; ++dy) {
        for (int dx = -kReach; dx <= kReach; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (!gt_mask.in_bounds(nx, ny) || gt_mask(nx, ny) != id) continue;
          dist = std::min(dist, std::max(std::abs(dx), std::abs(dy)));
          if (dist <= 1) break;
        }
      }
      if (dist > kReach) continue;
      if (dist <= 1 || coin(rng) < leak_prob) input_mask(x, y) = id;
    }
  }
}

}  // namespace detail

inline SyntheticSequence render_synthetic_sequence(const SyntheticSceneSpec& spec) {
  spec.validate();
  SyntheticSequence seq;
  seq.manifest.intrinsics = spec.intrinsics();
  seq.manifest.frame_count = spec.frames;
  const detail::SceneModel scene = detail::build_scene(spec.kind, seq.manifest);

  const int w = spec.width, h = spec.height;
  seq.frames.reserve(spec.frames);
  for (int frame = 0; frame < spec.frames; ++frame) {
    std::mt19937_64 rng(spec.seed + static_cast<std::uint64_t>(frame));
    std::normal_distribution<double> noise(0.0, spec.depth_sigma);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    RenderedFrame out;
    out.pose = detail::trajectory_pose(spec.kind, frame, spec.frames);
    out.depth = DepthMap(w, h, 0.0);
    out.gt_mask = Image<std::uint16_t>(w, h, 0);
    out.rgb = RgbImage(w, h, kUnlabeledColor);

    const Eigen::Vector3d origin = out.pose.translation;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Eigen::Vector3d dir_cam((x - spec.cx) / spec.fx,
                                      (y - spec.cy) / spec.fy, 1.0);
        const Eigen::Vector3d dir = out.pose.rotation * dir_cam;
        double s = 0.0;
        std::uint16_t id = 0;
        if (!detail::ray_hit(scene, origin, dir, s, id)) continue;

        double d = s;
        if (spec.depth_sigma > 0.0) d += noise(rng);
        if (spec.hole_prob > 0.0 && coin(rng) < spec.hole_prob) d = 0.0;
        if (d > 0.0) {
          // Round-trip through the 16-bit wire format so in-memory frames
          // match what a reader would load from disk.
          const double q =
              std::min(std::round(d * spec.depth_scale), 65535.0);
          out.depth(x, y) = q / spec.depth_scale;
        }
        out.gt_mask(x, y) = id;
        const Rgb8 base = id_color(id);
        const double shade = 1.0 / (1.0 + 0.15 * s);
        out.rgb(x, y) = {static_cast<std::uint8_t>(base.r * shade),
                         static_cast<std::uint8_t>(base.g * shade),
                         static_cast<std::uint8_t>(base.b * shade)};
      }
    }

    out.input_mask = out.gt_mask;
    if (spec.leak_prob > 0.0)
      for (const std::uint16_t id : scene.thing_ids)
        detail::corrupt_mask(out.input_mask, out.gt_mask, id, spec.leak_prob, rng);

    seq.frames.push_back(std::move(out));
  }
  return seq;
}

inline void write_synthetic_sequence(const std::filesystem::path& dir,
                                     const SyntheticSequence& seq,
                                     bool write_rgb = true) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "mask");
  fs::create_directories(dir / "mask_gt");
  fs::create_directories(dir / "pose");
  if (write_rgb) fs::create_directories(dir / "rgb");

  write_manifest(dir / "manifest.txt", seq.manifest);
  const double scale = seq.manifest.intrinsics.depth_scale;
  for (int i = 0; i < static_cast<int>(seq.frames.size()); ++i) {
    const RenderedFrame& f = seq.frames[i];
    write_png_gray16(dir / "depth" / frame_file_name(i, "png"),
                     encode_depth(f.depth, scale));
    write_png_gray16(dir / "mask" / frame_file_name(i, "png"), f.input_mask);
    write_png_gray16(dir / "mask_gt" / frame_file_name(i, "png"), f.gt_mask);
    write_pose_file(dir / "pose" / frame_file_name(i, "txt"), f.pose);
    if (write_rgb) write_png_rgb8(dir / "rgb" / frame_file_name(i, "png"), f.rgb);
  }
}

inline void generate_synthetic_sequence(const std::filesystem::path& dir,
                                        const SyntheticSceneSpec& spec) {
  write_synthetic_sequence(dir, render_synthetic_sequence(spec), spec.write_rgb);
}

/// In-memory view of a rendered frame as the fusion input type.
inline LabeledRgbdFrame to_labeled_frame(const SyntheticSequence& seq, int index) {
  const RenderedFrame& f = seq.frames.at(index);
  LabeledRgbdFrame frame;
  frame.intrinsics = seq.manifest.intrinsics;
  frame.depth = f.depth;
  frame.masks = decode_mask_image(f.input_mask, seq.manifest);
  frame.pose = f.pose;
  frame.rgb = f.rgb;
  return frame;
}

}  // namespace panfuse
