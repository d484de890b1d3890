#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "panfuse/camera.hpp"
#include "panfuse/frame.hpp"
#include "panfuse/mask.hpp"
#include "panfuse/png_io.hpp"

namespace panfuse {

struct ClassDef {
  int id = 0;
  std::string name;
  bool is_thing = true;
};

/// Sequence description parsed from manifest.txt. Pixel values in mask
/// images are instance ids; the manifest maps each id to its class, and
/// stuff instances collapse to instance id 0 in panoptic labels.
struct SequenceManifest {
  CameraIntrinsics intrinsics;
  int frame_count = 0;
  std::map<int, ClassDef> classes;
  std::map<std::uint32_t, int> instance_classes;

  PanopticLabel label_for_instance(std::uint16_t instance_id) const {
    const auto it = instance_classes.find(instance_id);
    if (it == instance_classes.end())
      throw std::runtime_error("manifest: unknown instance id " +
                               std::to_string(instance_id));
    const auto cls = classes.find(it->second);
    if (cls == classes.end())
      throw std::runtime_error("manifest: instance " + std::to_string(instance_id) +
                               " references unknown class " +
                               std::to_string(it->second));
    return {cls->second.id, cls->second.is_thing ? instance_id : 0u};
  }

  void validate() const {
    intrinsics.validate();
    if (frame_count <= 0)
      throw std::runtime_error("manifest: frames must be positive");
    for (const auto& [iid, cid] : instance_classes) {
      if (iid == 0)
        throw std::runtime_error("manifest: instance id 0 is reserved for unlabeled");
      if (!classes.contains(cid))
        throw std::runtime_error("manifest: instance " + std::to_string(iid) +
                                 " references unknown class " + std::to_string(cid));
    }
  }
};

namespace detail {

inline std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("manifest: bad numeric value '" + value + "' for " + key);
  }
}

inline long parse_integer(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("manifest: bad integer value '" + value + "' for " + key);
  }
}

}  // namespace detail

inline SequenceManifest parse_manifest(std::istream& in) {
  SequenceManifest m;
  m.intrinsics = {};
  std::map<std::string, bool> seen = {{"width", false},       {"height", false},
                                      {"fx", false},          {"fy", false},
                                      {"cx", false},          {"cy", false},
                                      {"depth_scale", false}, {"frames", false}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("manifest: line " + std::to_string(line_no) +
                               " is not key=value");
    const std::string key = detail::trimmed(t.substr(0, eq));
    const std::string value = detail::trimmed(t.substr(eq + 1));

    if (key == "width")
      m.intrinsics.width = static_cast<int>(detail::parse_integer(value, key));
    else if (key == "height")
      m.intrinsics.height = static_cast<int>(detail::parse_integer(value, key));
    else if (key == "fx")
      m.intrinsics.fx = detail::parse_number(value, key);
    else if (key == "fy")
      m.intrinsics.fy = detail::parse_number(value, key);
    else if (key == "cx")
      m.intrinsics.cx = detail::parse_number(value, key);
    else if (key == "cy")
      m.intrinsics.cy = detail::parse_number(value, key);
    else if (key == "depth_scale")
      m.intrinsics.depth_scale = detail::parse_number(value, key);
    else if (key == "frames")
      m.frame_count = static_cast<int>(detail::parse_integer(value, key));
    else if (key.starts_with("class.")) {
      const int id = static_cast<int>(detail::parse_integer(key.substr(6), key));
      const auto colon = value.rfind(':');
      if (colon == std::string::npos)
        throw std::runtime_error("manifest: class value '" + value +
                                 "' is not name:thing|stuff");
      ClassDef def;
      def.id = id;
      def.name = value.substr(0, colon);
      const std::string kind = value.substr(colon + 1);
      if (kind == "thing")
        def.is_thing = true;
      else if (kind == "stuff")
        def.is_thing = false;
      else
        throw std::runtime_error("manifest: class kind '" + kind +
                                 "' is neither thing nor stuff");
      if (!m.classes.emplace(id, std::move(def)).second)
        throw std::runtime_error("manifest: duplicate class id " + std::to_string(id));
    } else if (key.starts_with("instance.")) {
      const long iid = detail::parse_integer(key.substr(9), key);
      if (iid <= 0 || iid > 0xFFFF)
        throw std::runtime_error("manifest: instance id " + std::to_string(iid) +
                                 " out of range");
      const int cid = static_cast<int>(detail::parse_integer(value, key));
      if (!m.instance_classes.emplace(static_cast<std::uint32_t>(iid), cid).second)
        throw std::runtime_error("manifest: duplicate instance id " +
                                 std::to_string(iid));
    } else {
      throw std::runtime_error("manifest: unknown key '" + key + "' on line " +
                               std::to_string(line_no));
    }
    if (auto it = seen.find(key); it != seen.end()) {
      if (it->second)
        throw std::runtime_error("manifest: duplicate key '" + key + "'");
      it->second = true;
    }
  }
  for (const auto& [key, present] : seen)
    if (!present) throw std::runtime_error("manifest: missing key '" + key + "'");
  m.validate();
  return m;
}

inline SequenceManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  try {
    return parse_manifest(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_manifest(const std::filesystem::path& path,
                           const SequenceManifest& m) {
  m.validate();
  std::ostringstream out;
  out.precision(17);
  out << "width=" << m.intrinsics.width << "\n";
  out << "height=" << m.intrinsics.height << "\n";
  out << "fx=" << m.intrinsics.fx << "\n";
  out << "fy=" << m.intrinsics.fy << "\n";
  out << "cx=" << m.intrinsics.cx << "\n";
  out << "cy=" << m.intrinsics.cy << "\n";
  out << "depth_scale=" << m.intrinsics.depth_scale << "\n";
  out << "frames=" << m.frame_count << "\n";
  for (const auto& [id, def] : m.classes)
    out << "class." << id << "=" << def.name << ":" << (def.is_thing ? "thing" : "stuff")
        << "\n";
  for (const auto& [iid, cid] : m.instance_classes)
    out << "instance." << iid << "=" << cid << "\n";
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write manifest " + path.string());
  file << out.str();
}

inline std::string frame_file_name(int index, const char* extension) {
  if (index < 0) throw std::invalid_argument("frame index must be non-negative");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.%s", index, extension);
  return buf;
}

/// Splits a 16-bit instance-id image into per-instance binary masks, sorted
/// by instance id ascending; pixel value 0 is unlabeled.
inline std::vector<InstanceMask> decode_mask_image(const Image<std::uint16_t>& ids,
                                                   const SequenceManifest& manifest) {
  std::map<std::uint16_t, InstanceMask> by_id;
  for (int y = 0; y < ids.height(); ++y) {
    for (int x = 0; x < ids.width(); ++x) {
      const std::uint16_t iid = ids(x, y);
      if (iid == 0) continue;
      auto it = by_id.find(iid);
      if (it == by_id.end()) {
        InstanceMask mask;
        mask.bitmap = Image<std::uint8_t>(ids.width(), ids.height(), 0);
        mask.label = manifest.label_for_instance(iid);
        it = by_id.emplace(iid, std::move(mask)).first;
      }
      it->second.bitmap(x, y) = 1;
    }
  }
  std::vector<InstanceMask> masks;
  masks.reserve(by_id.size());
  for (auto& [iid, mask] : by_id) masks.push_back(std::move(mask));
  return masks;
}

/// Flattens binary masks into a 16-bit instance-id image; where masks
/// overlap, the later entry wins.
inline Image<std::uint16_t> encode_mask_image(
    int width, int height,
    const std::vector<std::pair<std::uint16_t, const Image<std::uint8_t>*>>& layers) {
  Image<std::uint16_t> out(width, height, 0);
  for (const auto& [iid, bitmap] : layers) {
    if (iid == 0) throw std::invalid_argument("encode_mask_image: instance id 0");
    if (bitmap->width() != width || bitmap->height() != height)
      throw std::invalid_argument("encode_mask_image: layer size mismatch");
    for (std::size_t p = 0; p < out.data().size(); ++p)
      if (bitmap->data()[p] != 0) out.data()[p] = iid;
  }
  return out;
}

/// Lazy per-frame reader over the on-disk sequence layout:
///   manifest.txt, depth/%06d.png, mask/%06d.png, pose/%06d.txt,
///   optional rgb/%06d.png and ground-truth mask_gt/%06d.png.
class SequenceReader {
 public:
  explicit SequenceReader(std::filesystem::path root)
      : root_(std::move(root)), manifest_(load_manifest(root_ / "manifest.txt")) {}

  const std::filesystem::path& root() const { return root_; }
  const SequenceManifest& manifest() const { return manifest_; }
  int frame_count() const { return manifest_.frame_count; }

  LabeledRgbdFrame load_frame(int index) const {
    check_index(index);
    try {
      LabeledRgbdFrame frame;
      frame.intrinsics = manifest_.intrinsics;
      frame.depth = decode_depth(read_png_gray16(path_to("depth", index, "png")));
      frame.masks = decode_mask_image(read_png_gray16(path_to("mask", index, "png")),
                                      manifest_);
      frame.pose = load_pose(path_to("pose", index, "txt"));
      const auto rgb_path = path_to("rgb", index, "png");
      if (std::filesystem::exists(rgb_path)) frame.rgb = read_png_rgb8(rgb_path);
      frame.validate();
      return frame;
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(index) + ": " + e.what());
    }
  }

  Image<std::uint16_t> load_mask_image(int index) const {
    check_index(index);
    return read_png_gray16(path_to("mask", index, "png"));
  }

  bool has_gt_masks() const {
    return std::filesystem::is_directory(root_ / "mask_gt");
  }

  Image<std::uint16_t> load_gt_mask_image(int index) const {
    check_index(index);
    return read_png_gray16(path_to("mask_gt", index, "png"));
  }

  DepthMap decode_depth(const Image<std::uint16_t>& raw) const {
    DepthMap depth(raw.width(), raw.height(), 0.0);
    const double scale = manifest_.intrinsics.depth_scale;
    for (std::size_t p = 0; p < raw.data().size(); ++p)
      depth.data()[p] = raw.data()[p] / scale;
    return depth;
  }

  static Pose load_pose(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pose " + path.string());
    Eigen::Matrix4d mat;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (!(in >> mat(r, c)))
          throw std::runtime_error("pose " + path.string() +
                                   ": expected 16 numbers (row-major 4x4)");
    const Eigen::RowVector4d bottom = mat.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
      throw std::runtime_error("pose " + path.string() +
                               ": bottom row is not [0 0 0 1]");
    const Pose pose = Pose::from_matrix(mat);
    if (!pose.is_rigid())
      throw std::runtime_error("pose " + path.string() + ": rotation is not rigid");
    return pose;
  }

 private:
  void check_index(int index) const {
    if (index < 0 || index >= manifest_.frame_count)
      throw std::out_of_range("frame index " + std::to_string(index) +
                              " outside [0, " + std::to_string(manifest_.frame_count) +
                              ")");
  }

  std::filesystem::path path_to(const char* sub, int index, const char* ext) const {
    return root_ / sub / frame_file_name(index, ext);
  }

  std::filesystem::path root_;
  SequenceManifest manifest_;
};

/// Writes one frame's refined masks back as an instance-id image: starting
/// from the original ids, pixels a refined thing mask dropped are cleared.
/// Stuff and unlabeled pixels pass through unchanged.
inline void write_refined_mask_image(const std::filesystem::path& path,
                                     const Image<std::uint16_t>& original,
                                     const std::vector<InstanceMask>& masks) {
  Image<std::uint16_t> out = original;
  for (const InstanceMask& mask : masks) {
    if (mask.label.is_stuff()) continue;
    if (!mask.bitmap.same_size(original))
      throw std::invalid_argument("write_refined_mask_image: mask size mismatch");
    const auto iid = static_cast<std::uint16_t>(mask.label.instance_id);
    for (std::size_t p = 0; p < out.data().size(); ++p)
      if (out.data()[p] == iid && mask.bitmap.data()[p] == 0) out.data()[p] = 0;
  }
  write_png_gray16(path, out);
}

inline void write_pose_file(const std::filesystem::path& path, const Pose& pose) {
  std::ostringstream out;
  out.precision(17);
  const Eigen::Matrix4d mat = pose.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << mat(r, c) << (c == 3 ? "" : " ");
    out << "\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write pose " + path.string());
  file << out.str();
}

inline Image<std::uint16_t> encode_depth(const DepthMap& depth, double depth_scale) {
  Image<std::uint16_t> raw(depth.width(), depth.height(), 0);
  for (std::size_t p = 0; p < raw.data().size(); ++p) {
    const double d = depth.data()[p];
    if (d <= 0.0) continue;
    const double scaled = std::round(d * depth_scale);
    raw.data()[p] = static_cast<std::uint16_t>(std::min(scaled, 65535.0));
  }
  return raw;
}

}  // namespace panfuse
