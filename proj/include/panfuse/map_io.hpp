#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "panfuse/color.hpp"
#include "panfuse/voxel_map.hpp"

namespace panfuse {

namespace detail {

template <typename T>
  requires std::is_unsigned_v<T>
inline void put_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(T));
}

inline void put_i32(std::ostream& out, std::int32_t v) {
  put_le(out, static_cast<std::uint32_t>(v));
}
inline void put_f32(std::ostream& out, float v) {
  put_le(out, std::bit_cast<std::uint32_t>(v));
}
inline void put_f64(std::ostream& out, double v) {
  put_le(out, std::bit_cast<std::uint64_t>(v));
}

template <typename T>
  requires std::is_unsigned_v<T>
inline T get_le(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T)))
    throw std::runtime_error("voxel map stream: unexpected end of data");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

inline std::int32_t get_i32(std::istream& in) {
  return static_cast<std::int32_t>(get_le<std::uint32_t>(in));
}
inline float get_f32(std::istream& in) {
  return std::bit_cast<float>(get_le<std::uint32_t>(in));
}
inline double get_f64(std::istream& in) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in));
}

}  // namespace detail

inline constexpr char kVoxelMapMagic[4] = {'P', 'V', 'M', '1'};
inline constexpr std::uint32_t kVoxelMapVersion = 1;

/// Serializes the map: fixed header (magic, version, voxel size, truncation,
/// origin, voxel count) followed by voxel records sorted by coordinate. SDF
/// and weights are stored as 32-bit floats; everything is little-endian.
inline void save_voxel_map(std::ostream& out, const PanopticVoxelMap& map) {
  out.write(kVoxelMapMagic, 4);
  detail::put_le(out, kVoxelMapVersion);
  detail::put_f64(out, map.voxel_size());
  detail::put_f64(out, map.truncation());
  for (int i = 0; i < 3; ++i) detail::put_f64(out, map.origin()[i]);
  detail::put_le(out, static_cast<std::uint64_t>(map.voxel_count()));

  for (const VoxelCoord& c : map.observed_coords_sorted()) {
    const Voxel* v = map.find_voxel(c);
    detail::put_i32(out, c.x);
    detail::put_i32(out, c.y);
    detail::put_i32(out, c.z);
    detail::put_f32(out, static_cast<float>(v->tsdf));
    detail::put_f32(out, static_cast<float>(v->weight));
    if (v->label_votes.size() > 0xFFFF)
      throw std::runtime_error("save_voxel_map: more than 65535 labels per voxel");
    detail::put_le(out, static_cast<std::uint16_t>(v->label_votes.size()));
    for (const auto& [label, weight] : v->label_votes) {
      if (label.class_id < 0 || label.class_id > 0xFFFF)
        throw std::runtime_error("save_voxel_map: class id " +
                                 std::to_string(label.class_id) +
                                 " not representable");
      detail::put_le(out, static_cast<std::uint16_t>(label.class_id));
      detail::put_le(out, label.instance_id);
      detail::put_f32(out, static_cast<float>(weight));
    }
  }
  if (!out) throw std::runtime_error("save_voxel_map: write failed");
}

inline void save_voxel_map(const std::filesystem::path& path,
                           const PanopticVoxelMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write voxel map " + path.string());
  save_voxel_map(out, map);
}

inline PanopticVoxelMap load_voxel_map(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kVoxelMapMagic, 4) != 0)
    throw std::runtime_error("voxel map stream: bad magic");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kVoxelMapVersion)
    throw std::runtime_error("voxel map stream: unsupported version " +
                             std::to_string(version));
  const double voxel_size = detail::get_f64(in);
  const double truncation = detail::get_f64(in);
  Eigen::Vector3d origin;
  for (int i = 0; i < 3; ++i) origin[i] = detail::get_f64(in);
  const auto count = detail::get_le<std::uint64_t>(in);

  PanopticVoxelMap map(voxel_size, truncation, origin);
  bool have_prev = false;
  VoxelCoord prev{};
  for (std::uint64_t i = 0; i < count; ++i) {
    VoxelCoord c{detail::get_i32(in), detail::get_i32(in), detail::get_i32(in)};
    if (have_prev && !(prev < c))
      throw std::runtime_error("voxel map stream: voxels not sorted by coordinate");
    prev = c;
    have_prev = true;

    Voxel v;
    v.tsdf = detail::get_f32(in);
    v.weight = detail::get_f32(in);
    const auto votes = detail::get_le<std::uint16_t>(in);
    v.label_votes.reserve(votes);
    for (std::uint16_t k = 0; k < votes; ++k) {
      PanopticLabel label;
      label.class_id = detail::get_le<std::uint16_t>(in);
      label.instance_id = detail::get_le<std::uint32_t>(in);
      const double weight = detail::get_f32(in);
      v.label_votes.emplace_back(label, weight);
    }
    map.set_voxel(c, std::move(v));
  }
  return map;
}

inline PanopticVoxelMap load_voxel_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open voxel map " + path.string());
  try {
    return load_voxel_map(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

enum class ColorBy { instance, class_id };

inline ColorBy parse_color_by(const std::string& name) {
  if (name == "instance") return ColorBy::instance;
  if (name == "class") return ColorBy::class_id;
  throw std::invalid_argument("unknown color mode '" + name +
                              "' (expected instance or class)");
}

/// Writes near-surface voxel centers as a binary little-endian PLY point
/// cloud. Points are colored from the golden-angle palette by instance or
/// class id; voxels without a winning label are gray.
inline void export_ply(std::ostream& out, const PanopticVoxelMap& map, double band,
                       ColorBy color_by) {
  const std::vector<SurfacePoint> points = extract_surface_points(map, band);
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "property uchar red\n"
      << "property uchar green\n"
      << "property uchar blue\n"
      << "end_header\n";
  for (const SurfacePoint& p : points) {
    for (int i = 0; i < 3; ++i)
      detail::put_f32(out, static_cast<float>(p.position[i]));
    Rgb8 color = kUnlabeledColor;
    if (p.label) {
      const std::uint32_t id = color_by == ColorBy::instance
                                   ? p.label->instance_id
                                   : static_cast<std::uint32_t>(p.label->class_id);
      color = id_color(id);
    }
    const char rgb[3] = {static_cast<char>(color.r), static_cast<char>(color.g),
                         static_cast<char>(color.b)};
    out.write(rgb, 3);
  }
  if (!out) throw std::runtime_error("export_ply: write failed");
}

inline void export_ply(const std::filesystem::path& path, const PanopticVoxelMap& map,
                       double band, ColorBy color_by) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  export_ply(out, map, band, color_by);
}

}  // namespace panfuse
