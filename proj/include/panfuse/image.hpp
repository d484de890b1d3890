#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace panfuse {

/// Dense row-major 2D buffer. Pixel (x, y) with x in [0, width) as the
/// column and y in [0, height) as the row.
template <typename T>
class Image {
 public:
  Image() = default;

  Image(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("Image: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T at_checked(int x, int y) const {
    if (!in_bounds(x, y)) throw std::out_of_range("Image: pixel out of bounds");
    return data_[index(x, y)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_size(const Image<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Per-pixel metric depth in meters; 0.0 encodes missing/invalid.
using DepthMap = Image<double>;

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

using RgbImage = Image<Rgb8>;

/// Throws unless all depth values are finite and non-negative.
inline void validate_depth_map(const DepthMap& depth) {
  if (depth.empty()) throw std::invalid_argument("depth map is empty");
  for (double d : depth.data()) {
    if (!(d >= 0.0) || !std::isfinite(d))
      throw std::invalid_argument("depth map contains negative or non-finite values");
  }
}

}  // namespace panfuse
