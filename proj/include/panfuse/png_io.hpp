#pragma once

#include <png.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "panfuse/image.hpp"

namespace panfuse {

namespace detail {

struct PngRead {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWrite {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline void open_png_read(PngRead& h, const std::filesystem::path& path,
                          const char* op) {
  h.fp = std::fopen(path.string().c_str(), "rb");
  if (!h.fp)
    throw std::runtime_error(std::string(op) + ": cannot open " + path.string());
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (h.png) h.info = png_create_info_struct(h.png);
  if (!h.png || !h.info)
    throw std::runtime_error(std::string(op) + ": libpng allocation failed");
}

inline void open_png_write(PngWrite& h, const std::filesystem::path& path,
                           const char* op) {
  h.fp = std::fopen(path.string().c_str(), "wb");
  if (!h.fp)
    throw std::runtime_error(std::string(op) + ": cannot open " + path.string());
  h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (h.png) h.info = png_create_info_struct(h.png);
  if (!h.png || !h.info)
    throw std::runtime_error(std::string(op) + ": libpng allocation failed");
}

}  // namespace detail

/// Reads a 16-bit grayscale PNG into native-endian samples.
inline Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path) {
  detail::PngRead h;
  detail::open_png_read(h, path, "read_png_gray16");
  if (setjmp(png_jmpbuf(h.png)))
    throw std::runtime_error("read_png_gray16: failed to decode " + path.string());
  png_init_io(h.png, h.fp);
  png_read_info(h.png, h.info);

  const png_uint_32 w = png_get_image_width(h.png, h.info);
  const png_uint_32 hgt = png_get_image_height(h.png, h.info);
  if (png_get_color_type(h.png, h.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(h.png, h.info) != 16)
    throw std::runtime_error("read_png_gray16: " + path.string() +
                             " is not 16-bit grayscale");
  if constexpr (std::endian::native == std::endian::little) png_set_swap(h.png);

  Image<std::uint16_t> img(static_cast<int>(w), static_cast<int>(hgt));
  std::vector<png_bytep> rows(hgt);
  for (png_uint_32 y = 0; y < hgt; ++y)
    rows[y] = reinterpret_cast<png_bytep>(img.data().data() + std::size_t(y) * w);
  png_read_image(h.png, rows.data());
  png_read_end(h.png, nullptr);
  return img;
}

inline void write_png_gray16(const std::filesystem::path& path,
                             const Image<std::uint16_t>& img) {
  detail::PngWrite h;
  detail::open_png_write(h, path, "write_png_gray16");
  if (setjmp(png_jmpbuf(h.png)))
    throw std::runtime_error("write_png_gray16: failed to encode " + path.string());
  png_init_io(h.png, h.fp);
  png_set_IHDR(h.png, h.info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png, h.info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(h.png);

  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(img.data().data() + std::size_t(y) * img.width()));
  png_write_image(h.png, rows.data());
  png_write_end(h.png, nullptr);
}

/// Reads an 8-bit RGB PNG; an alpha channel, if present, is dropped.
inline RgbImage read_png_rgb8(const std::filesystem::path& path) {
  detail::PngRead h;
  detail::open_png_read(h, path, "read_png_rgb8");
  if (setjmp(png_jmpbuf(h.png)))
    throw std::runtime_error("read_png_rgb8: failed to decode " + path.string());
  png_init_io(h.png, h.fp);
  png_read_info(h.png, h.info);

  const png_uint_32 w = png_get_image_width(h.png, h.info);
  const png_uint_32 hgt = png_get_image_height(h.png, h.info);
  const png_byte color = png_get_color_type(h.png, h.info);
  if ((color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_RGB_ALPHA) ||
      png_get_bit_depth(h.png, h.info) != 8)
    throw std::runtime_error("read_png_rgb8: " + path.string() + " is not 8-bit RGB");
  if (color == PNG_COLOR_TYPE_RGB_ALPHA) png_set_strip_alpha(h.png);

  static_assert(sizeof(Rgb8) == 3);
  RgbImage img(static_cast<int>(w), static_cast<int>(hgt));
  std::vector<png_bytep> rows(hgt);
  for (png_uint_32 y = 0; y < hgt; ++y)
    rows[y] = reinterpret_cast<png_bytep>(img.data().data() + std::size_t(y) * w);
  png_read_image(h.png, rows.data());
  png_read_end(h.png, nullptr);
  return img;
}

inline void write_png_rgb8(const std::filesystem::path& path, const RgbImage& img) {
  detail::PngWrite h;
  detail::open_png_write(h, path, "write_png_rgb8");
  if (setjmp(png_jmpbuf(h.png)))
    throw std::runtime_error("write_png_rgb8: failed to encode " + path.string());
  png_init_io(h.png, h.fp);
  png_set_IHDR(h.png, h.info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png, h.info);

  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(
        const_cast<Rgb8*>(img.data().data() + std::size_t(y) * img.width()));
  png_write_image(h.png, rows.data());
  png_write_end(h.png, nullptr);
}

}  // namespace panfuse
