#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/tensor.hpp"

namespace floorplan {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  GrayImage() = default;
  GrayImage(int h_, int w_, std::uint8_t fill = 0)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_), fill) {
    if (h_ < 0 || w_ < 0) throw ShapeError("negative image extent");
  }
  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  bool operator==(const GrayImage&) const = default;
};

// 8-bit RGB raster, 3 bytes per pixel, row-major.
struct RgbImage {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  RgbImage() = default;
  RgbImage(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_ * 3, 0) {
    if (h_ < 0 || w_ < 0) throw ShapeError("negative image extent");
  }
  std::uint8_t* px(int y, int x) { return v.data() + (static_cast<std::size_t>(y) * w + x) * 3; }
  const std::uint8_t* px(int y, int x) const {
    return v.data() + (static_cast<std::size_t>(y) * w + x) * 3;
  }
  bool operator==(const RgbImage&) const = default;
};

namespace detail {

struct FileCloser {
  std::FILE* f = nullptr;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

// Fixed filter and compression settings keep the emitted bytes stable across
// runs, so regenerated corpora compare bitwise.
inline void write_png_impl(const std::string& path, const std::uint8_t* data, int h,
                           int w, int channels) {
  if (h <= 0 || w <= 0) throw ShapeError("png write: empty image " + path);
  FileCloser file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw DataError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png write: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png write: allocation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png write failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Read any 8/16-bit gray/palette/RGB(A) PNG, normalized to the requested
// channel count (1 = must already be grayscale, 3 = expanded to RGB).
inline std::vector<std::uint8_t> read_png_impl(const std::string& path, int channels,
                                               int& out_h, int& out_w) {
  FileCloser file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw DataError("cannot open '" + path + "' for reading");

  png_byte sig[8] = {};
  if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw DataError("'" + path + "' is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png read: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png read: allocation failed");
  }

  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png read failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (channels == 1 && (color & PNG_COLOR_MASK_COLOR)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path + "' is not grayscale");
  }
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (channels == 3 && !(color & PNG_COLOR_MASK_COLOR) && color != PNG_COLOR_TYPE_PALETTE)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  out_h = static_cast<int>(png_get_image_height(png, info));
  out_w = static_cast<int>(png_get_image_width(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(out_w) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path + "' has an unsupported pixel layout");
  }
  pixels.resize(static_cast<std::size_t>(out_h) * rowbytes);
  rows.resize(static_cast<std::size_t>(out_h));
  for (int y = 0; y < out_h; ++y)
    rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

}  // namespace detail

inline void write_png(const std::string& path, const GrayImage& img) {
  detail::write_png_impl(path, img.v.data(), img.h, img.w, 1);
}

inline void write_png(const std::string& path, const RgbImage& img) {
  detail::write_png_impl(path, img.v.data(), img.h, img.w, 3);
}

inline GrayImage read_png_gray(const std::string& path) {
  GrayImage img;
  img.v = detail::read_png_impl(path, 1, img.h, img.w);
  return img;
}

inline RgbImage read_png_rgb(const std::string& path) {
  RgbImage img;
  img.v = detail::read_png_impl(path, 3, img.h, img.w);
  return img;
}

// Network input: intensities scaled to [0,1] in a (1,1,H,W) tensor.
template <typename S = float>
TensorT<S> to_input_tensor(const GrayImage& img) {
  TensorT<S> t(Shape4{1, 1, img.h, img.w});
  for (std::size_t i = 0; i < img.v.size(); ++i)
    t.data[i] = static_cast<S>(img.v[i]) / S(255);
  return t;
}

}  // namespace floorplan
