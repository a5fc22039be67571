#include "sslab/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

namespace sslab {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw std::runtime_error(path.string() + ": not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  Image img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path.string() + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path.string() + ": unsupported PNG layout");
  }
  buffer.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(h, w, 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = rows[y][3 * x + c] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_png: need 1 or 3 channels, got " + std::to_string(img.channels));
  if (img.height == 0 || img.width == 0) throw std::invalid_argument("write_png: empty image");
  std::vector<png_byte> buffer(img.height * img.width * img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        buffer[(y * img.width + x) * img.channels + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * img.width * img.channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (top + h > img.height || left + w > img.width || h == 0 || w == 0)
    throw std::invalid_argument("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                                std::to_string(top) + "," + std::to_string(left) + ") outside " +
                                std::to_string(img.height) + "x" + std::to_string(img.width) + " image");
  Image out(h, w, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(&img.values[(c * img.height + top + y) * img.width + left], w, &out.at(c, y, 0));
  return out;
}

Image center_crop(const Image& img, std::size_t h, std::size_t w) {
  if (h > img.height || w > img.width)
    throw std::invalid_argument("center_crop: " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                " image is smaller than " + std::to_string(h) + "x" + std::to_string(w));
  return crop(img, (img.height - h) / 2, (img.width - w) / 2, h, w);
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      std::copy_n(img.values.begin() + static_cast<std::ptrdiff_t>((c * img.height + img.height - 1 - y) * img.width), img.width, &out.at(c, y, 0));
  return out;
}

Tensor to_batch(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_batch: no images");
  const Image& first = images.front();
  Tensor out(Shape{images.size(), first.channels, first.height, first.width});
  auto dst = out.data();
  std::size_t offset = 0;
  for (const Image& img : images) {
    if (img.height != first.height || img.width != first.width || img.channels != first.channels)
      throw ShapeError("to_batch: image shapes differ");
    std::copy(img.values.begin(), img.values.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += img.values.size();
  }
  return out;
}

}  // namespace sslab
