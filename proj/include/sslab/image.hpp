#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "sslab/tensor.hpp"

namespace sslab {

/// Planar (channel, row, column) image of doubles. Decoded images hold values
/// in [0,1]; normalized images hold arbitrary reals.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), values(h * w * c, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return values[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return values[(c * height + y) * width + x]; }
  std::span<double> plane(std::size_t c) { return {values.data() + c * height * width, height * width}; }
  std::span<const double> plane(std::size_t c) const { return {values.data() + c * height * width, height * width}; }
  std::size_t pixels() const { return height * width; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes an 8-bit PNG; gray and gray+alpha are replicated to RGB, alpha is
/// dropped. Values are v / 255.
Image read_png(const std::filesystem::path& path);

/// Encodes 1 channel as gray, 3 as RGB, quantising round(clamp(v,0,1) * 255).
void write_png(const std::filesystem::path& path, const Image& img);

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w);
Image center_crop(const Image& img, std::size_t h, std::size_t w);
Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

/// Stacks equally shaped images into an [N, C, H, W] tensor.
Tensor to_batch(std::span<const Image> images);

}  // namespace sslab
