#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "sslab/image.hpp"

namespace sslab {

/// Drops the `levels` finest detail bands of a full multilevel Haar
/// decomposition and reconstructs. Coefficient lengths halve with rounding up
/// at each level, so the reconstruction has 2 * ceil(n / 2^(levels+1)) samples
/// per axis, or ceil(n / 2^levels) when `levels` is the full depth
/// floor(log2 min(h, w)). Input is edge-replicated to that size times
/// 2^levels and reduced to block means (average-normalised filters), so
/// constants are preserved exactly. 2392 x 2048 at 3 levels gives 300 x 256.
Image haar_downsize(const Image& img, int levels);

std::size_t haar_output_extent(std::size_t extent, int levels, int max_levels);

/// Nearest-neighbour upsampling by an integer factor.
Image replicate_upsample(const Image& img, std::size_t factor);

/// Half-pixel-centre (align_corners = false) bilinear resampling.
Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w);

/// Global equalisation with 256 bins per channel: v -> CDF(bin(v)).
Image hist_equalize(const Image& img);

/// Contrast-limited adaptive equalisation. clip_limit is relative to a flat
/// histogram (clip count = clip_limit * tile_pixels / 256); tile LUTs are
/// blended bilinearly between tile centres.
Image clahe(const Image& img, double clip_limit = 2.0, std::size_t tiles_y = 8, std::size_t tiles_x = 8);

struct NormalizationParams {
  std::vector<double> mean;
  std::vector<double> std;

  void validate() const;
  static NormalizationParams imagenet();
  static NormalizationParams identity(std::size_t channels);
};

Image normalize_channels(const Image& img, const NormalizationParams& p);
Image denormalize_channels(const Image& img, const NormalizationParams& p);

enum class Equalization { None, Global, Clahe };

std::string equalization_name(Equalization e);
Equalization parse_equalization(const std::string& name);

/// Deterministic standardisation applied once per image and cached.
///   wavelet_crop:     Haar downsize, equalise. Cropping to `size` happens in
///                     augmentation (random) or at evaluation (centre).
///   wavelet_bilinear: Haar downsize, equalise, bilinear to size x size.
struct PreprocessConfig {
  std::string preset = "wavelet_bilinear";
  int levels = 3;
  std::size_t size = 224;
  Equalization equalize = Equalization::None;
  double clahe_clip = 2.0;
  std::size_t clahe_tiles = 8;

  void validate() const;
};

Image standardize(const Image& raw, const PreprocessConfig& cfg);

/// Deterministic evaluation view of a standardised image: centre crop or
/// identity, so that the result is size x size.
Image eval_view(const Image& standardized, const PreprocessConfig& cfg);

}  // namespace sslab
