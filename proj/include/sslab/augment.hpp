#pragma once

#include <cstdint>
#include <string>

#include "sslab/image.hpp"
#include "sslab/preprocess.hpp"
#include "sslab/rng.hpp"

namespace sslab {

/// Train-time augmentation recipe. Steps run in this order, each optional:
/// colour jitter, rotation, crop, horizontal flip, vertical flip,
/// histogram equalisation; normalisation is applied by `augment`.
struct AugmentPreset {
  std::string name = "none";

  bool jitter = false;
  double brightness_lo = 1.0, brightness_hi = 1.0;
  double contrast_lo = 1.0, contrast_hi = 1.0;
  double saturation_lo = 1.0, saturation_hi = 1.0;
  double hue_lo = 0.0, hue_hi = 0.0;

  double rotate_p = 0.0;
  double rotate_deg = 0.0;  ///< angle uniform in [-rotate_deg, rotate_deg]

  /// When set, images are cropped to crop_size at a uniform random offset;
  /// otherwise a larger image is centre-cropped.
  bool random_crop = false;
  std::size_t crop_size = 224;

  double hflip_p = 0.0;
  double vflip_p = 0.0;
  bool equalize = false;

  void validate() const;

  /// Rotate p=0.2 within +-10 degrees, random crop, hflip p=0.3, equalise.
  static AugmentPreset main_text(std::size_t crop = 224);
  /// Jitter (0.95..1.05, hue +-0.05), hflip p=0.5, vflip p=0.5.
  static AugmentPreset appendix(std::size_t crop = 224);
  static AugmentPreset none(std::size_t crop = 224);
  static AugmentPreset from_name(const std::string& name, std::size_t crop = 224);
};

/// Per-sample stream derived from (seed, epoch, index).
Rng augment_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index);

/// All stochastic steps; values stay inside [0,1].
Image augment_pixels(const Image& img, const AugmentPreset& preset, Rng& rng);

/// augment_pixels followed by normalisation.
Image augment(const Image& img, const AugmentPreset& preset, const NormalizationParams& norm, std::uint64_t seed,
              std::uint64_t epoch, std::uint64_t index);

/// The deterministic part of the recipe (centre crop, equalisation,
/// normalisation) used when evaluating.
Image eval_transform(const Image& img, const AugmentPreset& preset, const NormalizationParams& norm);

/// Rotation about the image centre with bilinear sampling and black fill.
Image rotate(const Image& img, double degrees);

/// Colour jitter steps, each clamped to [0,1]. Contrast blends towards the mean
/// luminance, saturation towards per-pixel luminance; hue shifts H in HSV by a
/// fraction of a full turn.
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image adjust_hue(const Image& img, double shift);

}  // namespace sslab
