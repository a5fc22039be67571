#include "sslab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sslab {
namespace {

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("augment: ") + what + " must be in [0,1]");
}

void check_range(double lo, double hi, const char* what) {
  if (!(lo <= hi)) throw std::invalid_argument(std::string("augment: ") + what + " range is empty");
}

double luminance(const Image& img, std::size_t y, std::size_t x) {
  return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

Image clamped(Image img) {
  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace

void AugmentPreset::validate() const {
  check_prob(rotate_p, "rotate_p");
  check_prob(hflip_p, "hflip_p");
  check_prob(vflip_p, "vflip_p");
  if (!(rotate_deg >= 0.0)) throw std::invalid_argument("augment: rotation range must be symmetric (deg >= 0)");
  check_range(brightness_lo, brightness_hi, "brightness");
  check_range(contrast_lo, contrast_hi, "contrast");
  check_range(saturation_lo, saturation_hi, "saturation");
  check_range(hue_lo, hue_hi, "hue");
  if (brightness_lo < 0.0 || contrast_lo < 0.0 || saturation_lo < 0.0)
    throw std::invalid_argument("augment: jitter factors must be >= 0");
  if (hue_lo < -0.5 || hue_hi > 0.5) throw std::invalid_argument("augment: hue shift must lie in [-0.5, 0.5]");
  if (crop_size == 0) throw std::invalid_argument("augment: crop_size must be >= 1");
}

AugmentPreset AugmentPreset::main_text(std::size_t crop) {
  AugmentPreset p;
  p.name = "main_text";
  p.rotate_p = 0.2;
  p.rotate_deg = 10.0;
  p.random_crop = true;
  p.crop_size = crop;
  p.hflip_p = 0.3;
  p.equalize = true;
  return p;
}

AugmentPreset AugmentPreset::appendix(std::size_t crop) {
  AugmentPreset p;
  p.name = "appendix";
  p.jitter = true;
  p.brightness_lo = p.contrast_lo = p.saturation_lo = 0.95;
  p.brightness_hi = p.contrast_hi = p.saturation_hi = 1.05;
  p.hue_lo = -0.05;
  p.hue_hi = 0.05;
  p.crop_size = crop;
  p.hflip_p = 0.5;
  p.vflip_p = 0.5;
  return p;
}

AugmentPreset AugmentPreset::none(std::size_t crop) {
  AugmentPreset p;
  p.crop_size = crop;
  return p;
}

AugmentPreset AugmentPreset::from_name(const std::string& name, std::size_t crop) {
  if (name == "main_text") return main_text(crop);
  if (name == "appendix") return appendix(crop);
  if (name == "none") return none(crop);
  throw std::invalid_argument("unknown augment preset '" + name + "' (expected main_text, appendix or none)");
}

Rng augment_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  return Rng::substream(seed, {0x617567ULL, epoch, index});
}

Image adjust_brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  Image out = img;
  for (double& v : out.values) v *= factor;
  return clamped(std::move(out));
}

Image adjust_contrast(const Image& img, double factor) {
  if (factor == 1.0) return img;
  double mean = 0.0;
  if (img.channels == 3) {
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) mean += luminance(img, y, x);
  } else {
    for (double v : img.values) mean += v;
    mean /= static_cast<double>(img.channels);
  }
  mean /= static_cast<double>(img.pixels());
  Image out = img;
  for (double& v : out.values) v = mean + factor * (v - mean);
  return clamped(std::move(out));
}

Image adjust_saturation(const Image& img, double factor) {
  if (img.channels != 3 || factor == 1.0) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double g = luminance(img, y, x);
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = g + factor * (img.at(c, y, x) - g);
    }
  return clamped(std::move(out));
}

Image adjust_hue(const Image& img, double shift) {
  if (img.channels != 3 || shift == 0.0) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
      const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
      if (d <= 0.0) continue;  // grey pixels have no hue
      double h;
      if (mx == r)
        h = (g - b) / d;
      else if (mx == g)
        h = 2.0 + (b - r) / d;
      else
        h = 4.0 + (r - g) / d;
      h = h / 6.0 + shift;
      h -= std::floor(h);
      const double s = d / mx, v = mx;
      const double hh = h * 6.0;
      const int sector = static_cast<int>(std::floor(hh)) % 6;
      const double f = hh - std::floor(hh);
      const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
      double rgb[3];
      switch (sector) {
        case 0: rgb[0] = v, rgb[1] = t, rgb[2] = p; break;
        case 1: rgb[0] = q, rgb[1] = v, rgb[2] = p; break;
        case 2: rgb[0] = p, rgb[1] = v, rgb[2] = t; break;
        case 3: rgb[0] = p, rgb[1] = q, rgb[2] = v; break;
        case 4: rgb[0] = t, rgb[1] = p, rgb[2] = v; break;
        default: rgb[0] = v, rgb[1] = p, rgb[2] = q; break;
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = rgb[c];
    }
  return clamped(std::move(out));
}

Image rotate(const Image& img, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0, ca = std::cos(a), sa = std::sin(a);
  const double cy = (static_cast<double>(img.height) - 1) / 2.0, cx = (static_cast<double>(img.width) - 1) / 2.0;
  Image out(img.height, img.width, img.channels, 0.0);
  const auto H = static_cast<double>(img.height), W = static_cast<double>(img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      // Inverse map output -> source.
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double sx = ca * dx + sa * dy + cx, sy = -sa * dx + ca * dy + cy;
      if (sx < -0.5 || sy < -0.5 || sx > W - 0.5 || sy > H - 0.5) continue;
      const double fx = std::clamp(sx, 0.0, W - 1), fy = std::clamp(sy, 0.0, H - 1);
      const auto x0 = static_cast<std::size_t>(std::floor(fx)), y0 = static_cast<std::size_t>(std::floor(fy));
      const std::size_t x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      const double wx = fx - static_cast<double>(x0), wy = fy - static_cast<double>(y0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) * (1 - wx) + img.at(c, y0, x1) * wx;
        const double bot = img.at(c, y1, x0) * (1 - wx) + img.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  return out;
}

Image augment_pixels(const Image& img, const AugmentPreset& preset, Rng& rng) {
  preset.validate();
  Image out = img;
  if (preset.jitter) {
    out = adjust_brightness(out, rng.uniform(preset.brightness_lo, preset.brightness_hi));
    out = adjust_contrast(out, rng.uniform(preset.contrast_lo, preset.contrast_hi));
    out = adjust_saturation(out, rng.uniform(preset.saturation_lo, preset.saturation_hi));
    out = adjust_hue(out, rng.uniform(preset.hue_lo, preset.hue_hi));
  }
  if (preset.rotate_p > 0.0) {
    const bool fire = rng.bernoulli(preset.rotate_p);
    const double angle = rng.uniform(-preset.rotate_deg, preset.rotate_deg);
    if (fire && angle != 0.0) out = rotate(out, angle);
  }
  const std::size_t s = preset.crop_size;
  if (out.height < s || out.width < s)
    throw std::invalid_argument("augment: " + std::to_string(out.height) + "x" + std::to_string(out.width) +
                                " image is smaller than the " + std::to_string(s) + "x" + std::to_string(s) + " crop");
  if (preset.random_crop) {
    const auto top = static_cast<std::size_t>(rng.below(out.height - s + 1));
    const auto left = static_cast<std::size_t>(rng.below(out.width - s + 1));
    out = crop(out, top, left, s, s);
  } else if (out.height != s || out.width != s) {
    out = center_crop(out, s, s);
  }
  if (preset.hflip_p > 0.0 && rng.bernoulli(preset.hflip_p)) out = flip_horizontal(out);
  if (preset.vflip_p > 0.0 && rng.bernoulli(preset.vflip_p)) out = flip_vertical(out);
  if (preset.equalize) out = hist_equalize(out);
  return out;
}

Image augment(const Image& img, const AugmentPreset& preset, const NormalizationParams& norm, std::uint64_t seed,
              std::uint64_t epoch, std::uint64_t index) {
  Rng rng = augment_stream(seed, epoch, index);
  return normalize_channels(augment_pixels(img, preset, rng), norm);
}

Image eval_transform(const Image& img, const AugmentPreset& preset, const NormalizationParams& norm) {
  preset.validate();
  const std::size_t s = preset.crop_size;
  if (img.height < s || img.width < s)
    throw std::invalid_argument("eval_transform: image smaller than " + std::to_string(s) + "x" + std::to_string(s));
  Image out = (img.height == s && img.width == s) ? img : center_crop(img, s, s);
  if (preset.equalize) out = hist_equalize(out);
  return normalize_channels(out, norm);
}

}  // namespace sslab
