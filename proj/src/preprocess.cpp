#include "sslab/preprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace sslab {
namespace {

constexpr std::size_t kBins = 256;

std::size_t bin_of(double v) {
  const double b = std::floor(v * static_cast<double>(kBins));
  if (!(b > 0.0)) return 0;
  return std::min(kBins - 1, static_cast<std::size_t>(b));
}

void require_unit_range(const Image& img, const char* op) {
  for (double v : img.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(op) + ": values must lie in [0,1]");
}

}  // namespace

std::size_t haar_output_extent(std::size_t extent, int levels, int max_levels) {
  const std::size_t f = std::size_t{1} << levels;
  if (levels == max_levels) return (extent + f - 1) / f;
  return 2 * ((extent + 2 * f - 1) / (2 * f));
}

Image haar_downsize(const Image& img, int levels) {
  if (levels < 1) throw std::invalid_argument("haar_downsize: levels must be >= 1");
  if (img.height == 0 || img.width == 0) throw std::invalid_argument("haar_downsize: empty image");
  const int max_levels = static_cast<int>(std::bit_width(std::min(img.height, img.width))) - 1;
  if (levels > max_levels)
    throw std::invalid_argument("haar_downsize: " + std::to_string(levels) + " levels exceed the " +
                                std::to_string(max_levels) + " available for a " + std::to_string(img.height) +
                                "x" + std::to_string(img.width) + " image");
  const std::size_t f = std::size_t{1} << levels;
  const std::size_t ph = haar_output_extent(img.height, levels, max_levels) * f;
  const std::size_t pw = haar_output_extent(img.width, levels, max_levels) * f;

  Image cur(ph, pw, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x)
        cur.at(c, y, x) = img.at(c, std::min(y, img.height - 1), std::min(x, img.width - 1));

  // Each level: rows then columns of s = (a + b) / 2; detail bands dropped.
  for (int l = 0; l < levels; ++l) {
    Image next(cur.height / 2, cur.width / 2, cur.channels);
    for (std::size_t c = 0; c < cur.channels; ++c)
      for (std::size_t y = 0; y < next.height; ++y)
        for (std::size_t x = 0; x < next.width; ++x) {
          const double top = (cur.at(c, 2 * y, 2 * x) + cur.at(c, 2 * y, 2 * x + 1)) / 2.0;
          const double bot = (cur.at(c, 2 * y + 1, 2 * x) + cur.at(c, 2 * y + 1, 2 * x + 1)) / 2.0;
          next.at(c, y, x) = (top + bot) / 2.0;
        }
    cur = std::move(next);
  }
  return cur;
}

Image replicate_upsample(const Image& img, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("replicate_upsample: factor must be >= 1");
  Image out(img.height * factor, img.width * factor, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < out.height; ++y)
      for (std::size_t x = 0; x < out.width; ++x) out.at(c, y, x) = img.at(c, y / factor, x / factor);
  return out;
}

Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("bilinear_resize: output dims must be >= 1");
  if (img.height == 0 || img.width == 0) throw std::invalid_argument("bilinear_resize: empty input");
  struct Tap {
    std::size_t i0, i1;
    double w1;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(img.height, out_h), tx = taps(img.width, out_w);
  Image out(out_h, out_w, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        const auto [y0, y1, wy] = ty[y];
        const auto [x0, x1, wx] = tx[x];
        const double top = img.at(c, y0, x0) + wx * (img.at(c, y0, x1) - img.at(c, y0, x0));
        const double bot = img.at(c, y1, x0) + wx * (img.at(c, y1, x1) - img.at(c, y1, x0));
        out.at(c, y, x) = top + wy * (bot - top);
      }
  return out;
}

Image hist_equalize(const Image& img) {
  require_unit_range(img, "hist_equalize");
  Image out = img;
  const double n = static_cast<double>(img.pixels());
  for (std::size_t c = 0; c < img.channels; ++c) {
    std::array<std::size_t, kBins> hist{};
    for (double v : img.plane(c)) ++hist[bin_of(v)];
    std::array<double, kBins> lut{};
    std::size_t running = 0;
    for (std::size_t b = 0; b < kBins; ++b) {
      running += hist[b];
      lut[b] = static_cast<double>(running) / n;
    }
    auto dst = out.plane(c);
    for (double& v : dst) v = lut[bin_of(v)];
  }
  return out;
}

Image clahe(const Image& img, double clip_limit, std::size_t tiles_y, std::size_t tiles_x) {
  if (!(clip_limit > 0.0)) throw std::invalid_argument("clahe: clip_limit must be > 0");
  if (tiles_y == 0 || tiles_x == 0) throw std::invalid_argument("clahe: tile counts must be >= 1");
  require_unit_range(img, "clahe");
  tiles_y = std::min(tiles_y, img.height);
  tiles_x = std::min(tiles_x, img.width);
  // Tile t spans [t*H/T, (t+1)*H/T): remainders spread over the tiles.
  auto bounds = [](std::size_t extent, std::size_t tiles) {
    std::vector<std::size_t> b(tiles + 1);
    for (std::size_t t = 0; t <= tiles; ++t) b[t] = t * extent / tiles;
    return b;
  };
  const auto by = bounds(img.height, tiles_y), bx = bounds(img.width, tiles_x);
  auto centre = [](const std::vector<std::size_t>& b, std::size_t t) {
    return 0.5 * static_cast<double>(b[t] + b[t + 1]) - 0.5;
  };
  // Neighbouring tiles and blend weight along one axis.
  auto locate = [&](const std::vector<std::size_t>& b, std::size_t tiles, std::size_t p) {
    const double pos = static_cast<double>(p);
    if (pos <= centre(b, 0)) return std::tuple<std::size_t, std::size_t, double>{0, 0, 0.0};
    if (pos >= centre(b, tiles - 1)) return std::tuple<std::size_t, std::size_t, double>{tiles - 1, tiles - 1, 0.0};
    std::size_t t = 0;
    while (centre(b, t + 1) < pos) ++t;
    const double w = (pos - centre(b, t)) / (centre(b, t + 1) - centre(b, t));
    return std::tuple<std::size_t, std::size_t, double>{t, t + 1, w};
  };

  Image out = img;
  std::vector<std::array<double, kBins>> luts(tiles_y * tiles_x);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t ty = 0; ty < tiles_y; ++ty)
      for (std::size_t tx = 0; tx < tiles_x; ++tx) {
        std::array<double, kBins> hist{};
        for (std::size_t y = by[ty]; y < by[ty + 1]; ++y)
          for (std::size_t x = bx[tx]; x < bx[tx + 1]; ++x) hist[bin_of(img.at(c, y, x))] += 1.0;
        const double npx = static_cast<double>((by[ty + 1] - by[ty]) * (bx[tx + 1] - bx[tx]));
        const double limit = std::max(1.0, clip_limit * npx / static_cast<double>(kBins));
        double excess = 0.0;
        for (double& h : hist)
          if (h > limit) {
            excess += h - limit;
            h = limit;
          }
        const double share = excess / static_cast<double>(kBins);
        auto& lut = luts[ty * tiles_x + tx];
        double running = 0.0;
        for (std::size_t b = 0; b < kBins; ++b) {
          running += hist[b] + share;
          lut[b] = std::min(1.0, running / npx);
        }
      }
    for (std::size_t y = 0; y < img.height; ++y) {
      const auto [t0, t1, wy] = locate(by, tiles_y, y);
      for (std::size_t x = 0; x < img.width; ++x) {
        const auto [s0, s1, wx] = locate(bx, tiles_x, x);
        const std::size_t b = bin_of(img.at(c, y, x));
        const double top = luts[t0 * tiles_x + s0][b] * (1 - wx) + luts[t0 * tiles_x + s1][b] * wx;
        const double bot = luts[t1 * tiles_x + s0][b] * (1 - wx) + luts[t1 * tiles_x + s1][b] * wx;
        out.at(c, y, x) = std::clamp(top * (1 - wy) + bot * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

void NormalizationParams::validate() const {
  if (mean.size() != std.size() || mean.empty())
    throw std::invalid_argument("normalization: mean and std must have the same nonzero length");
  for (double s : std)
    if (!(s > 0.0)) throw std::invalid_argument("normalization: std must be positive");
}

NormalizationParams NormalizationParams::imagenet() {
  return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
}

NormalizationParams NormalizationParams::identity(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Image normalize_channels(const Image& img, const NormalizationParams& p) {
  p.validate();
  if (p.mean.size() != img.channels)
    throw std::invalid_argument("normalize_channels: " + std::to_string(p.mean.size()) + " parameters for " +
                                std::to_string(img.channels) + " channels");
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (double& v : out.plane(c)) v = (v - p.mean[c]) / p.std[c];
  return out;
}

Image denormalize_channels(const Image& img, const NormalizationParams& p) {
  p.validate();
  if (p.mean.size() != img.channels)
    throw std::invalid_argument("denormalize_channels: channel count mismatch");
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (double& v : out.plane(c)) v = v * p.std[c] + p.mean[c];
  return out;
}

std::string equalization_name(Equalization e) {
  switch (e) {
    case Equalization::None: return "none";
    case Equalization::Global: return "hist";
    case Equalization::Clahe: return "clahe";
  }
  return "none";
}

Equalization parse_equalization(const std::string& name) {
  if (name == "none") return Equalization::None;
  if (name == "hist") return Equalization::Global;
  if (name == "clahe") return Equalization::Clahe;
  throw std::invalid_argument("unknown equalization '" + name + "' (expected none, hist or clahe)");
}

void PreprocessConfig::validate() const {
  if (preset != "wavelet_crop" && preset != "wavelet_bilinear")
    throw std::invalid_argument("unknown preprocess preset '" + preset + "'");
  if (levels < 0) throw std::invalid_argument("preprocess: levels must be >= 0");
  if (size == 0) throw std::invalid_argument("preprocess: size must be >= 1");
  if (equalize == Equalization::Clahe && !(clahe_clip > 0.0))
    throw std::invalid_argument("preprocess: clahe clip must be > 0");
}

Image standardize(const Image& raw, const PreprocessConfig& cfg) {
  cfg.validate();
  Image img = cfg.levels > 0 ? haar_downsize(raw, cfg.levels) : raw;
  if (cfg.equalize == Equalization::Global) img = hist_equalize(img);
  if (cfg.equalize == Equalization::Clahe) img = clahe(img, cfg.clahe_clip, cfg.clahe_tiles, cfg.clahe_tiles);
  if (cfg.preset == "wavelet_bilinear" && (img.height != cfg.size || img.width != cfg.size))
    img = bilinear_resize(img, cfg.size, cfg.size);
  return img;
}

Image eval_view(const Image& standardized, const PreprocessConfig& cfg) {
  if (standardized.height == cfg.size && standardized.width == cfg.size) return standardized;
  return center_crop(standardized, cfg.size, cfg.size);
}

}  // namespace sslab
