#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "sslab/image.hpp"
#include "sslab/preprocess.hpp"
#include "sslab/rng.hpp"

using namespace sslab;

namespace {

Image random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (double& v : img.values) v = rng.uniform();
  return img;
}

double variance(std::span<const double> v) {
  double m = 0.0, s = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(Haar, FundusDimensions) {
  const Image img(2048, 2392, 1, 0.25);
  const Image out = haar_downsize(img, 3);
  EXPECT_EQ(out.height, 256u);
  EXPECT_EQ(out.width, 300u);
}

TEST(Haar, ConstantPreserved) {
  const Image out = haar_downsize(Image(8, 8, 3, 0.3), 3);
  ASSERT_EQ(out.height, 1u);
  ASSERT_EQ(out.width, 1u);
  for (double v : out.values) EXPECT_EQ(v, 0.3);
}

TEST(Haar, OneLevelIsBlockMean) {
  Rng rng(1);
  const Image img = random_image(rng, 4, 4, 1);
  const Image out = haar_downsize(img, 1);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) {
      const double mean = (img.at(0, 2 * y, 2 * x) + img.at(0, 2 * y, 2 * x + 1) + img.at(0, 2 * y + 1, 2 * x) +
                           img.at(0, 2 * y + 1, 2 * x + 1)) /
                          4.0;
      EXPECT_NEAR(out.at(0, y, x), mean, 1e-15);
    }
}

TEST(Haar, ReplicationOfConstantIsLossless) {
  const Image img(16, 16, 1, 0.7);
  EXPECT_EQ(replicate_upsample(haar_downsize(img, 2), 4), img);
}

TEST(Haar, SmoothsVariance) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Image img = random_image(rng, 32 + rng.below(9), 32 + rng.below(9), 1);
    EXPECT_LE(variance(haar_downsize(img, 2).values), variance(img.values) + 1e-9);
  }
}

TEST(Haar, RejectsBadLevels) {
  EXPECT_THROW(haar_downsize(Image(4, 4, 1), 0), std::invalid_argument);
  EXPECT_THROW(haar_downsize(Image(4, 4, 1), 3), std::invalid_argument);
}

TEST(Haar, OutputExtents) {
  EXPECT_EQ(haar_output_extent(2048, 3, 11), 256u);
  EXPECT_EQ(haar_output_extent(2392, 3, 11), 300u);
  EXPECT_EQ(haar_output_extent(8, 3, 3), 1u);
  EXPECT_EQ(haar_output_extent(4, 1, 2), 2u);
  EXPECT_EQ(haar_downsize(Image(130, 150, 1, 0.5), 2).width, 38u);
}

TEST(Bilinear, ConstantStaysConstant) {
  const Image out = bilinear_resize(Image(7, 5, 3, 0.42), 13, 3);
  for (double v : out.values) EXPECT_NEAR(v, 0.42, 1e-15);
}

TEST(Bilinear, MonotoneUpsample) {
  Image img(2, 1, 1);
  img.at(0, 0, 0) = 0.0;
  img.at(0, 1, 0) = 1.0;
  const Image out = bilinear_resize(img, 4, 1);
  for (std::size_t y = 1; y < 4; ++y) EXPECT_GE(out.at(0, y, 0), out.at(0, y - 1, 0));
}

TEST(Bilinear, DownToCentreMean) {
  Image img(2, 2, 1);
  img.values = {0.1, 0.2, 0.3, 0.8};
  EXPECT_NEAR(bilinear_resize(img, 1, 1).values[0], 0.35, 1e-15);
}

TEST(HistEqualize, UniformFixedPoint) {
  Image img(16, 16, 1);
  for (std::size_t i = 0; i < 256; ++i) img.values[i] = (static_cast<double>(i) + 0.5) / 256.0;
  const Image out = hist_equalize(img);
  for (std::size_t i = 0; i < 256; ++i) EXPECT_LE(std::abs(out.values[i] - img.values[i]), 1.0 / 256.0);
}

TEST(HistEqualize, ConstantToSingleLevel) {
  const Image out = hist_equalize(Image(5, 5, 1, 0.3));
  for (double v : out.values) EXPECT_EQ(v, out.values[0]);
}

TEST(HistEqualize, TwoLevels) {
  Image img(4, 4, 1, 0.8);
  for (std::size_t i = 0; i < 4; ++i) img.values[i] = 0.2;
  const Image out = hist_equalize(img);
  EXPECT_NEAR(out.values[0], 0.25, 1e-15);
  EXPECT_NEAR(out.values[10], 1.0, 1e-15);
}

TEST(HistEqualize, NearlyUniformCdf) {
  Rng rng(3);
  Image img(64, 64, 1);
    // Density bounded in [0.9, 1.12] so no bin carries much more than 1/256.
  for (double& v : img.values) {
    const double u = rng.uniform();
    v = u + 0.1 * std::sin(2 * std::numbers::pi * u) / (2 * std::numbers::pi);
  }
  const Image out = hist_equalize(img);
  std::vector<double> sorted = out.values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    ks = std::max({ks, std::abs((static_cast<double>(i) + 1) / n - sorted[i]), std::abs(static_cast<double>(i) / n - sorted[i])});
  EXPECT_LT(ks, 2.0 / 256.0);
}

TEST(HistEqualize, RejectsOutOfRange) { EXPECT_THROW(hist_equalize(Image(2, 2, 1, 1.5)), std::invalid_argument); }

TEST(Clahe, OutputInRangeAndDeterministic) {
  Rng rng(4);
  const Image img = random_image(rng, 37, 45, 3);
  const Image a = clahe(img);
  EXPECT_EQ(a, clahe(img));
  for (double v : a.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Clahe, SingleTileHugeClipIsGlobalEqualization) {
  Rng rng(5);
  const Image img = random_image(rng, 20, 20, 1);
  const Image a = clahe(img, 1e9, 1, 1), b = hist_equalize(img);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

TEST(Clahe, ClipLimitsContrastGain) {
  Image img(32, 32, 1, 0.5);
  for (std::size_t i = 0; i < 32; ++i) img.values[i] = 0.51;
  const Image strong = clahe(img, 100.0, 1, 1), weak = clahe(img, 1.0, 1, 1);
  const double gap_strong = strong.values[0] - strong.values[100];
  const double gap_weak = weak.values[0] - weak.values[100];
  EXPECT_GT(gap_strong, gap_weak);
}

TEST(Clahe, RejectsNonPositiveClip) { EXPECT_THROW(clahe(Image(4, 4, 1, 0.5), 0.0), std::invalid_argument); }

TEST(Normalize, ImagenetRed) {
  Image img(1, 1, 3);
  img.values = {0.485, 0.5, 0.5};
  EXPECT_EQ(normalize_channels(img, NormalizationParams::imagenet()).values[0], 0.0);
  img.values[0] = 0.714;
  EXPECT_NEAR(normalize_channels(img, NormalizationParams::imagenet()).values[0], 1.0, 1e-12);
}

TEST(Normalize, IdentityAndInverse) {
  Rng rng(6);
  const Image img = random_image(rng, 9, 9, 3);
  EXPECT_EQ(normalize_channels(img, NormalizationParams::identity(3)), img);
  const auto p = NormalizationParams::imagenet();
  const Image back = denormalize_channels(normalize_channels(img, p), p);
  for (std::size_t i = 0; i < img.values.size(); ++i) EXPECT_NEAR(back.values[i], img.values[i], 1e-12);
}

TEST(Normalize, ChannelMismatch) {
  EXPECT_THROW(normalize_channels(Image(2, 2, 1), NormalizationParams::imagenet()), std::invalid_argument);
}

TEST(Pipeline, PresetsProduceTargetSize) {
  Rng rng(7);
  const Image raw = random_image(rng, 150, 130, 3);
  PreprocessConfig cfg;
  cfg.levels = 2;
  cfg.size = 32;
  cfg.equalize = Equalization::Global;
  const Image a = standardize(raw, cfg);
  EXPECT_EQ(a.height, 32u);
  EXPECT_EQ(eval_view(a, cfg), a);
  cfg.preset = "wavelet_crop";
  const Image b = standardize(raw, cfg);
  EXPECT_EQ(b.height, 38u);
  EXPECT_EQ(b.width, 34u);
  EXPECT_EQ(eval_view(b, cfg).height, 32u);
  EXPECT_EQ(standardize(raw, cfg), b);
}

TEST(Image, PngRoundTrip) {
  Rng rng(8);
  Image img(5, 7, 3);
  for (double& v : img.values) v = static_cast<double>(rng.below(256)) / 255.0;
  const auto path = std::filesystem::temp_directory_path() / "sslab_rt.png";
  write_png(path, img);
  EXPECT_EQ(read_png(path), img);
  Image gray(4, 3, 1);
  for (double& v : gray.values) v = static_cast<double>(rng.below(256)) / 255.0;
  write_png(path, gray);
  const Image rgb = read_png(path);
  ASSERT_EQ(rgb.channels, 3u);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < gray.pixels(); ++i) EXPECT_EQ(rgb.plane(c)[i], gray.values[i]);
  std::filesystem::remove(path);
}

TEST(Image, CropFlip) {
  Rng rng(9);
  const Image img = random_image(rng, 6, 8, 2);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_EQ(flip_vertical(flip_vertical(img)), img);
  EXPECT_EQ(crop(img, 1, 2, 3, 4).at(1, 0, 0), img.at(1, 1, 2));
  EXPECT_THROW(crop(img, 4, 0, 3, 3), std::invalid_argument);
  const Image tensor_src[] = {img, img};
  EXPECT_EQ(to_batch(tensor_src).shape(), Shape({2, 2, 6, 8}));
}
