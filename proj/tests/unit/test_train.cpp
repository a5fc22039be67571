#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "sslab/rng.hpp"
#include "sslab/train.hpp"

using namespace sslab;

namespace {

constexpr std::size_t kSize = 16;

ModelConfig tiny_model(std::uint64_t seed = 1) {
  ModelConfig m;
  m.input_size = kSize;
  m.stem_channels = 4;
  m.stem_stride = 2;
  m.n_residual_units = 1;
  m.hidden_layer_width = 8;
  m.dropout_p = 0.2;
  m.seed = seed;
  return m;
}

TrainConfig tiny_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.model = tiny_model();
  cfg.augment = AugmentPreset::none(kSize);
  cfg.batch_size = 8;
  cfg.stop.max_epochs = epochs;
  cfg.seed = 11;
  return cfg;
}

// Class 1 images are brighter; noise keeps the task from being trivial.
LabeledImages brightness_set(std::size_t n, std::uint64_t seed) {
  LabeledImages s;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    Image img(kSize, kSize, 3);
    for (auto& v : img.values) v = std::clamp(0.35 + 0.3 * y + 0.1 * rng.normal(), 0.0, 1.0);
    s.images.push_back(std::move(img));
    s.labels.push_back(y);
    s.ids.push_back("s" + std::to_string(i));
  }
  return s;
}

}  // namespace

TEST(Train, SingleEpochKeepsThatEpoch) {
  const auto tr = brightness_set(16, 1), va = brightness_set(8, 2);
  const auto r = train(tiny_config(1), tr, va);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].epoch, 1u);
  EXPECT_EQ(r.best_epoch, 1u);
  EXPECT_DOUBLE_EQ(r.best_metric, r.records[0].val_auc);
}

TEST(Train, Deterministic) {
  const auto tr = brightness_set(20, 1), va = brightness_set(10, 2);
  auto cfg = tiny_config(3);
  cfg.augment = AugmentPreset::appendix(kSize);
  const auto a = train(cfg, tr, va), b = train(cfg, tr, va);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.best.parameter_hash(), b.best.parameter_hash());
  cfg.seed = 12;
  const auto c = train(cfg, tr, va);
  EXPECT_NE(a.best.parameter_hash(), c.best.parameter_hash());
}

TEST(Train, LearnsSeparableTask) {
  const auto tr = brightness_set(32, 1), va = brightness_set(16, 2);
  auto cfg = tiny_config(15);
  cfg.optim.lr0 = 0.05;
  const auto r = train(cfg, tr, va);
  EXPECT_GE(r.best_metric, 0.95);
  EXPECT_LT(r.records.back().train_bce, r.records.front().train_bce);
}

TEST(Train, LearningRateFollowsSchedule) {
  const auto tr = brightness_set(8, 1), va = brightness_set(4, 2);
  const auto r = train(tiny_config(3), tr, va);
  for (const auto& rec : r.records) EXPECT_DOUBLE_EQ(rec.lr, 1e-3 * std::pow(0.99, rec.epoch - 1));
}

TEST(Train, PatienceStopsRun) {
  const auto tr = brightness_set(8, 1), va = brightness_set(8, 2);
  auto cfg = tiny_config(40);
  cfg.optim.lr0 = 1e-300;  // updates vanish, so nothing after epoch 1 improves
  cfg.stop.min_epochs = 3;
  cfg.stop.patience = 2;
  std::size_t calls = 0, improvements = 0;
  const auto r = train(cfg, tr, va, [&](const EpochRecord&, bool improved) {
    ++calls;
    improvements += improved;
  });
  EXPECT_EQ(r.records.size(), 3u);
  EXPECT_EQ(calls, 3u);
  EXPECT_EQ(improvements, 1u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(Train, MinEpochsDelaysStop) {
  const auto tr = brightness_set(8, 1), va = brightness_set(8, 2);
  auto cfg = tiny_config(40);
  cfg.optim.lr0 = 1e-300;
  cfg.stop.min_epochs = 6;
  cfg.stop.patience = 1;
  EXPECT_EQ(train(cfg, tr, va).records.size(), 6u);
}

TEST(Train, EvalModeDoesNotMutateModel) {
  const Model m = build_model(tiny_model());
  const auto h = m.parameter_hash();
  const auto imgs = brightness_set(6, 3);
  const auto p1 = predict_images(m, imgs.images, AugmentPreset::none(kSize), NormalizationParams::imagenet());
  const auto p2 = predict_images(m, imgs.images, AugmentPreset::none(kSize), NormalizationParams::imagenet());
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(m.parameter_hash(), h);
}

TEST(Train, BatchSizeDoesNotChangePredictions) {
  const Model m = build_model(tiny_model());
  const auto imgs = brightness_set(7, 3);
  const auto views = eval_views(imgs.images, AugmentPreset::none(kSize), NormalizationParams::imagenet());
  const auto a = predict_views(m, views, 1), b = predict_views(m, views, 64);
  ASSERT_EQ(a.size(), 7u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Train, RejectsMismatchedCrop) {
  auto cfg = tiny_config(1);
  cfg.augment = AugmentPreset::none(32);
  const auto s = brightness_set(4, 1);
  EXPECT_THROW(train(cfg, s, s), std::invalid_argument);
}

TEST(Train, RejectsEmptyPartition) {
  const auto s = brightness_set(4, 1);
  EXPECT_THROW(train(tiny_config(1), s, LabeledImages{}), TrainingError);
}

TEST(Train, RejectsBadMonitor) {
  auto cfg = tiny_config(1);
  cfg.stop.monitor = "val_bce";
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Beliefs, ZeroHeadPutsMassAtHalf) {
  Model m = build_model(tiny_model());
  for (auto& [name, t] : m.params())
    if (name.rfind("fc2", 0) == 0) t = Tensor(t.shape());
  const auto imgs = brightness_set(10, 4);
  const auto p = predict_images(m, imgs.images, AugmentPreset::none(kSize), NormalizationParams::imagenet());
  const auto h = record_beliefs(p, imgs.labels, 1, 20);
  EXPECT_EQ(h.class0[10], 5u);
  EXPECT_EQ(h.class1[10], 5u);
}

TEST(Beliefs, BinSumsMatchClassCounts) {
  const std::vector<double> p{0.0, 0.05, 0.5, 0.99, 1.0, 0.3};
  const std::vector<int> y{0, 1, 1, 0, 1, 1};
  const auto h = record_beliefs(p, y, 4, 10);
  EXPECT_EQ(h.epoch, 4u);
  EXPECT_EQ(std::accumulate(h.class0.begin(), h.class0.end(), std::size_t{0}), 2u);
  EXPECT_EQ(std::accumulate(h.class1.begin(), h.class1.end(), std::size_t{0}), 4u);
  EXPECT_EQ(h.class0[0], 1u);
  EXPECT_EQ(h.class1[9], 1u);
  EXPECT_EQ(h.class0[9], 1u);
}

TEST(Beliefs, RecordedOnSchedule) {
  const auto tr = brightness_set(8, 1), va = brightness_set(6, 2);
  auto cfg = tiny_config(4);
  cfg.belief_every = 2;
  const auto r = train(cfg, tr, va);
  ASSERT_EQ(r.beliefs.size(), 2u);
  EXPECT_EQ(r.beliefs[0].epoch, 2u);
  EXPECT_EQ(r.beliefs[1].epoch, 4u);
}

TEST(MetricsCsv, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "sslab_metrics_rt.csv";
  const std::vector<EpochRecord> recs{{1, 0.5, 0.69314718055994529, 0.51, 0.5, 0.7, 0.49, 1e-3},
                                      {2, 0.625, 0.6, 0.7, 0.55, 0.68, 0.6, 9.9e-4}};
  write_metrics_csv(path, recs);
  EXPECT_EQ(read_metrics_csv(path), recs);
  std::filesystem::remove(path);
}

TEST(Probe, ClosedFormValues) {
  const std::vector<double> cs{0.6, 0.99, 0.999, 1.0 - 1e-9};
  const auto rows = bce_increase_probe(0.1, cs);
  EXPECT_NEAR(rows[0].mean_bce, 0.9 * -std::log(0.6) + 0.1 * -std::log(0.4), 1e-12);
  EXPECT_NEAR(rows[0].mean_bce, 0.5514, 5e-5);
  EXPECT_NEAR(rows[1].mean_bce, 0.4696, 5e-5);
  EXPECT_GT(rows[2].mean_bce, rows[1].mean_bce);
  EXPECT_NEAR(rows[3].mean_balanced, 0.2, 1e-9);
  for (const auto& r : rows) EXPECT_LE(r.mean_balanced, 2.0);
}

TEST(Probe, NoErrorsMeansMonotoneDecrease) {
  std::vector<double> cs;
  for (int k = 0; k < 40; ++k) cs.push_back(0.55 + 0.011 * k);
  const auto rows = bce_increase_probe(0.0, cs);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].mean_bce, rows[i - 1].mean_bce);
    EXPECT_LT(rows[i].mean_balanced, rows[i - 1].mean_balanced);
  }
}

TEST(Probe, RejectsBadRate) {
  const std::vector<double> cs{0.7};
  EXPECT_THROW(bce_increase_probe(1.5, cs), std::invalid_argument);
}
