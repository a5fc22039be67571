#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sslab/augment.hpp"
#include "sslab/image.hpp"
#include "sslab/losses.hpp"
#include "sslab/model.hpp"
#include "sslab/optim.hpp"
#include "sslab/preprocess.hpp"

namespace sslab {

struct EarlyStopPolicy {
  std::string monitor = "val_auc";  ///< val_auc or val_acc
  std::size_t min_epochs = 3;
  std::size_t patience = 25;
  std::size_t max_epochs = 300;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_acc = 0, train_bce = 0, train_auc = 0;
  double val_acc = 0, val_bce = 0, val_auc = 0;
  double lr = 0;

  double metric(const std::string& name) const;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct BeliefHistogram {
  std::size_t epoch = 0;
  std::vector<std::size_t> class0;
  std::vector<std::size_t> class1;
};

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  SgdConfig optim;
  EarlyStopPolicy stop;
  std::size_t batch_size = 16;
  AugmentPreset augment = AugmentPreset::appendix();
  NormalizationParams norm = NormalizationParams::imagenet();
  std::uint64_t seed = 0;
  std::size_t belief_bins = 20;
  /// Record validation beliefs every k epochs (0: never).
  std::size_t belief_every = 0;

  void validate() const;
};

/// Standardised images with their labels and sample ids.
struct LabeledImages {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return images.size(); }
};

struct TrainResult {
  Model best;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::vector<EpochRecord> records;
  std::vector<BeliefHistogram> beliefs;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochRecord&, bool improved)>;

/// Seeded shuffle, batches (final short batch kept), augmentation, forward,
/// loss, backprop and an SGD step per batch; then eval-mode metrics on both
/// partitions. The model from the epoch with the strictly best monitored
/// metric is kept. Stops once epoch >= min_epochs and the monitor has not
/// improved for `patience` epochs, or at max_epochs.
TrainResult train(const TrainConfig& cfg, const LabeledImages& train_set, const LabeledImages& val_set,
                  const EpochCallback& on_epoch = {});

/// Deterministic evaluation transform applied to every image.
std::vector<Image> eval_views(std::span<const Image> images, const AugmentPreset& preset,
                              const NormalizationParams& norm);

/// Eval-mode probabilities for already transformed inputs.
std::vector<double> predict_views(const Model& model, std::span<const Image> views, std::size_t batch_size = 64);

/// Eval-mode probabilities for standardised images.
std::vector<double> predict_images(const Model& model, std::span<const Image> images, const AugmentPreset& preset,
                                   const NormalizationParams& norm, std::size_t batch_size = 64);

BeliefHistogram record_beliefs(std::span<const double> probs, std::span<const int> labels, std::size_t epoch,
                               std::size_t n_bins);

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochRecord> records);
std::vector<EpochRecord> read_metrics_csv(const std::filesystem::path& path);
void write_beliefs_csv(const std::filesystem::path& path, const BeliefHistogram& h);

/// Beliefs in a family with error rate r and confidence c: a fraction 1-r of
/// samples get probability c on their true class, the rest 1-c.
struct ProbeRow {
  double c = 0;
  double mean_bce = 0;
  double mean_balanced = 0;
};

std::vector<ProbeRow> bce_increase_probe(double r, std::span<const double> confidences, std::size_t n = 1000);

}  // namespace sslab
