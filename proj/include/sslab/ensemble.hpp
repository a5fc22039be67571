#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sslab/train.hpp"

namespace sslab {

class EnsembleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EnsembleMember {
  std::string id;
  double val_auc = 0.0;
};

/// (ell, L)-ensemble: the mean probability of the ell members with the
/// highest validation AUC among L. Ties go to the smaller id.
struct EnsembleSpec {
  std::size_t ell = 1;
  std::size_t L = 1;
  std::vector<EnsembleMember> members;

  void validate() const;
  /// Indices into `members` ordered best first.
  std::vector<std::size_t> ranking() const;
  /// Indices of the ell selected members, in id order.
  std::vector<std::size_t> selected() const;
};

/// Per-sample arithmetic mean; summation runs in the given order and the
/// result is clamped to the members' range.
std::vector<double> mean_probabilities(std::span<const std::vector<double>> member_probs);

/// `member_probs[i]` holds member i's probabilities for the batch.
std::vector<double> ensemble_predict(const EnsembleSpec& spec, std::span<const std::vector<double>> member_probs);

/// Loads the selected members' checkpoints and averages their predictions.
std::vector<double> ensemble_predict(const EnsembleSpec& spec, std::span<const std::filesystem::path> checkpoints,
                                     std::span<const Image> images, const AugmentPreset& preset,
                                     const NormalizationParams& norm);

/// Splits a development set into train and validation parts by group
/// (patient), sending round(val_fraction * groups) groups to validation.
std::pair<LabeledImages, LabeledImages> reshuffle_split(const LabeledImages& dev, std::span<const std::string> groups,
                                                        double val_fraction, std::uint64_t seed);

struct ReshuffledMember {
  std::string id;
  double val_auc = 0.0;
  double val_acc = 0.0;
  std::size_t best_epoch = 0;
  std::vector<std::size_t> val_indices;  ///< dev-set rows held out for this member
  std::vector<double> val_probs;
  std::vector<double> test_probs;
};

struct ReshuffleConfig {
  std::size_t n_models = 10;
  double val_fraction = 0.15 / 0.85;
  std::vector<std::size_t> sizes;  ///< empty: 1..n_models
  std::size_t trials = 20;
  double ci = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Trains n_models members, each on a fresh reshuffled split of `dev`, and
/// scores them on `test`. Member j uses seed derive_seed(cfg.seed, {j}).
std::vector<ReshuffledMember> train_reshuffled_members(const TrainConfig& base, const LabeledImages& dev,
                                                       std::span<const std::string> dev_groups,
                                                       const LabeledImages& test, const ReshuffleConfig& cfg);

struct SweepTrial {
  std::size_t size = 0;
  std::size_t trial = 0;
  std::vector<std::size_t> members;  ///< member indices, ascending
  double test_auc = 0.0;
  double val_auc = 0.0;  ///< pooled out-of-fold ensemble AUC on dev
  double val_acc = 0.0;
  double min_val_auc = 0.0, max_val_auc = 0.0, mean_val_auc = 0.0;
};

struct SweepPoint {
  std::size_t size = 0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct SweepResult {
  std::vector<SweepTrial> trials;
  std::vector<SweepPoint> points;
};

/// For each size and trial, draws members without replacement and records
/// the ensemble's test AUC. Validation predictors pool each dev row over the
/// drawn members that held it out; rows held out by none are skipped.
SweepResult ensemble_size_sweep(std::span<const ReshuffledMember> members, std::span<const int> test_labels,
                                std::span<const int> dev_labels, const ReshuffleConfig& cfg);

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepTrial> trials);

struct RegressionFit {
  std::vector<std::string> predictors;
  std::vector<double> coefficients;
  double intercept = 0.0;
  double r2 = 0.0;
  double adjusted_r2 = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares with intercept. `xs[k]` is predictor k. A constant
/// response gives zero coefficients and R² = 0.
RegressionFit fit_linear(std::span<const std::vector<double>> xs, std::span<const double> ys,
                         std::vector<std::string> names = {});
RegressionFit fit_linear(std::span<const double> x, std::span<const double> ys);

/// Predictor sets in table order: {AUC_val}, {ACC_val}, {min}, {max}, {mean},
/// {min,max}, {min,max,mean}, {AUC_val,ACC_val,min,max}.
std::vector<std::vector<std::string>> predictor_sets();
std::vector<RegressionFit> predictor_study(std::span<const SweepTrial> trials);
void write_fits_csv(const std::filesystem::path& path, std::span<const RegressionFit> fits);

}  // namespace sslab
