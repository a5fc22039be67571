#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sslab/ensemble.hpp"
#include "sslab/losses.hpp"
#include "sslab/model.hpp"
#include "sslab/optim.hpp"
#include "sslab/preprocess.hpp"
#include "sslab/stats.hpp"
#include "sslab/train.hpp"

namespace sslab {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat `key = value` experiment description. Keys are grouped by prefix:
/// run., data., preprocess., augment., model., loss., optim., stop.,
/// bootstrap., ensemble., beliefs.
struct ExperimentConfig {
  std::string name = "run";
  std::string out_dir = "runs";
  std::uint64_t seed = 0;

  std::string manifest;  ///< manifest CSV
  std::string root;      ///< image root; empty means the manifest's directory

  PreprocessConfig preprocess;
  std::string normalize = "imagenet";  ///< imagenet or identity
  std::string augment = "appendix";    ///< main_text, appendix or none

  ModelConfig model;
  LossConfig loss;
  SgdConfig optim;
  std::size_t batch_size = 16;
  EarlyStopPolicy stop;

  BootstrapConfig bootstrap;

  std::size_t ell = 10;
  std::size_t L = 20;
  std::size_t n_models = 10;
  std::size_t trials = 20;
  std::vector<std::size_t> sizes;  ///< empty: 1..n_models
  double val_fraction = 0.15 / 0.85;

  std::size_t belief_every = 0;
  std::size_t belief_bins = 20;

  /// Throws ConfigError naming the offending key or field.
  void validate() const;

  /// Every key in a fixed order; parse(serialize()) reproduces the config.
  std::string serialize() const;
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static std::vector<std::string> keys();

  std::filesystem::path manifest_path() const { return manifest; }
  std::filesystem::path image_root() const;
  NormalizationParams normalization() const;
  AugmentPreset augment_preset() const;
  ReshuffleConfig reshuffle() const;
  /// Model initialisation uses a seed derived from `seed`.
  TrainConfig train_config() const;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.serialize() == b.serialize();
  }
};

}  // namespace sslab
