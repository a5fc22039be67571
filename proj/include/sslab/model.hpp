#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sslab/rng.hpp"
#include "sslab/tape.hpp"
#include "sslab/tensor.hpp"

namespace sslab {

struct ModelConfig {
  std::size_t input_size = 224;
  std::size_t channels = 3;
  std::size_t stem_channels = 16;
  std::size_t stem_stride = 1;
  std::size_t kernel_size = 3;
  std::size_t n_residual_units = 4;
  std::size_t hidden_layer_width = 2048;
  double dropout_p = 0.5;
  std::size_t n_fc_layers = 2;
  std::uint64_t seed = 0;

  /// Throws ContractError naming the first violated invariant.
  void validate() const;

  /// Canonical `key=value` lines in fixed order; the checkpoint embeds this.
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);
  std::uint64_t hash() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One residual unit H(x) = x + W2 relu(W1 x + b1) + b2 with W1, W2 square
/// "same" convolutions.
struct ResidualUnitParams {
  Tensor w1, b1, w2, b2;
};

Tensor residual_forward(Tape& tape, const ResidualUnitParams& unit, const Tensor& x);

class Model {
 public:
  using NamedParam = std::pair<std::string, Tensor>;

  Model() = default;
  Model(ModelConfig config, std::vector<NamedParam> params);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<NamedParam>& params() { return params_; }

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  bool has_param(const std::string& name) const;
  std::size_t parameter_count() const;

  /// Probabilities of class 1 as an [N, 1] tensor. Parameters are registered
  /// on the tape under their names when the tape is enabled.
  Tensor forward(Tape& tape, const Tensor& batch, Mode mode, Rng* rng) const;

  /// FNV-1a over parameter names, extents and bit patterns.
  std::uint64_t parameter_hash() const;

 private:
  ModelConfig config_;
  std::vector<NamedParam> params_;
};

/// Stem conv -> residual units (ReLU between units) -> global average pool
/// -> FC(hidden) -> ReLU -> dropout -> FC(1) -> sigmoid. Conv and linear
/// weights use He fan-in normal initialisation from `config.seed`; biases
/// start at zero.
Model build_model(const ModelConfig& config);

/// N probabilities strictly inside (0,1). `rng` is only consulted for
/// train-mode dropout.
std::vector<double> predict_proba(const Model& model, const Tensor& batch, Mode mode = Mode::Eval,
                                  Rng* rng = nullptr);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMetadata {
  std::uint32_t epoch = 0;
  double val_auc = 0.0;
  friend bool operator==(const CheckpointMetadata&, const CheckpointMetadata&) = default;
};

struct ModelCheckpoint {
  Model model;
  CheckpointMetadata metadata;
};

/// Binary layout, all integers and floats little-endian:
///   "SSLAB1" | u32 version | u32 len + config text | u64 config hash |
///   u32 epoch | f64 val_auc | u32 count | per param: u32 len + name,
///   u32 rank, u64 extents[rank], f64 values[numel]
std::string serialize_checkpoint(const Model& model, const CheckpointMetadata& meta);
ModelCheckpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const Model& model, const CheckpointMetadata& meta, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sslab
