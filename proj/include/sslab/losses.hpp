#pragma once

#include <span>
#include <string>

#include "sslab/tape.hpp"
#include "sslab/tensor.hpp"

namespace sslab {

enum class LossKind { Bce, Balanced };

std::string loss_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::Bce;
  /// Per-class multipliers: w_f for label 0, w_m for label 1.
  double w_f = 1.0;
  double w_m = 1.0;
  double clamp_eps = 1e-7;

  void validate() const;
};

/// Weighted cross-entropy of one prediction, h clamped to [eps, 1-eps].
double bce_loss(double h, int y, const LossConfig& cfg);

/// 1 + cos(pi p) for y = 1, 1 - cos(pi p) for y = 0. Bounded in [0, 2].
double balanced_loss(double p, int y);

/// Mean loss over a batch of probabilities [N,1] (or [N]), recorded on the
/// tape so it can be backpropagated. Labels must be 0 or 1.
Tensor batch_loss(Tape& tape, const Tensor& probs, std::span<const int> labels, const LossConfig& cfg);

/// Same value without a tape; used for reporting.
double mean_loss(std::span<const double> probs, std::span<const int> labels, const LossConfig& cfg);

}  // namespace sslab
