#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sslab/tensor.hpp"

namespace sslab {

struct SgdConfig {
  double lr0 = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  bool nesterov = true;
  /// Exponential decay per epoch.
  double gamma = 0.99;

  void validate() const;
};

/// Learning rate for a zero-based epoch: lr0 * gamma^epoch.
double lr_at(const SgdConfig& cfg, std::size_t epoch);

/// SGD with momentum; weight decay is added to the gradient:
///   g += wd * theta;  v = m * v + g;  step = nesterov ? g + m * v : v;
///   theta -= lr * step
/// Velocity buffers are created lazily, zero-initialised, keyed by name.
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg);

  const SgdConfig& config() const { return cfg_; }

  void step(std::vector<std::pair<std::string, Tensor>>& params, const std::map<std::string, Tensor>& grads,
            std::size_t epoch);

  const std::map<std::string, Tensor>& buffers() const { return velocity_; }

 private:
  SgdConfig cfg_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace sslab
