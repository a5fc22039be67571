#include "sslab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sslab/textutil.hpp"

namespace sslab {
namespace {

void check_label(int y) {
  if (y != 0 && y != 1) throw ContractError("loss: label must be 0 or 1, got " + std::to_string(y));
}

// d/dh of the per-sample loss.
double loss_grad(double h, int y, const LossConfig& cfg) {
  if (cfg.kind == LossKind::Balanced) {
    const double d = std::numbers::pi * std::sin(std::numbers::pi * h);
    return y == 1 ? -d : d;
  }
  if (h < cfg.clamp_eps || h > 1.0 - cfg.clamp_eps) return 0.0;
  return y == 1 ? -cfg.w_m / h : cfg.w_f / (1.0 - h);
}

double loss_value(double h, int y, const LossConfig& cfg) {
  return cfg.kind == LossKind::Bce ? bce_loss(h, y, cfg) : balanced_loss(h, y);
}

}  // namespace

std::string loss_name(LossKind kind) { return kind == LossKind::Bce ? "bce" : "balanced"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "bce") return LossKind::Bce;
  if (name == "balanced") return LossKind::Balanced;
  throw std::invalid_argument("unknown loss '" + name + "' (expected bce or balanced)");
}

void LossConfig::validate() const {
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ContractError("loss: clamp_eps must be in (0, 0.5)");
  if (!(w_f > 0.0) || !(w_m > 0.0)) throw ContractError("loss: class weights must be positive");
}

double bce_loss(double h, int y, const LossConfig& cfg) {
  check_label(y);
  const double c = std::clamp(h, cfg.clamp_eps, 1.0 - cfg.clamp_eps);
  return y == 1 ? -cfg.w_m * std::log(c) : -cfg.w_f * std::log(1.0 - c);
}

double balanced_loss(double p, int y) {
  check_label(y);
  const double c = std::cos(std::numbers::pi * p);
  return y == 1 ? 1.0 + c : 1.0 - c;
}

double mean_loss(std::span<const double> probs, std::span<const int> labels, const LossConfig& cfg) {
  if (probs.size() != labels.size() || probs.empty())
    throw ContractError("loss: " + std::to_string(probs.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) total += loss_value(probs[i], labels[i], cfg);
  return total / static_cast<double>(probs.size());
}

Tensor batch_loss(Tape& tape, const Tensor& probs, std::span<const int> labels, const LossConfig& cfg) {
  cfg.validate();
  const auto h = probs.data();
  const double value = mean_loss(h, labels, cfg);
  const std::size_t n = h.size();
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<double> hv(h.begin(), h.end());
  const Shape shape = probs.shape();
  const Tensor* inputs[] = {&probs};
  return tape.custom(
      "loss_" + loss_name(cfg.kind), inputs, Tensor::scalar(value),
      [hv = std::move(hv), y = std::move(y), shape, cfg, n](const Tensor& g) {
        Tensor grad(shape);
        const double up = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) grad[i] = up * loss_grad(hv[i], y[i], cfg);
        return std::vector<Tensor>{std::move(grad)};
      });
}

}  // namespace sslab
