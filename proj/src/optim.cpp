#include "sslab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sslab {

void SgdConfig::validate() const {
  if (!(lr0 > 0.0)) throw ContractError("sgd: lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("sgd: momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ContractError("sgd: weight_decay must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("sgd: gamma must be in (0,1]");
}

double lr_at(const SgdConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.gamma, static_cast<double>(epoch));
}

Sgd::Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Sgd::step(std::vector<std::pair<std::string, Tensor>>& params, const std::map<std::string, Tensor>& grads,
               std::size_t epoch) {
  const double lr = lr_at(cfg_, epoch);
  const double m = cfg_.momentum, wd = cfg_.weight_decay;
  for (auto& [name, theta] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("sgd: no gradient for parameter '" + name + "'");
    const Tensor& grad = it->second;
    if (!(grad.shape() == theta.shape()))
      throw ShapeError("sgd: gradient for '" + name + "' has shape " + grad.shape().str() + ", parameter has " +
                       theta.shape().str());
    auto [vit, inserted] = velocity_.try_emplace(name, theta.shape());
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + wd * theta[i];
      v[i] = m * v[i] + g;
      const double eff = cfg_.nesterov ? g + m * v[i] : v[i];
      theta[i] -= lr * eff;
    }
  }
}

}  // namespace sslab
