#include "sslab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sslab {

ScalarFn differentiable(std::function<Tensor(Tape&, const Tensor& theta)> program) {
  return [program = std::move(program)](const Tensor& theta, Tensor* grad) {
    Tape tape(grad != nullptr);
    Tensor p = tape.parameter("theta", theta);
    Tensor loss = program(tape, p);
    const double value = loss.item();
    if (grad != nullptr) *grad = tape.backpropagate(loss).at("theta");
    return value;
  };
}

double finite_difference_check(const ScalarFn& f, const Tensor& theta, double step) {
  if (!(step > 0.0)) throw ContractError("finite_difference_check: step must be positive");
  Tensor analytic;
  f(theta, &analytic);
  if (!(analytic.shape() == theta.shape()))
    throw ShapeError("finite_difference_check: gradient shape " + analytic.shape().str() + " differs from " +
                     theta.shape().str());
  double worst = 0.0;
  Tensor probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double original = theta[i];
    probe[i] = original + step;
    const double up = f(probe, nullptr);
    probe[i] = original - step;
    const double down = f(probe, nullptr);
    probe[i] = original;
    const double central = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - central) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace sslab
