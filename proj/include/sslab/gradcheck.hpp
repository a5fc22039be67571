#pragma once

#include <functional>

#include "sslab/tape.hpp"
#include "sslab/tensor.hpp"

namespace sslab {

/// Scalar function of a parameter tensor. When `grad` is non-null the
/// function also writes its analytic gradient there.
using ScalarFn = std::function<double(const Tensor& theta, Tensor* grad)>;

/// Builds a ScalarFn whose gradient comes from reverse-mode differentiation
/// of a tape program.
ScalarFn differentiable(std::function<Tensor(Tape&, const Tensor& theta)> program);

/// max_i |analytic_i - central_i| / max(1, |analytic_i|), where central_i is
/// the central difference (f(θ + h e_i) - f(θ - h e_i)) / 2h.
double finite_difference_check(const ScalarFn& f, const Tensor& theta, double step);

}  // namespace sslab
