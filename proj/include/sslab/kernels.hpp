#pragma once

// Dense numeric kernels. Each hot kernel exists twice: an OpenMP version used
// by the library and a plain serial reference kept for tests and benchmarks.
// The parallel versions assign every output element to exactly one thread and
// accumulate in a fixed order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace sslab::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
  std::size_t input_size() const { return batch * in_channels * in_h * in_w; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
  std::size_t output_size() const { return batch * out_channels * out_h() * out_w(); }
};

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_forward_reference(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output);

/// Overwrites grad_input, grad_weight and grad_bias (any may be empty to skip).
void conv2d_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias);
void conv2d_backward_reference(const ConvGeometry& g, std::span<const double> input,
                               std::span<const double> weight, std::span<const double> grad_output,
                               std::span<double> grad_input, std::span<double> grad_weight,
                               std::span<double> grad_bias);

struct LinearGeometry {
  std::size_t batch = 1;
  std::size_t in_features = 1;
  std::size_t out_features = 1;
};

/// y[n,o] = b[o] + sum_i w[o,i] x[n,i]
void linear_forward(const LinearGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void linear_forward_reference(const LinearGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output);

void linear_backward(const LinearGeometry& g, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias);
void linear_backward_reference(const LinearGeometry& g, std::span<const double> input,
                               std::span<const double> weight, std::span<const double> grad_output,
                               std::span<double> grad_input, std::span<double> grad_weight,
                               std::span<double> grad_bias);

/// NCHW -> NC mean over spatial positions.
void global_avg_pool_forward(std::size_t batch, std::size_t channels, std::size_t spatial,
                             std::span<const double> input, std::span<double> output);
void global_avg_pool_backward(std::size_t batch, std::size_t channels, std::size_t spatial,
                              std::span<const double> grad_output, std::span<double> grad_input);

}  // namespace sslab::kernels
