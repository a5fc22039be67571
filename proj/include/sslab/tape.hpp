#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sslab/rng.hpp"
#include "sslab/tensor.hpp"

namespace sslab {

enum class OpKind { Conv2d, Linear, Relu, Sigmoid, Dropout, GlobalAvgPool, Add, Scale, Mul, Sum, Mean };

enum class Mode { Train, Eval };

std::string_view op_name(OpKind kind);

struct OpAttrs {
  std::size_t stride = 1;
  std::size_t pad = 0;
  double dropout_p = 0.0;
  Mode mode = Mode::Eval;
  Rng* rng = nullptr;  ///< required for train-mode dropout with p > 0
  double factor = 1.0; ///< Scale
};

/// Append-only record of differentiable operations. Every op appends one node
/// whose inputs are earlier nodes, so the sequence is already topologically
/// ordered. A disabled tape computes forward values and records nothing.
///
/// One tape per thread; a tape is freed by `backpropagate`.
class Tape {
 public:
  /// Returns gradients with respect to each input (an empty Tensor means
  /// "no gradient for this input").
  using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_output)>;

  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// Registers a named leaf. Its gradient is reported by `backpropagate`.
  Tensor parameter(const std::string& name, Tensor value);

  Tensor apply(OpKind kind, std::span<const Tensor* const> inputs, const OpAttrs& attrs = {});

  Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t pad);
  Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
  Tensor relu(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor dropout(const Tensor& x, double p, Mode mode, Rng* rng);
  Tensor global_avg_pool(const Tensor& x);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& x, double factor);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);

  /// Records an op computed outside the tape (used for loss functions).
  Tensor custom(std::string kind, std::span<const Tensor* const> inputs, Tensor value, BackwardFn backward);

  /// Reverse sweep from a scalar loss. Every registered parameter appears in
  /// the result; unreachable ones get zeros. The tape is cleared afterwards.
  std::map<std::string, Tensor> backpropagate(const Tensor& loss);

 private:
  struct Node {
    std::string kind;
    std::vector<std::optional<NodeId>> inputs;
    Shape shape;
    BackwardFn backward;
    std::string param_name;
  };

  Tensor record(std::string kind, std::span<const Tensor* const> inputs, Tensor value, BackwardFn backward);

  bool enabled_;
  std::vector<Node> nodes_;
};

/// Free-function form of `Tape::apply`; a null tape evaluates without
/// recording.
Tensor forward_op(Tape* tape, OpKind kind, std::span<const Tensor* const> inputs, const OpAttrs& attrs = {});

}  // namespace sslab
