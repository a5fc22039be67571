#include "sslab/tape.hpp"

#include <algorithm>
#include <cmath>

#include "sslab/kernels.hpp"

namespace sslab {
namespace {

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank(std::string_view op, const char* what, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    shape_fail(op, std::string(what) + " must have rank " + std::to_string(rank) + ", got " + t.shape().str());
}

void require_same(std::string_view op, const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) shape_fail(op, "operand extents differ: " + a.shape().str() + " vs " + b.shape().str());
}

double stable_sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Linear: return "linear";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Dropout: return "dropout";
    case OpKind::GlobalAvgPool: return "global_avg_pool";
    case OpKind::Add: return "add";
    case OpKind::Scale: return "scale";
    case OpKind::Mul: return "mul";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
  }
  return "unknown";
}

Tensor Tape::record(std::string kind, std::span<const Tensor* const> inputs, Tensor value, BackwardFn backward) {
  value.node.reset();
  if (!enabled_) return value;
  bool any_tracked = false;
  Node node;
  node.kind = std::move(kind);
  for (const Tensor* in : inputs) {
    node.inputs.push_back(in->node);
    any_tracked = any_tracked || in->node.has_value();
  }
  if (!any_tracked) return value;
  node.shape = value.shape();
  node.backward = std::move(backward);
  value.node = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::move(node));
  return value;
}

Tensor Tape::parameter(const std::string& name, Tensor value) {
  value.node.reset();
  if (!enabled_) return value;
  Node node;
  node.kind = "parameter";
  node.shape = value.shape();
  node.param_name = name;
  value.node = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::move(node));
  return value;
}

Tensor Tape::custom(std::string kind, std::span<const Tensor* const> inputs, Tensor value, BackwardFn backward) {
  return record(std::move(kind), inputs, std::move(value), std::move(backward));
}

Tensor Tape::conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t pad) {
  constexpr std::string_view op = "conv2d";
  require_rank(op, "input", x, 4);
  require_rank(op, "weight", weight, 4);
  if (stride == 0) shape_fail(op, "stride must be positive");
  if (weight.dim(1) != x.dim(1))
    shape_fail(op, "weight expects " + std::to_string(weight.dim(1)) + " input channels, input " + x.shape().str() +
                       " has " + std::to_string(x.dim(1)));
  const bool has_bias = bias.rank() != 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))
    shape_fail(op, "bias " + bias.shape().str() + " does not match " + std::to_string(weight.dim(0)) + " output channels");
  if (x.dim(2) + 2 * pad < weight.dim(2) || x.dim(3) + 2 * pad < weight.dim(3))
    shape_fail(op, "kernel " + weight.shape().str() + " larger than padded input " + x.shape().str());

  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.out_channels = weight.dim(0);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = stride;
  g.pad = pad;

  Tensor out(Shape{g.batch, g.out_channels, g.out_h(), g.out_w()});
  kernels::conv2d_forward(g, x.data(), weight.data(), has_bias ? bias.data() : std::span<const double>{}, out.data());

  const Tensor* ins[] = {&x, &weight, &bias};
  const std::size_t n_in = has_bias ? 3 : 2;
  if (!enabled_) return record("conv2d", {ins, n_in}, std::move(out), nullptr);
  const bool need_x = x.node.has_value(), need_w = weight.node.has_value(), need_b = has_bias && bias.node.has_value();
  // Saved activations: the input is needed for the weight gradient, the
  // weight for the input gradient.
  Tensor saved_x = need_w ? x : Tensor{};
  Tensor saved_w = need_x ? weight : Tensor{};
  return record("conv2d", {ins, n_in}, std::move(out),
                [g, saved_x = std::move(saved_x), saved_w = std::move(saved_w), need_x, need_w, need_b,
                 x_shape = x.shape(), w_shape = weight.shape(), n_in](const Tensor& go) {
                  std::vector<Tensor> grads(n_in);
                  if (need_x) grads[0] = Tensor(x_shape);
                  if (need_w) grads[1] = Tensor(w_shape);
                  if (need_b) grads[2] = Tensor(Shape{g.out_channels});
                  kernels::conv2d_backward(g, saved_x.data(), saved_w.data(), go.data(),
                                           need_x ? grads[0].data() : std::span<double>{},
                                           need_w ? grads[1].data() : std::span<double>{},
                                           need_b ? grads[2].data() : std::span<double>{});
                  return grads;
                });
}

Tensor Tape::linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  constexpr std::string_view op = "linear";
  require_rank(op, "input", x, 2);
  require_rank(op, "weight", weight, 2);
  if (weight.dim(1) != x.dim(1))
    shape_fail(op, "weight " + weight.shape().str() + " expects " + std::to_string(weight.dim(1)) +
                       " features, input " + x.shape().str() + " has " + std::to_string(x.dim(1)));
  const bool has_bias = bias.rank() != 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))
    shape_fail(op, "bias " + bias.shape().str() + " does not match " + std::to_string(weight.dim(0)) + " outputs");

  kernels::LinearGeometry g{x.dim(0), x.dim(1), weight.dim(0)};
  Tensor out(Shape{g.batch, g.out_features});
  kernels::linear_forward(g, x.data(), weight.data(), has_bias ? bias.data() : std::span<const double>{}, out.data());

  const Tensor* ins[] = {&x, &weight, &bias};
  const std::size_t n_in = has_bias ? 3 : 2;
  if (!enabled_) return record("linear", {ins, n_in}, std::move(out), nullptr);
  const bool need_x = x.node.has_value(), need_w = weight.node.has_value(), need_b = has_bias && bias.node.has_value();
  Tensor saved_x = need_w ? x : Tensor{};
  Tensor saved_w = need_x ? weight : Tensor{};
  return record("linear", {ins, n_in}, std::move(out),
                [g, saved_x = std::move(saved_x), saved_w = std::move(saved_w), need_x, need_w, need_b,
                 x_shape = x.shape(), w_shape = weight.shape(), n_in](const Tensor& go) {
                  std::vector<Tensor> grads(n_in);
                  if (need_x) grads[0] = Tensor(x_shape);
                  if (need_w) grads[1] = Tensor(w_shape);
                  if (need_b) grads[2] = Tensor(Shape{g.out_features});
                  kernels::linear_backward(g, saved_x.data(), saved_w.data(), go.data(),
                                           need_x ? grads[0].data() : std::span<double>{},
                                           need_w ? grads[1].data() : std::span<double>{},
                                           need_b ? grads[2].data() : std::span<double>{});
                  return grads;
                });
}

Tensor Tape::relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const Tensor* ins[] = {&x};
  if (!enabled_ || !x.node) return record("relu", ins, std::move(out), nullptr);
  Tensor saved = out;
  return record("relu", ins, std::move(out), [saved = std::move(saved)](const Tensor& go) {
    Tensor gx(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] = saved[i] > 0.0 ? go[i] : 0.0;
    return std::vector<Tensor>{std::move(gx)};
  });
}

Tensor Tape::sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = stable_sigmoid(v);
  const Tensor* ins[] = {&x};
  if (!enabled_ || !x.node) return record("sigmoid", ins, std::move(out), nullptr);
  Tensor saved = out;
  return record("sigmoid", ins, std::move(out), [saved = std::move(saved)](const Tensor& go) {
    Tensor gx(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] = go[i] * saved[i] * (1.0 - saved[i]);
    return std::vector<Tensor>{std::move(gx)};
  });
}

Tensor Tape::dropout(const Tensor& x, double p, Mode mode, Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout: probability must be in [0,1), got " + std::to_string(p));
  const Tensor* ins[] = {&x};
  if (mode == Mode::Eval || p == 0.0) {
    Tensor out = x;
    return record("dropout", ins, std::move(out), [](const Tensor& go) { return std::vector<Tensor>{go}; });
  }
  if (rng == nullptr) throw ContractError("dropout: train mode with p > 0 requires a random stream");
  // Inverted dropout: kept activations are scaled by 1/(1-p).
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.shape());
  for (double& m : mask.data()) m = rng->uniform() < p ? 0.0 : keep_scale;
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  if (!enabled_ || !x.node) return record("dropout", ins, std::move(out), nullptr);
  return record("dropout", ins, std::move(out), [mask = std::move(mask)](const Tensor& go) {
    Tensor gx(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] = go[i] * mask[i];
    return std::vector<Tensor>{std::move(gx)};
  });
}

Tensor Tape::global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", "input", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
  Tensor out(Shape{n, c});
  kernels::global_avg_pool_forward(n, c, spatial, x.data(), out.data());
  const Tensor* ins[] = {&x};
  return record("global_avg_pool", ins, std::move(out), [n, c, spatial, shape = x.shape()](const Tensor& go) {
    Tensor gx(shape);
    kernels::global_avg_pool_backward(n, c, spatial, go.data(), gx.data());
    return std::vector<Tensor>{std::move(gx)};
  });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  const Tensor* ins[] = {&a, &b};
  return record("add", ins, std::move(out), [](const Tensor& go) { return std::vector<Tensor>{go, go}; });
}

Tensor Tape::scale(const Tensor& x, double factor) {
  Tensor out = x;
  for (double& v : out.data()) v *= factor;
  const Tensor* ins[] = {&x};
  return record("scale", ins, std::move(out), [factor](const Tensor& go) {
    Tensor gx = go;
    for (double& v : gx.data()) v *= factor;
    return std::vector<Tensor>{std::move(gx)};
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  const Tensor* ins[] = {&a, &b};
  if (!enabled_) return record("mul", ins, std::move(out), nullptr);
  return record("mul", ins, std::move(out), [sa = a, sb = b](const Tensor& go) {
    Tensor ga(go.shape()), gb(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga[i] = go[i] * sb[i];
      gb[i] = go[i] * sa[i];
    }
    return std::vector<Tensor>{std::move(ga), std::move(gb)};
  });
}

Tensor Tape::sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const Tensor* ins[] = {&x};
  return record("sum", ins, Tensor::scalar(acc), [shape = x.shape()](const Tensor& go) {
    return std::vector<Tensor>{Tensor(shape, go.item())};
  });
}

Tensor Tape::mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  const Tensor* ins[] = {&x};
  return record("mean", ins, Tensor::scalar(acc * inv), [shape = x.shape(), inv](const Tensor& go) {
    return std::vector<Tensor>{Tensor(shape, go.item() * inv)};
  });
}

Tensor Tape::apply(OpKind kind, std::span<const Tensor* const> inputs, const OpAttrs& attrs) {
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (inputs.size() < lo || inputs.size() > hi)
      throw ContractError(std::string(op_name(kind)) + ": expected " + std::to_string(lo) +
                          (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " + std::to_string(inputs.size()));
  };
  static const Tensor kNoBias;
  switch (kind) {
    case OpKind::Conv2d:
      arity(2, 3);
      return conv2d(*inputs[0], *inputs[1], inputs.size() == 3 ? *inputs[2] : kNoBias, attrs.stride, attrs.pad);
    case OpKind::Linear:
      arity(2, 3);
      return linear(*inputs[0], *inputs[1], inputs.size() == 3 ? *inputs[2] : kNoBias);
    case OpKind::Relu: arity(1, 1); return relu(*inputs[0]);
    case OpKind::Sigmoid: arity(1, 1); return sigmoid(*inputs[0]);
    case OpKind::Dropout: arity(1, 1); return dropout(*inputs[0], attrs.dropout_p, attrs.mode, attrs.rng);
    case OpKind::GlobalAvgPool: arity(1, 1); return global_avg_pool(*inputs[0]);
    case OpKind::Add: arity(2, 2); return add(*inputs[0], *inputs[1]);
    case OpKind::Scale: arity(1, 1); return scale(*inputs[0], attrs.factor);
    case OpKind::Mul: arity(2, 2); return mul(*inputs[0], *inputs[1]);
    case OpKind::Sum: arity(1, 1); return sum(*inputs[0]);
    case OpKind::Mean: arity(1, 1); return mean(*inputs[0]);
  }
  throw ContractError("unknown op kind");
}

Tensor forward_op(Tape* tape, OpKind kind, std::span<const Tensor* const> inputs, const OpAttrs& attrs) {
  if (tape != nullptr) return tape->apply(kind, inputs, attrs);
  Tape scratch(false);
  return scratch.apply(kind, inputs, attrs);
}

std::map<std::string, Tensor> Tape::backpropagate(const Tensor& loss) {
  if (loss.size() != 1) throw ContractError("backpropagate: loss must be scalar, got shape " + loss.shape().str());
  std::map<std::string, Tensor> result;
  for (const Node& n : nodes_)
    if (!n.param_name.empty()) result.emplace(n.param_name, Tensor(n.shape));
  if (!loss.node || *loss.node >= nodes_.size()) {
    nodes_.clear();
    return result;
  }

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[*loss.node] = Tensor(nodes_[*loss.node].shape, 1.0);
  for (std::size_t i = *loss.node + 1; i-- > 0;) {
    if (!grads[i]) continue;
    Node& node = nodes_[i];
    if (!node.param_name.empty()) {
      Tensor& dst = result[node.param_name];
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += (*grads[i])[k];
      continue;
    }
    if (!node.backward) continue;
    std::vector<Tensor> input_grads = node.backward(*grads[i]);
    for (std::size_t k = 0; k < node.inputs.size() && k < input_grads.size(); ++k) {
      if (!node.inputs[k] || input_grads[k].rank() == 0) continue;
      auto& slot = grads[*node.inputs[k]];
      if (!slot) {
        slot = std::move(input_grads[k]);
      } else {
        for (std::size_t j = 0; j < slot->size(); ++j) (*slot)[j] += input_grads[k][j];
      }
    }
    grads[i].reset();
  }
  nodes_.clear();
  return result;
}

}  // namespace sslab
