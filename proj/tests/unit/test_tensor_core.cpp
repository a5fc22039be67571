#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "sslab/gradcheck.hpp"
#include "sslab/kernels.hpp"
#include "sslab/rng.hpp"
#include "sslab/tape.hpp"

using namespace sslab;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = rng.normal() * scale;
  return t;
}

// Weighted sum of an op output; random weights make every output element
// contribute a distinct amount to the scalar.
Tensor project(Tape& tape, const Tensor& y, const Tensor& weights) { return tape.sum(tape.mul(y, weights)); }

}  // namespace

TEST(TensorCore, ReluSigmoidValues) {
  Tape tape(false);
  Tensor r = tape.relu(Tensor::from({-1, 0, 2}));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_EQ(r[2], 2.0);
  EXPECT_EQ(tape.sigmoid(Tensor::from({0})).item(), 0.5);
}

TEST(TensorCore, ConvOnesSlidingWindow) {
  Tensor x(Shape{1, 1, 4, 4}, 1.0);
  Tensor w(Shape{1, 1, 3, 3}, 1.0);
  Tape tape(false);
  Tensor y = tape.conv2d(x, w, Tensor{}, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  // Hand-summed window: each output counts the in-bounds taps.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double rows = (i == 0 || i == 3) ? 2 : 3;
      const double cols = (j == 0 || j == 3) ? 2 : 3;
      EXPECT_EQ(y[i * 4 + j], rows * cols);
    }
  EXPECT_EQ(y[5], 9.0);
  EXPECT_EQ(y[0], 4.0);
  EXPECT_EQ(y[15], 4.0);
}

TEST(TensorCore, ForwardOpDispatch) {
  Tensor x = Tensor::from({-3, 4});
  const Tensor* ins[] = {&x};
  Tensor y = forward_op(nullptr, OpKind::Relu, ins);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 4.0);
  OpAttrs attrs;
  attrs.factor = -2.0;
  Tensor z = forward_op(nullptr, OpKind::Scale, ins, attrs);
  EXPECT_EQ(z[1], -8.0);
  EXPECT_THROW(forward_op(nullptr, OpKind::Add, ins), ContractError);
}

TEST(TensorCore, ShapeMismatchNamesOp) {
  Tape tape(false);
  Tensor x(Shape{1, 3, 4, 4});
  Tensor w(Shape{2, 2, 3, 3});
  try {
    tape.conv2d(x, w, Tensor{}, 1, 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("conv2d"), std::string::npos);
    EXPECT_NE(msg.find("1x3x4x4"), std::string::npos);
  }
  EXPECT_THROW(tape.add(Tensor::from({1, 2}), Tensor::from({1, 2, 3})), ShapeError);
  EXPECT_THROW(tape.linear(Tensor(Shape{2, 3}), Tensor(Shape{4, 5}), Tensor{}), ShapeError);
}

TEST(TensorCore, DropoutProbabilityRange) {
  Tape tape(false);
  Rng rng(1);
  EXPECT_THROW(tape.dropout(Tensor::from({1}), 1.0, Mode::Train, &rng), ContractError);
  EXPECT_THROW(tape.dropout(Tensor::from({1}), -0.1, Mode::Train, &rng), ContractError);
  Tensor x = Tensor::from({1, 2, 3});
  Tensor y = tape.dropout(x, 0.5, Mode::Eval, nullptr);
  EXPECT_EQ(y.storage(), x.storage());
}

TEST(TensorCore, BackpropSquaredNorm) {
  Tape tape;
  Tensor w = tape.parameter("w", Tensor::from({1, 2}));
  Tensor loss = tape.sum(tape.mul(w, w));
  auto grads = tape.backpropagate(loss);
  EXPECT_EQ(grads.at("w")[0], 2.0);
  EXPECT_EQ(grads.at("w")[1], 4.0);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(TensorCore, EvalDropoutGradientMatchesIdentity) {
  Rng rng(3);
  Tensor x = random_tensor(Shape{3, 4}, rng);
  Tensor w0 = random_tensor(Shape{2, 4}, rng);
  auto run = [&](bool with_dropout) {
    Tape tape;
    Tensor w = tape.parameter("w", w0);
    Tensor h = tape.linear(x, w, Tensor{});
    if (with_dropout) h = tape.dropout(h, 0.5, Mode::Eval, nullptr);
    return tape.backpropagate(tape.sum(tape.sigmoid(h))).at("w");
  };
  EXPECT_EQ(run(true).storage(), run(false).storage());
}

TEST(TensorCore, NonScalarLossRejected) {
  Tape tape;
  Tensor w = tape.parameter("w", Tensor::from({1, 2}));
  EXPECT_THROW(tape.backpropagate(tape.mul(w, w)), ContractError);
}

TEST(TensorCore, UnreachableParameterGetsZeroGradient) {
  Tape tape;
  Tensor a = tape.parameter("a", Tensor::from({3}));
  Tensor b = tape.parameter("b", Tensor::from({5, 6}));
  auto grads = tape.backpropagate(tape.sum(tape.mul(a, a)));
  EXPECT_EQ(grads.at("a")[0], 6.0);
  ASSERT_EQ(grads.at("b").size(), 2u);
  EXPECT_EQ(grads.at("b")[0], 0.0);
  EXPECT_EQ(grads.at("b")[1], 0.0);
}

TEST(TensorCore, AddDistributesGradientUnchanged) {
  Rng rng(11);
  Tensor up = random_tensor(Shape{2, 3}, rng);
  Tape tape;
  Tensor a = tape.parameter("a", random_tensor(Shape{2, 3}, rng));
  Tensor b = tape.parameter("b", random_tensor(Shape{2, 3}, rng));
  auto grads = tape.backpropagate(project(tape, tape.add(a, b), up));
  EXPECT_EQ(grads.at("a").storage(), up.storage());
  EXPECT_EQ(grads.at("b").storage(), up.storage());
}

TEST(TensorCore, ForwardIsDeterministicForFixedSeed) {
  Rng init(5);
  Tensor x = random_tensor(Shape{2, 3, 6, 6}, init);
  Tensor w = random_tensor(Shape{4, 3, 3, 3}, init);
  Tensor lw = random_tensor(Shape{5, 4}, init);
  auto run = [&] {
    Tape tape(false);
    Rng rng(99);
    Tensor h = tape.relu(tape.conv2d(x, w, Tensor{}, 2, 1));
    h = tape.global_avg_pool(h);
    h = tape.dropout(h, 0.3, Mode::Train, &rng);
    return tape.sigmoid(tape.linear(h, lw, Tensor{}));
  };
  EXPECT_EQ(run().storage(), run().storage());
}

TEST(GradCheck, QuadraticIsExact) {
  ScalarFn f = [](const Tensor& t, Tensor* g) {
    if (g) *g = Tensor::from({2.0 * t[0]});
    return t[0] * t[0];
  };
  EXPECT_LT(finite_difference_check(f, Tensor::from({3.0}), 1e-6), 1e-8);
}

TEST(GradCheck, ConstantFunction) {
  ScalarFn f = [](const Tensor& t, Tensor* g) {
    if (g) *g = Tensor(t.shape(), 0.0);
    return 42.0;
  };
  EXPECT_EQ(finite_difference_check(f, Tensor::from({1, 2, 3}), 1e-6), 0.0);
}

TEST(GradCheck, SigmoidLinearAgreesAtTwoSteps) {
  Rng rng(21);
  Tensor x = random_tensor(Shape{4, 3}, rng);
  ScalarFn f = differentiable([&](Tape& tape, const Tensor& w) {
    return tape.sum(tape.sigmoid(tape.linear(x, w.reshaped(Shape{2, 3}), Tensor{})));
  });
  Tensor w = random_tensor(Shape{6}, rng);
  const double e1 = finite_difference_check(f, w, 1e-6);
  const double e2 = finite_difference_check(f, w, 1e-5);
  EXPECT_LT(e1, 1e-5);
  EXPECT_LT(e2, 1e-5);
  EXPECT_THROW(finite_difference_check(f, w, 0.0), ContractError);
}

// Property: every registered op matches central differences on random shapes
// with extents up to 8.
class OpGradientProperty : public ::testing::TestWithParam<int> {};

TEST_P(OpGradientProperty, MatchesFiniteDifferences) {
  Rng rng(1000 + static_cast<std::uint64_t>(GetParam()));
  auto extent = [&](std::size_t lo = 1) { return lo + static_cast<std::size_t>(rng.below(8 - lo + 1)); };
  constexpr double kTol = 1e-5;
  constexpr double kStep = 1e-6;

  // conv2d: gradient wrt input, weight and bias.
  {
    const std::size_t n = extent(), c = extent(), h = extent(3), w = extent(3), o = extent();
    const std::size_t k = 1 + 2 * rng.below(2);
    const std::size_t stride = 1 + rng.below(2), pad = rng.below(2);
    Tensor x = random_tensor(Shape{n, c, h, w}, rng);
    Tensor wt = random_tensor(Shape{o, c, k, k}, rng);
    Tensor b = random_tensor(Shape{o}, rng);
    Tape probe(false);
    Tensor y0 = probe.conv2d(x, wt, b, stride, pad);
    Tensor proj = random_tensor(y0.shape(), rng);
    auto wrt = [&](int which) {
      return differentiable([&, which](Tape& tape, const Tensor& theta) {
        const Tensor& xi = which == 0 ? theta : x;
        const Tensor& wi = which == 1 ? theta : wt;
        const Tensor& bi = which == 2 ? theta : b;
        return project(tape, tape.conv2d(xi, wi, bi, stride, pad), proj);
      });
    };
    EXPECT_LT(finite_difference_check(wrt(0), x, kStep), kTol) << "conv2d input";
    EXPECT_LT(finite_difference_check(wrt(1), wt, kStep), kTol) << "conv2d weight";
    EXPECT_LT(finite_difference_check(wrt(2), b, kStep), kTol) << "conv2d bias";
  }
  // linear
  {
    const std::size_t n = extent(), in = extent(), out = extent();
    Tensor x = random_tensor(Shape{n, in}, rng);
    Tensor wt = random_tensor(Shape{out, in}, rng);
    Tensor b = random_tensor(Shape{out}, rng);
    Tensor proj = random_tensor(Shape{n, out}, rng);
    for (int which = 0; which < 3; ++which) {
      ScalarFn f = differentiable([&, which](Tape& tape, const Tensor& theta) {
        return project(tape, tape.linear(which == 0 ? theta : x, which == 1 ? theta : wt, which == 2 ? theta : b),
                       proj);
      });
      const Tensor& at = which == 0 ? x : which == 1 ? wt : b;
      EXPECT_LT(finite_difference_check(f, at, kStep), kTol) << "linear input " << which;
    }
  }
  // unary and pooling ops on a rank-4 tensor
  {
    const Shape s{extent(), extent(), extent(), extent()};
    Tensor x = random_tensor(s, rng);
    Tensor proj = random_tensor(s, rng);
    Tensor pool_proj = random_tensor(Shape{s[0], s[1]}, rng);
    Rng drop_seed(rng.next_u64());
    const std::uint64_t mask_seed = drop_seed.next_u64();
    std::vector<std::pair<const char*, std::function<Tensor(Tape&, const Tensor&)>>> cases = {
        {"relu", [&](Tape& t, const Tensor& v) { return project(t, t.relu(v), proj); }},
        {"sigmoid", [&](Tape& t, const Tensor& v) { return project(t, t.sigmoid(v), proj); }},
        {"scale", [&](Tape& t, const Tensor& v) { return project(t, t.scale(v, -1.7), proj); }},
        {"mul", [&](Tape& t, const Tensor& v) { return t.sum(t.mul(v, v)); }},
        {"add", [&](Tape& t, const Tensor& v) { return project(t, t.add(v, proj), proj); }},
        {"mean", [&](Tape& t, const Tensor& v) { return t.mean(t.mul(v, proj)); }},
        {"gap", [&](Tape& t, const Tensor& v) { return project(t, t.global_avg_pool(v), pool_proj); }},
        {"dropout",
         [&](Tape& t, const Tensor& v) {
           Rng r(mask_seed);  // same mask on every evaluation
           return project(t, t.dropout(v, 0.4, Mode::Train, &r), proj);
         }},
    };
    for (auto& [name, program] : cases)
      EXPECT_LT(finite_difference_check(differentiable(program), x, kStep), kTol) << name;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradientProperty, ::testing::Range(0, 12));

TEST(Kernels, ParallelConvMatchesReference) {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    kernels::ConvGeometry g;
    g.batch = 1 + rng.below(3);
    g.in_channels = 1 + rng.below(4);
    g.in_h = 3 + rng.below(9);
    g.in_w = 3 + rng.below(9);
    g.out_channels = 1 + rng.below(4);
    g.kernel_h = g.kernel_w = 1 + 2 * rng.below(2);
    g.stride = 1 + rng.below(3);
    g.pad = rng.below(3);
    std::vector<double> x(g.input_size()), w(g.weight_size()), b(g.out_channels), go(g.output_size());
    for (double& v : x) v = rng.normal();
    for (double& v : w) v = rng.normal();
    for (double& v : b) v = rng.normal();
    for (double& v : go) v = rng.normal();
    std::vector<double> y1(g.output_size()), y2(g.output_size());
    kernels::conv2d_forward(g, x, w, b, y1);
    kernels::conv2d_forward_reference(g, x, w, b, y2);
    for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_NEAR(y1[i], y2[i], 1e-12 * (1 + std::abs(y2[i])));

    std::vector<double> gx1(x.size()), gw1(w.size()), gb1(b.size());
    std::vector<double> gx2(x.size()), gw2(w.size()), gb2(b.size());
    kernels::conv2d_backward(g, x, w, go, gx1, gw1, gb1);
    kernels::conv2d_backward_reference(g, x, w, go, gx2, gw2, gb2);
    for (std::size_t i = 0; i < gx1.size(); ++i) ASSERT_NEAR(gx1[i], gx2[i], 1e-12 * (1 + std::abs(gx2[i])));
    for (std::size_t i = 0; i < gw1.size(); ++i) ASSERT_NEAR(gw1[i], gw2[i], 1e-11 * (1 + std::abs(gw2[i])));
    for (std::size_t i = 0; i < gb1.size(); ++i) ASSERT_NEAR(gb1[i], gb2[i], 1e-11 * (1 + std::abs(gb2[i])));
  }
}

TEST(Kernels, ParallelLinearMatchesReference) {
  Rng rng(78);
  for (int trial = 0; trial < 20; ++trial) {
    kernels::LinearGeometry g{1 + rng.below(6), 1 + rng.below(20), 1 + rng.below(10)};
    std::vector<double> x(g.batch * g.in_features), w(g.out_features * g.in_features), b(g.out_features),
        go(g.batch * g.out_features);
    for (auto* v : {&x, &w, &b, &go})
      for (double& e : *v) e = rng.normal();
    std::vector<double> y1(go.size()), y2(go.size());
    kernels::linear_forward(g, x, w, b, y1);
    kernels::linear_forward_reference(g, x, w, b, y2);
    for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_NEAR(y1[i], y2[i], 1e-12 * (1 + std::abs(y2[i])));
    std::vector<double> gx1(x.size()), gw1(w.size()), gb1(b.size()), gx2(x.size()), gw2(w.size()), gb2(b.size());
    kernels::linear_backward(g, x, w, go, gx1, gw1, gb1);
    kernels::linear_backward_reference(g, x, w, go, gx2, gw2, gb2);
    for (std::size_t i = 0; i < gx1.size(); ++i) ASSERT_NEAR(gx1[i], gx2[i], 1e-12 * (1 + std::abs(gx2[i])));
    for (std::size_t i = 0; i < gw1.size(); ++i) ASSERT_NEAR(gw1[i], gw2[i], 1e-12 * (1 + std::abs(gw2[i])));
    for (std::size_t i = 0; i < gb1.size(); ++i) ASSERT_NEAR(gb1[i], gb2[i], 1e-12 * (1 + std::abs(gb2[i])));
  }
}
