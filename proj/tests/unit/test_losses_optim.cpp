#include <gtest/gtest.h>

#include <cmath>

#include "sslab/gradcheck.hpp"
#include "sslab/losses.hpp"
#include "sslab/optim.hpp"
#include "sslab/rng.hpp"

using namespace sslab;

namespace {

LossConfig weighted(double wf, double wm) {
  LossConfig c;
  c.w_f = wf;
  c.w_m = wm;
  return c;
}

}  // namespace

TEST(Bce, HalfIsLn2) { EXPECT_NEAR(bce_loss(0.5, 1, LossConfig{}), std::log(2.0), 1e-15); }

TEST(Bce, CertainCorrectIsClampFloor) {
  const LossConfig c;
  EXPECT_NEAR(bce_loss(1.0, 1, c), -std::log(1.0 - c.clamp_eps), 1e-18);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1, c)));
}

TEST(Bce, WeightedNegative) {
  EXPECT_NEAR(bce_loss(0.9, 0, weighted(0.98, 1.02)), 0.98 * -std::log(0.1), 1e-12);
  EXPECT_NEAR(bce_loss(0.9, 0, weighted(0.98, 1.02)), 2.2565, 1e-4);
}

TEST(Bce, RejectsBadLabel) {
  EXPECT_THROW(bce_loss(0.5, 2, LossConfig{}), ContractError);
  LossConfig c;
  c.clamp_eps = 0.5;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(Bce, ConvexMidpoint) {
  Rng rng(4);
  const LossConfig c;
  for (int t = 0; t < 1000; ++t) {
    const double a = rng.uniform(1e-6, 1 - 1e-6), b = rng.uniform(1e-6, 1 - 1e-6);
    const int y = static_cast<int>(rng.below(2));
    EXPECT_LE(bce_loss(0.5 * (a + b), y, c), 0.5 * (bce_loss(a, y, c) + bce_loss(b, y, c)) + 1e-12);
  }
}

TEST(Bce, ConfidentMistakeDominates) {
  const LossConfig c;
  EXPECT_GT(bce_loss(0.01, 1, c), 4.0 * bce_loss(0.5, 1, c));
}

TEST(Balanced, Endpoints) {
  EXPECT_NEAR(balanced_loss(1.0, 1), 0.0, 1e-15);
  EXPECT_NEAR(balanced_loss(0.0, 1), 2.0, 1e-15);
  EXPECT_NEAR(balanced_loss(0.5, 1), 1.0, 1e-15);
  EXPECT_NEAR(balanced_loss(0.5, 0), 1.0, 1e-15);
}

TEST(Balanced, BoundedAndSymmetric) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const double p = rng.uniform();
    for (int y : {0, 1}) {
      EXPECT_GE(balanced_loss(p, y), 0.0);
      EXPECT_LE(balanced_loss(p, y), 2.0);
    }
    EXPECT_NEAR(balanced_loss(p, 1), balanced_loss(1.0 - p, 0), 1e-15);
  }
  EXPECT_EQ(balanced_loss(0.25, 1), balanced_loss(0.75, 0));
}

TEST(BatchLoss, GradientMatchesFiniteDifferences) {
  for (LossKind kind : {LossKind::Bce, LossKind::Balanced}) {
    LossConfig cfg = weighted(0.92, 1.10);
    cfg.kind = kind;
    const std::vector<int> labels{1, 0, 0, 1, 1};
    auto f = differentiable([&](Tape& tape, const Tensor& theta) { return batch_loss(tape, theta, labels, cfg); });
    const Tensor theta(Shape{5, 1}, {0.1, 0.35, 0.8, 0.55, 0.97});
    EXPECT_LT(finite_difference_check(f, theta, 1e-6), 1e-6) << loss_name(kind);
  }
}

TEST(BatchLoss, MeanOverBatch) {
  const std::vector<int> labels{1, 0};
  Tape tape;
  const Tensor p = tape.parameter("p", Tensor(Shape{2, 1}, {0.5, 0.5}));
  EXPECT_NEAR(batch_loss(tape, p, labels, LossConfig{}).item(), std::log(2.0), 1e-15);
}

TEST(BatchLoss, LengthMismatch) {
  const std::vector<int> labels{1};
  Tape tape;
  EXPECT_THROW(batch_loss(tape, Tensor(Shape{2, 1}, 0.5), labels, LossConfig{}), ContractError);
}

TEST(LossKind, Names) {
  EXPECT_EQ(parse_loss_kind("balanced"), LossKind::Balanced);
  EXPECT_THROW(parse_loss_kind("focal"), std::invalid_argument);
}

namespace {

std::vector<std::pair<std::string, Tensor>> one(double v) { return {{"w", Tensor::from({v})}}; }
std::map<std::string, Tensor> grad(double g) { return {{"w", Tensor::from({g})}}; }

}  // namespace

TEST(Sgd, Vanilla) {
  SgdConfig c{.lr0 = 0.1, .momentum = 0.0, .weight_decay = 0.0, .nesterov = false, .gamma = 1.0};
  Sgd opt(c);
  auto p = one(1.0);
  opt.step(p, grad(0.5), 0);
  EXPECT_DOUBLE_EQ(p[0].second[0], 1.0 - 0.1 * 0.5);
  EXPECT_NEAR(p[0].second[0], 0.95, 1e-15);
}

TEST(Sgd, NesterovTwoSteps) {
  SgdConfig c{.lr0 = 0.1, .momentum = 0.9, .weight_decay = 0.0, .nesterov = true, .gamma = 1.0};
  Sgd opt(c);
  auto p = one(0.0);
  opt.step(p, grad(1.0), 0);
  EXPECT_NEAR(p[0].second[0], -0.19, 1e-15);
  EXPECT_NEAR(opt.buffers().at("w")[0], 1.0, 0.0);
  opt.step(p, grad(1.0), 0);
  EXPECT_NEAR(opt.buffers().at("w")[0], 1.9, 1e-15);
  EXPECT_NEAR(p[0].second[0], -0.461, 1e-15);
}

TEST(Sgd, ZeroGradientNoChange) {
  SgdConfig c;
  c.weight_decay = 0.0;
  Sgd opt(c);
  auto p = one(0.7);
  opt.step(p, grad(0.0), 3);
  EXPECT_EQ(p[0].second[0], 0.7);
}

TEST(Sgd, WeightDecayTouchesBiasToo) {
  SgdConfig c{.lr0 = 0.1, .momentum = 0.0, .weight_decay = 0.5, .nesterov = false, .gamma = 1.0};
  Sgd opt(c);
  auto p = one(2.0);
  opt.step(p, grad(0.0), 0);
  EXPECT_DOUBLE_EQ(p[0].second[0], 2.0 - 0.1 * 1.0);
}

TEST(Sgd, ShapeMismatchAndMissing) {
  Sgd opt(SgdConfig{});
  auto p = one(1.0);
  EXPECT_THROW(opt.step(p, {{"w", Tensor(Shape{2}, 0.0)}}, 0), ShapeError);
  EXPECT_THROW(opt.step(p, {}, 0), ContractError);
}

TEST(LrSchedule, ExponentialDecay) {
  const SgdConfig c;
  EXPECT_DOUBLE_EQ(lr_at(c, 0), 1e-3);
  EXPECT_NEAR(lr_at(c, 1), 9.9e-4, 1e-18);
  EXPECT_NEAR(lr_at(c, 100), 3.660e-4, 5e-8);
  EXPECT_NEAR(lr_at(c, 100), 1e-3 * std::pow(0.99, 100), 1e-18);
}
