#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "sslab/gradcheck.hpp"
#include "sslab/kernels.hpp"
#include "sslab/model.hpp"

using namespace sslab;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 7) {
  ModelConfig c;
  c.input_size = 8;
  c.channels = 3;
  c.stem_channels = 4;
  c.stem_stride = 2;
  c.n_residual_units = 2;
  c.hidden_layer_width = 6;
  c.dropout_p = 0.5;
  c.seed = seed;
  return c;
}

Tensor random_batch(std::size_t n, const ModelConfig& c, Rng& rng) {
  Tensor t(Shape{n, c.channels, c.input_size, c.input_size});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sslab_model_" + name);
}

}  // namespace

TEST(Residual, ZeroBranchIsIdentity) {
  Rng rng(1);
  Tensor x(Shape{2, 3, 5, 5});
  for (double& v : x.data()) v = rng.normal();
  ResidualUnitParams unit{Tensor(Shape{3, 3, 3, 3}), Tensor(Shape{3}), Tensor(Shape{3, 3, 3, 3}), Tensor(Shape{3})};
  Tape tape(false);
  EXPECT_EQ(residual_forward(tape, unit, x).storage(), x.storage());
}

TEST(Residual, ZeroInputReturnsOutputBias) {
  Tensor x(Shape{1, 2, 4, 4});
  ResidualUnitParams unit{Tensor(Shape{2, 2, 3, 3}), Tensor(Shape{2}, 0.3), Tensor(Shape{2, 2, 3, 3}),
                          Tensor::from({1.5, -2.0})};
  Tape tape(false);
  Tensor y = residual_forward(tape, unit, x);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(y[i], 1.5);
    EXPECT_EQ(y[16 + i], -2.0);
  }
}

TEST(Residual, MatchesHandComposedOracle) {
  Rng rng(2);
  auto rnd = [&](Shape s) {
    Tensor t(s);
    for (double& v : t.data()) v = rng.normal();
    return t;
  };
  Tensor x = rnd(Shape{1, 2, 4, 4});
  ResidualUnitParams unit{rnd(Shape{2, 2, 3, 3}), rnd(Shape{2}), rnd(Shape{2, 2, 3, 3}), rnd(Shape{2})};

  // Oracle: serial reference convolutions, explicit ReLU and sum.
  kernels::ConvGeometry g{1, 2, 4, 4, 2, 3, 3, 1, 1};
  std::vector<double> a(16 * 2), f(16 * 2);
  kernels::conv2d_forward_reference(g, x.data(), unit.w1.data(), unit.b1.data(), a);
  for (double& v : a) v = std::max(0.0, v);
  kernels::conv2d_forward_reference(g, a, unit.w2.data(), unit.b2.data(), f);

  Tape tape(false);
  Tensor y = residual_forward(tape, unit, x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], x[i] + f[i], 1e-12);
}

TEST(Residual, ChannelMismatchRejected) {
  ResidualUnitParams unit{Tensor(Shape{4, 2, 3, 3}), Tensor(Shape{4}), Tensor(Shape{3, 4, 3, 3}), Tensor(Shape{3})};
  Tape tape(false);
  EXPECT_THROW(residual_forward(tape, unit, Tensor(Shape{1, 2, 4, 4})), ShapeError);
}

TEST(BuildModel, SameSeedSameParameters) {
  Model a = build_model(tiny_config(3));
  Model b = build_model(tiny_config(3));
  Model c = build_model(tiny_config(4));
  ASSERT_EQ(a.params().size(), b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].second.storage(), b.params()[i].second.storage());
  EXPECT_EQ(a.parameter_hash(), b.parameter_hash());
  EXPECT_NE(a.parameter_hash(), c.parameter_hash());
}

TEST(BuildModel, BiasesStartAtZero) {
  Model m = build_model(tiny_config());
  for (const auto& [name, t] : m.params())
    if (name.find("bias") != std::string::npos || name.ends_with(".b1") || name.ends_with(".b2"))
      for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
}

TEST(BuildModel, StemAndHeadOnly) {
  ModelConfig c = tiny_config();
  c.n_residual_units = 0;
  Model m = build_model(c);
  EXPECT_FALSE(m.has_param("unit0.w1"));
  Rng rng(5);
  for (double p : predict_proba(m, random_batch(4, c, rng))) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(BuildModel, InvalidConfigRejected) {
  ModelConfig c = tiny_config();
  c.n_fc_layers = 3;
  EXPECT_THROW(build_model(c), ContractError);
  c = tiny_config();
  c.dropout_p = 1.0;
  EXPECT_THROW(build_model(c), ContractError);
  c = tiny_config();
  c.hidden_layer_width = 0;
  EXPECT_THROW(build_model(c), ContractError);
}

TEST(PredictProba, ZeroImageZeroHeadIsHalf) {
  ModelConfig c = tiny_config();
  Model m = build_model(c);
  for (double& v : m.param("fc2.weight").data()) v = 0.0;
  Tensor zeros(Shape{3, c.channels, c.input_size, c.input_size});
  for (double p : predict_proba(m, zeros)) EXPECT_EQ(p, 0.5);
}

TEST(PredictProba, EvalModeDeterministicAndDropoutZeroMatchesEval) {
  ModelConfig c = tiny_config();
  Rng rng(8);
  Tensor batch = random_batch(5, c, rng);
  Model m = build_model(c);
  EXPECT_EQ(predict_proba(m, batch), predict_proba(m, batch));

  c.dropout_p = 0.0;
  Model m0 = build_model(c);
  Rng drop(1);
  EXPECT_EQ(predict_proba(m0, batch, Mode::Train, &drop), predict_proba(m0, batch, Mode::Eval));
}

TEST(PredictProba, WrongBatchShape) {
  Model m = build_model(tiny_config());
  EXPECT_THROW(predict_proba(m, Tensor(Shape{1, 3, 9, 9})), ShapeError);
  EXPECT_THROW(predict_proba(m, Tensor(Shape{1, 1, 8, 8})), ShapeError);
}

TEST(PredictProba, OutputStrictlyInsideUnitInterval) {
  ModelConfig c = tiny_config();
  Model m = build_model(c);
  Rng rng(9);
  for (double scale : {1.0, 1e3, 1e8, -1e8}) {
    Tensor batch = random_batch(4, c, rng);
    for (double& v : batch.data()) v *= scale;
    for (double p : predict_proba(m, batch)) {
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
    }
  }
}

TEST(ModelGradients, EveryLayerReceivesGradient) {
  ModelConfig c = tiny_config();
  c.dropout_p = 0.0;
  Model m = build_model(c);
  Rng rng(10);
  Tensor batch = random_batch(6, c, rng);
  Tape tape;
  Tensor probs = m.forward(tape, batch, Mode::Train, nullptr);
  auto grads = tape.backpropagate(tape.sum(probs));
  std::map<std::string, bool> layer_nonzero;
  for (const auto& [name, g] : grads) {
    const std::string layer = name.substr(0, name.find('.'));
    bool nz = false;
    for (double v : g.data()) nz = nz || v != 0.0;
    layer_nonzero[layer] = layer_nonzero[layer] || nz;
  }
  for (const auto& [layer, nz] : layer_nonzero) EXPECT_TRUE(nz) << layer;
  EXPECT_EQ(layer_nonzero.size(), 5u);  // stem, unit0, unit1, fc1, fc2
}

TEST(ModelGradients, MatchFiniteDifferences) {
  ModelConfig c = tiny_config(11);
  c.dropout_p = 0.0;
  Model m = build_model(c);
  Rng rng(12);
  Tensor batch = random_batch(3, c, rng);
  for (const auto& [name, value] : m.params()) {
    ScalarFn f = [&, name = name](const Tensor& theta, Tensor* grad) {
      Model probe = m;
      probe.param(name) = theta;
      Tape tape(grad != nullptr);
      Tensor loss = tape.sum(probe.forward(tape, batch, Mode::Eval, nullptr));
      const double v = loss.item();
      if (grad) *grad = tape.backpropagate(loss).at(name);
      return v;
    };
    EXPECT_LT(finite_difference_check(f, value, 1e-6), 1e-5) << name;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig c = tiny_config(21);
  Model m = build_model(c);
  Rng rng(22);
  for (auto& [n, t] : m.params())
    for (double& v : t.data()) v += 1e-3 * rng.normal();
  CheckpointMetadata meta{17, 0.8125};
  const auto path = temp_path("roundtrip.ckpt");
  save_checkpoint(m, meta, path);
  ModelCheckpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.model.config(), c);
  EXPECT_EQ(loaded.metadata, meta);
  EXPECT_EQ(loaded.model.parameter_hash(), m.parameter_hash());
  EXPECT_EQ(loaded.model.config().hash(), c.hash());
  EXPECT_EQ(serialize_checkpoint(loaded.model, loaded.metadata), serialize_checkpoint(m, meta));

  Tensor batch = random_batch(4, c, rng);
  EXPECT_EQ(predict_proba(loaded.model, batch), predict_proba(m, batch));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptedMagicRejected) {
  std::string bytes = serialize_checkpoint(build_model(tiny_config()), {});
  bytes[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, TruncationRejected) {
  const std::string bytes = serialize_checkpoint(build_model(tiny_config()), {});
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(parse_checkpoint(bytes.substr(0, cut)), FormatError) << cut;
  EXPECT_THROW(parse_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, UnsupportedVersionRejected) {
  std::string bytes = serialize_checkpoint(build_model(tiny_config()), {});
  bytes[6] = 9;
  EXPECT_THROW(parse_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, UnknownParameterNameListed) {
  Model m = build_model(tiny_config());
  m.params()[0].first = "mystery.weight";
  try {
    parse_checkpoint(serialize_checkpoint(m, {}));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("mystery.weight"), std::string::npos);
  }
}

TEST(Checkpoint, ConfigSerializationRoundTrips) {
  ModelConfig c = tiny_config(123456789);
  c.dropout_p = 0.3;
  EXPECT_EQ(ModelConfig::parse(c.serialize()), c);
  EXPECT_THROW(ModelConfig::parse(c.serialize() + "bogus=1\n"), FormatError);
}
