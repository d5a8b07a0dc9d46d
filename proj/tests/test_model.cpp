#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lrdet/errors.hpp"
#include "lrdet/model.hpp"
#include "lrdet/ops.hpp"
#include "support/oracles.hpp"

using namespace lrdet;
namespace o = lrdet::oracle;

namespace {

Tensor random_images(std::size_t n, Rng& rng) { return o::random_tensor({n, 1, 28, 28}, rng, 0.0f, 1.0f); }

std::vector<std::size_t> all_layers(const Classifier& m) {
  std::vector<std::size_t> v(m.num_layers());
  std::iota(v.begin(), v.end(), 1);
  return v;
}

}  // namespace

TEST(Architecture, LayerCounts) {
  const Classifier cnn(ModelConfig::small_cnn(), 1);
  ASSERT_EQ(cnn.num_layers(), 6u);
  EXPECT_EQ(cnn.layer_size(1), 8u * 28 * 28);
  EXPECT_EQ(cnn.layer_size(2), 8u * 14 * 14);
  EXPECT_EQ(cnn.layer_size(3), 16u * 14 * 14);
  EXPECT_EQ(cnn.layer_size(4), 16u * 7 * 7);
  EXPECT_EQ(cnn.layer_size(5), 64u);
  EXPECT_EQ(cnn.layer_size(6), 10u);
  EXPECT_EQ(cnn.feature_layer(), 5u);

  const Classifier mlp(ModelConfig::mlp(), 1);
  EXPECT_EQ(mlp.num_layers(), 5u);
  EXPECT_EQ(mlp.layer_size(mlp.feature_layer()), 64u);
}

TEST(Architecture, ParseNames) {
  EXPECT_EQ(parse_architecture("mlp"), Architecture::mlp);
  EXPECT_EQ(parse_architecture("small_cnn"), Architecture::small_cnn);
  EXPECT_THROW(parse_architecture("resnet"), PreconditionError);
}

TEST(ForwardTaps, EmptyTapsLeaveLogitsUnchanged) {
  Rng rng(3);
  const Classifier m(ModelConfig::small_cnn(), 11);
  const Tensor x = random_images(4, rng);
  const auto [logits, trace] = m.forward_with_taps(x, {});
  EXPECT_TRUE(trace.empty());
  EXPECT_EQ(logits, m.logits(x));
}

TEST(ForwardTaps, AllTapsEndWithSoftmax) {
  Rng rng(4);
  for (auto cfg : {ModelConfig::small_cnn(), ModelConfig::mlp()}) {
    const Classifier m(cfg, 12);
    const Tensor x = random_images(3, rng);
    const auto taps = all_layers(m);
    const auto [logits, trace] = m.forward_with_taps(x, taps);
    ASSERT_EQ(trace.size(), m.num_layers());
    EXPECT_EQ(logits, m.logits(x));  // tapping never alters logits
    const Tensor probs = ops::softmax(Var(logits)).value();
    EXPECT_EQ(trace.at(m.num_layers()), probs);
    for (std::size_t l = 1; l <= m.num_layers(); ++l) EXPECT_EQ(trace.at(l).size(), 3 * m.layer_size(l));
  }
}

TEST(ForwardTaps, DeterministicTraces) {
  Rng rng(5);
  const Classifier m(ModelConfig::small_cnn(), 13);
  const Tensor x = random_images(2, rng);
  const auto taps = all_layers(m);
  EXPECT_EQ(m.forward_with_taps(x, taps).second, m.forward_with_taps(x, taps).second);
}

TEST(ForwardTaps, UnknownTapThrows) {
  Rng rng(6);
  const Classifier m(ModelConfig::small_cnn(), 14);
  const std::vector<std::size_t> bad{0};
  const std::vector<std::size_t> past{7};
  EXPECT_THROW(m.forward_with_taps(random_images(1, rng), bad), PreconditionError);
  EXPECT_THROW(m.forward_with_taps(random_images(1, rng), past), PreconditionError);
}

TEST(ForwardTaps, SoftmaxIsDistributionAndFeatureDimConstant) {
  Rng rng(7);
  const Classifier m(ModelConfig::mlp(), 15);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_images(5, rng);
    const std::vector<std::size_t> taps{m.feature_layer(), m.num_layers()};
    const auto [logits, trace] = m.forward_with_taps(x, taps);
    EXPECT_EQ(trace.at(m.feature_layer()).size(), 5 * m.layer_size(m.feature_layer()));
    const Tensor& p = trace.at(m.num_layers());
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 10; ++k) {
        const float v = p[r * 10 + k];
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
  }
}

TEST(CrossEntropy, HandValues) {
  EXPECT_NEAR(cross_entropy(Var(Tensor(Shape{1, 10}, 0.0f)), std::vector<std::uint32_t>{3}).value()[0], std::log(10.0),
              1e-5);
  Tensor hot(Shape{1, 10}, 0.0f);
  hot[7] = 1000.0f;
  EXPECT_NEAR(cross_entropy(Var(hot), std::vector<std::uint32_t>{7}).value()[0], 0.0, 1e-6);
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(cross_entropy(Var(Tensor(Shape{1, 2}, {1.0f, 0.0f})), std::vector<std::uint32_t>{0}).value()[0], expect,
              1e-6);
  EXPECT_NEAR(expect, 0.3133, 1e-4);
}

TEST(CrossEntropy, LabelOutOfRange) {
  EXPECT_THROW(cross_entropy(Var(Tensor(Shape{1, 10})), std::vector<std::uint32_t>{10}), PreconditionError);
}

namespace {

Dataset one_sample(Rng& rng) {
  Dataset d;
  d.sample_shape = {1, 28, 28};
  d.pixels.resize(784);
  for (float& p : d.pixels) p = rng.uniform();
  d.labels = {4};
  return d;
}

}  // namespace

TEST(Training, OverfitsSingleSample) {
  Rng rng(8);
  const Dataset d = one_sample(rng);
  for (auto cfg : {ModelConfig::small_cnn(), ModelConfig::mlp()}) {
    Classifier m(cfg, 21);
    TrainHyper h;
    h.epochs = 200;
    h.batch_size = 1;
    h.seed = 5;
    const TrainLog log = train_classifier(m, d, h);
    EXPECT_LT(log.final_step_loss, 1e-2) << to_string(cfg.architecture);
  }
}

TEST(Training, SameSeedSameWeights) {
  const Dataset data = load_idx_dir(LRDET_DATA_DIR, Split::train).head(256);
  auto run = [&] {
    Classifier m(ModelConfig::small_cnn(), 31);
    TrainHyper h;
    h.epochs = 1;
    h.seed = 9;
    train_classifier(m, data, h);
    return encode_checkpoint(m.to_checkpoint());
  };
  EXPECT_EQ(run(), run());
}

TEST(Training, DivergenceIsReported) {
  Rng rng(10);
  const Dataset d = one_sample(rng);
  Classifier m(ModelConfig::mlp(), 22);
  TrainHyper h;
  h.epochs = 50;
  h.batch_size = 1;
  h.learning_rate = 1e30f;
  EXPECT_THROW(train_classifier(m, d, h), DivergenceError);
}

TEST(Training, CheckpointRoundTripKeepsLogits) {
  Rng rng(11);
  for (auto cfg : {ModelConfig::small_cnn(), ModelConfig::mlp()}) {
    const Classifier m(cfg, 41);
    const Classifier back = Classifier::from_checkpoint(decode_checkpoint(encode_checkpoint(m.to_checkpoint())));
    const Tensor x = random_images(100, rng);
    EXPECT_EQ(m.logits(x), back.logits(x));
  }
}

TEST(Training, SmallCnnReachesHeldOutAccuracy) {
  const Dataset train = load_idx_dir(LRDET_DATA_DIR, Split::train);
  const Dataset test = load_idx_dir(LRDET_DATA_DIR, Split::test);
  Classifier m(ModelConfig::small_cnn(), derive_seed(7, "model-init"));
  TrainHyper h;
  h.epochs = 3;
  h.seed = derive_seed(7, "model-train");
  train_classifier(m, train, h);
  EXPECT_GE(accuracy(m, test), 0.95);
}
