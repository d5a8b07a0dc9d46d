#include <gtest/gtest.h>

#include <cmath>

#include "lrdet/attack.hpp"
#include "lrdet/errors.hpp"
#include "support/attack_runs.hpp"
#include "support/oracles.hpp"

using namespace lrdet;
namespace o = lrdet::oracle;

namespace {

std::vector<std::uint8_t> always_success(const Tensor& x, std::vector<std::uint32_t>& pred) {
  pred.assign(x.dim(0), 0);
  return std::vector<std::uint8_t>(x.dim(0), 1);
}

Objective constant_gradient(float g) {
  return [g](const Tensor& x, std::vector<float>& value) {
    value.assign(x.dim(0), 0.0f);
    return Tensor(x.shape(), g);
  };
}

// A CNN trained briefly on the bundled training split, shared by the tests
// that need meaningful gradients.
const Classifier& trained_cnn() {
  static const Classifier model = [] {
    const Dataset train = load_idx_dir(LRDET_DATA_DIR, Split::train).head(3000);
    Classifier m(ModelConfig::small_cnn(), derive_seed(1, "model-init"));
    TrainHyper h;
    h.epochs = 1;
    h.seed = derive_seed(1, "model-train");
    train_classifier(m, train, h);
    return m;
  }();
  return model;
}

struct Batch {
  Tensor x;
  std::vector<std::uint32_t> labels;
};

// Test samples the trained CNN classifies correctly.
Batch correct_batch(std::size_t n) {
  const Dataset test = load_idx_dir(LRDET_DATA_DIR, Split::test);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < test.size() && keep.size() < n; ++i) {
    const std::vector<std::size_t> one{i};
    if (trained_cnn().predict(test.batch(one))[0] == test.labels[i]) keep.push_back(i);
  }
  return {test.batch(keep), test.batch_labels(keep)};
}

}  // namespace

TEST(AttackNames, RoundTrip) {
  for (auto k : {AttackKind::fgsm, AttackKind::bim, AttackKind::pgd, AttackKind::apgd_s, AttackKind::adaptive_pgd})
    EXPECT_EQ(parse_attack_kind(to_string(k)), k);
  EXPECT_EQ(parse_norm("l2"), Norm::l2);
  EXPECT_THROW(parse_attack_kind("cw"), PreconditionError);
  EXPECT_THROW(parse_norm("l1"), PreconditionError);
}

TEST(AttackConfig, Defaults) {
  const float eps = 8.0f / 255.0f;
  const AttackConfig p = default_attack(AttackKind::pgd, eps);
  EXPECT_EQ(p.steps, 10u);
  EXPECT_TRUE(p.random_start);
  EXPECT_FLOAT_EQ(p.resolved_step(), eps / 4);
  EXPECT_FLOAT_EQ(default_attack(AttackKind::bim, eps).resolved_step(), eps / 10);
  EXPECT_FLOAT_EQ(default_attack(AttackKind::apgd_s, eps).resolved_step(), 2 * eps);
  const AttackConfig a = default_attack(AttackKind::adaptive_pgd, eps);
  EXPECT_EQ(a.steps, 200u);
  EXPECT_EQ(a.lambda, 1.0f);
  AttackConfig bad = p;
  bad.epsilon = -1.0f;
  EXPECT_THROW(bad.validate(), PreconditionError);
  bad = p;
  bad.steps = 0;
  EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(Project, HandExamples) {
  const Tensor x(Shape{1, 1}, {0.5f});
  EXPECT_FLOAT_EQ(project(Tensor(Shape{1, 1}, {0.9f}), x, 0.1f, Norm::linf)[0], 0.6f);

  const Tensor x4(Shape{1, 4}, 0.5f);
  const Tensor z(Shape{1, 4}, {0.5f + 0.12f, 0.5f - 0.16f, 0.5f, 0.5f});  // ||delta|| = 0.2
  const Tensor p = project(z, x4, 0.1f, Norm::l2);
  EXPECT_NEAR(perturbation_norms(p, x4, Norm::l2)[0], 0.1, 1e-6);
  EXPECT_NEAR(p[0] - 0.5f, 0.06f, 1e-6);
  EXPECT_NEAR(p[1] - 0.5f, -0.08f, 1e-6);

  const Tensor inside(Shape{1, 4}, {0.52f, 0.5f, 0.49f, 0.5f});
  EXPECT_EQ(project(inside, x4, 0.1f, Norm::l2), inside);
  EXPECT_EQ(project(inside, x4, 0.1f, Norm::linf), inside);
}

TEST(Project, IdempotentOnRandomInputs) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const Tensor x = o::random_tensor({2, 30}, rng, 0, 1);
    const Tensor z = o::random_tensor({2, 30}, rng, -0.5f, 1.5f);
    const Norm norm = i % 2 ? Norm::l2 : Norm::linf;
    const float eps = rng.uniform(0.0f, 2.0f);
    const Tensor p = project(z, x, eps, norm);
    EXPECT_EQ(project(p, x, eps, norm), p);
    for (float v : perturbation_norms(p, x, norm)) EXPECT_LE(v, eps + 1e-5f);
  }
}

TEST(Fgsm, ZeroEpsilonReturnsInput) {
  Rng rng(3);
  const Classifier m(ModelConfig::small_cnn(), 5);
  const Tensor x = o::random_tensor({3, 1, 28, 28}, rng, 0, 1);
  const std::vector<std::uint32_t> labels{1, 2, 3};
  EXPECT_EQ(fgsm(m, x, labels, 0.0f).x_adv, x);
  EXPECT_EQ(pgd(m, x, labels, default_attack(AttackKind::pgd, 0.0f, 9)).x_adv, x);
}

TEST(Fgsm, ZeroGradientLeavesInputAndFails) {
  Rng rng(4);
  const Tensor x = o::random_tensor({2, 5}, rng, 0, 1);
  for (auto kind : {AttackKind::fgsm, AttackKind::pgd, AttackKind::bim}) {
    AttackConfig cfg = default_attack(kind, 0.1f, 3);
    cfg.random_start = false;
    const AdvBatch out = projected_ascent(constant_gradient(0.0f), x, cfg, always_success);
    EXPECT_EQ(out.x_adv, x);
    EXPECT_EQ(out.successes(), 0u);
  }
  // Zero gradient at every step also resets a random start.
  const AdvBatch started =
      projected_ascent(constant_gradient(0.0f), x, default_attack(AttackKind::pgd, 0.1f, 3), always_success);
  EXPECT_EQ(started.x_adv, x);
  EXPECT_EQ(started.successes(), 0u);
  const AdvBatch ap = apgd_ascent(constant_gradient(0.0f), x, default_attack(AttackKind::apgd_s, 0.1f, 3), always_success);
  EXPECT_EQ(ap.x_adv, x);
  EXPECT_EQ(ap.successes(), 0u);
}

TEST(Fgsm, ClipsToPixelRange) {
  const Tensor x(Shape{1, 3}, {0.95f, 0.5f, 0.02f});
  const AdvBatch out =
      projected_ascent(constant_gradient(1.0f), x, default_attack(AttackKind::fgsm, 0.1f), always_success);
  EXPECT_EQ(out.x_adv[0], 1.0f);
  EXPECT_FLOAT_EQ(out.x_adv[1], 0.6f);
  const AdvBatch down =
      projected_ascent(constant_gradient(-1.0f), x, default_attack(AttackKind::fgsm, 0.1f), always_success);
  EXPECT_EQ(down.x_adv[2], 0.0f);
}

TEST(Pgd, SingleStepCollapsesToFgsm) {
  Rng rng(5);
  const Classifier m(ModelConfig::mlp(), 6);
  const Tensor x = o::random_tensor({4, 1, 28, 28}, rng, 0, 1);
  const std::vector<std::uint32_t> labels{0, 1, 2, 3};
  const float eps = 0.05f;
  const Tensor ref = fgsm(m, x, labels, eps).x_adv;

  AttackConfig p = default_attack(AttackKind::pgd, eps);
  p.steps = 1;
  p.random_start = false;
  p.step_size = eps;
  EXPECT_EQ(pgd(m, x, labels, p).x_adv, ref);

  AttackConfig b = default_attack(AttackKind::bim, eps);
  b.steps = 1;
  EXPECT_EQ(bim(m, x, labels, b).x_adv, ref);

  EXPECT_EQ(run_attack(m, nullptr, x, labels, default_attack(AttackKind::fgsm, eps)).x_adv, ref);
}

TEST(Pgd, DeterministicGivenSeed) {
  Rng rng(6);
  const Classifier m(ModelConfig::mlp(), 7);
  const Tensor x = o::random_tensor({3, 1, 28, 28}, rng, 0, 1);
  const std::vector<std::uint32_t> labels{4, 5, 6};
  for (auto kind : {AttackKind::pgd, AttackKind::apgd_s}) {
    AttackConfig cfg = default_attack(kind, 0.1f, 77);
    cfg.random_start = true;
    EXPECT_EQ(run_attack(m, nullptr, x, labels, cfg).x_adv, run_attack(m, nullptr, x, labels, cfg).x_adv);
    for (auto norm : {Norm::linf, Norm::l2}) {
      cfg.norm = norm;
      const AdvBatch a = run_attack(m, nullptr, x, labels, cfg);
      cfg.seed = 78;
      const AdvBatch b = run_attack(m, nullptr, x, labels, cfg);
      cfg.seed = 77;
      EXPECT_NE(a.x_adv, b.x_adv) << to_string(kind) << " " << to_string(norm);
    }
  }
}

TEST(Pgd, TargetedRequiresTargets) {
  Rng rng(7);
  const Classifier m(ModelConfig::mlp(), 8);
  const Tensor x = o::random_tensor({2, 1, 28, 28}, rng, 0, 1);
  const std::vector<std::uint32_t> labels{1, 2};
  AttackConfig cfg = default_attack(AttackKind::pgd, 0.1f);
  cfg.targeted = true;
  EXPECT_THROW(pgd(m, x, labels, cfg), PreconditionError);
  const auto targets = random_targets(labels, 10, 3);
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_NE(targets[i], labels[i]);
  EXPECT_NO_THROW(pgd(m, x, labels, cfg, targets));
}

TEST(Pgd, RejectsOutOfRangeInput) {
  const Classifier m(ModelConfig::mlp(), 8);
  const Tensor x(Shape{1, 1, 28, 28}, 1.5f);
  EXPECT_THROW(fgsm(m, x, std::vector<std::uint32_t>{0}, 0.1f), PreconditionError);
}

TEST(Budget, ThousandRandomRuns) {
  const Classifier m(ModelConfig::mlp(), 9);
  const TapSpec spec = make_tap_spec(m, 3, 0.6, OrderPolicy::fixed, 1);
  const Detector d(spec, Regressor(spec.input_dim(), 256, 64, 2), m.feature_layer());
  const o::BudgetReport rep = o::random_budget_runs(m, d, 1000, 20240602);
  EXPECT_EQ(rep.runs, 1000u);
  EXPECT_EQ(rep.violations, 0u) << rep.first_violation << " worst excess " << rep.worst_excess;
}

TEST(Apgd, StepSizeNeverIncreases) {
  const Batch b = correct_batch(16);
  AttackConfig cfg = default_attack(AttackKind::apgd_s, 16.0f / 255.0f);
  cfg.steps = 20;
  AttackTrace trace;
  apgd_ascent(cross_entropy_objective(trained_cnn(), b.labels, false), b.x, cfg, always_success, &trace);
  ASSERT_EQ(trace.step.size(), 1 + cfg.steps / std::max<std::size_t>(1, cfg.steps / 5));
  bool any_halved = false;
  for (std::size_t t = 1; t < trace.step.size(); ++t)
    for (std::size_t r = 0; r < b.labels.size(); ++r) {
      EXPECT_LE(trace.step[t][r], trace.step[t - 1][r]);
      any_halved |= trace.step[t][r] < trace.step[t - 1][r];
    }
  EXPECT_TRUE(any_halved);
}

TEST(Apgd, BestIterateNotWorseThanStart) {
  const Batch b = correct_batch(16);
  const AttackConfig cfg = default_attack(AttackKind::apgd_s, 8.0f / 255.0f);
  const Objective obj = cross_entropy_objective(trained_cnn(), b.labels, false);
  std::vector<float> start;
  obj(b.x, start);
  const AdvBatch out = apgd_s(trained_cnn(), b.x, b.labels, cfg);
  for (std::size_t r = 0; r < start.size(); ++r) EXPECT_GE(out.final_loss[r], start[r]);
}

TEST(Adaptive, ZeroLambdaMatchesPgd) {
  const Batch b = correct_batch(8);
  const Classifier& m = trained_cnn();
  const TapSpec spec = make_tap_spec(m, 3, 0.6, OrderPolicy::fixed, 1);
  const Detector d(spec, Regressor(spec.input_dim(), 256, 64, 2), m.feature_layer());
  AttackConfig cfg = default_attack(AttackKind::adaptive_pgd, 8.0f / 255.0f, 31);
  cfg.steps = 20;
  cfg.lambda = 0.0f;
  AttackConfig plain = default_attack(AttackKind::pgd, 8.0f / 255.0f, 31);
  plain.steps = 20;
  EXPECT_EQ(adaptive_pgd(m, d, b.x, b.labels, cfg).x_adv, pgd(m, b.x, b.labels, plain).x_adv);
}

TEST(Adaptive, NeedsDetector) {
  const Classifier m(ModelConfig::mlp(), 8);
  const Tensor x(Shape{1, 1, 28, 28}, 0.5f);
  EXPECT_THROW(run_attack(m, nullptr, x, std::vector<std::uint32_t>{0}, default_attack(AttackKind::adaptive_pgd, 0.1f)),
               PreconditionError);
}

TEST(Pgd, SuccessRateMonotoneInEpsilon) {
  const Batch b = correct_batch(200);
  std::size_t prev = 0;
  for (float e : {0.0f, 2.0f, 4.0f, 8.0f, 16.0f, 32.0f, 64.0f, 128.0f}) {
    const std::size_t s = pgd(trained_cnn(), b.x, b.labels, default_attack(AttackKind::pgd, e / 255.0f, 5)).successes();
    EXPECT_GE(s, prev) << "eps " << e;
    prev = s;
  }
  EXPECT_GT(prev, b.labels.size() / 2);
}
