#include "lrdet/attack.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lrdet/errors.hpp"
#include "lrdet/ops.hpp"
#include "lrdet/rng.hpp"

namespace lrdet {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::bim: return "bim";
    case AttackKind::pgd: return "pgd";
    case AttackKind::apgd_s: return "apgd_s";
    case AttackKind::adaptive_pgd: return "adaptive_pgd";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : {AttackKind::fgsm, AttackKind::bim, AttackKind::pgd, AttackKind::apgd_s, AttackKind::adaptive_pgd})
    if (to_string(k) == name) return k;
  throw PreconditionError("unknown attack '" + name + "' (expected fgsm, bim, pgd, apgd_s or adaptive_pgd)");
}

std::string to_string(Norm norm) { return norm == Norm::linf ? "linf" : "l2"; }

Norm parse_norm(const std::string& name) {
  if (name == "linf") return Norm::linf;
  if (name == "l2") return Norm::l2;
  throw PreconditionError("unknown norm '" + name + "' (expected linf or l2)");
}

float AttackConfig::resolved_step() const {
  if (step_size > 0.0f) return step_size;
  switch (kind) {
    case AttackKind::fgsm: return epsilon;
    case AttackKind::bim: return epsilon / static_cast<float>(steps);
    case AttackKind::apgd_s: return 2.0f * epsilon;
    case AttackKind::pgd:
    case AttackKind::adaptive_pgd: return epsilon / 4.0f;
  }
  return epsilon / 4.0f;
}

void AttackConfig::validate() const {
  LRDET_REQUIRE(epsilon >= 0.0f && std::isfinite(epsilon), "epsilon must be non-negative");
  LRDET_REQUIRE(steps >= 1, "steps must be at least 1");
  LRDET_REQUIRE(step_size >= 0.0f, "step size must be positive (0 selects the default)");
  LRDET_REQUIRE(lambda >= 0.0f, "lambda must be non-negative");
}

AttackConfig default_attack(AttackKind kind, float epsilon, std::uint64_t seed) {
  AttackConfig cfg;
  cfg.kind = kind;
  cfg.epsilon = epsilon;
  cfg.seed = seed;
  switch (kind) {
    case AttackKind::fgsm:
      cfg.steps = 1;
      cfg.random_start = false;
      break;
    case AttackKind::bim:
      cfg.steps = 10;
      cfg.random_start = false;
      break;
    case AttackKind::pgd:
      cfg.steps = 10;
      break;
    case AttackKind::apgd_s:
      cfg.steps = 10;
      cfg.random_start = false;
      break;
    case AttackKind::adaptive_pgd:
      cfg.steps = 200;
      cfg.lambda = 1.0f;
      break;
  }
  return cfg;
}

std::size_t AdvBatch::successes() const { return static_cast<std::size_t>(std::count(success.begin(), success.end(), 1)); }

Tensor project(const Tensor& x_adv, const Tensor& x_orig, float epsilon, Norm norm) {
  LRDET_REQUIRE(x_adv.shape() == x_orig.shape(),
                "project: shape mismatch " + shape_str(x_adv.shape()) + " vs " + shape_str(x_orig.shape()));
  Tensor out = x_adv;
  auto o = out.data();
  auto x = x_orig.data();
  if (norm == Norm::linf) {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(o[i], x[i] - epsilon, x[i] + epsilon);
  } else {
    const std::size_t rows = out.rank() > 1 ? out.dim(0) : 1;
    const std::size_t n = o.size() / rows;
    auto row_norm = [&](std::span<const float> v, std::size_t r) {
      double sq = 0.0;
      for (std::size_t i = r * n; i < (r + 1) * n; ++i) sq += static_cast<double>(v[i] - x[i]) * (v[i] - x[i]);
      return std::sqrt(sq);
    };
    const std::vector<float> z(o.begin(), o.end());
    for (std::size_t r = 0; r < rows; ++r) {
      const double nrm = row_norm(z, r);
      if (nrm <= epsilon) continue;
      // Storing x + delta in float can land just outside the ball; shrink the
      // target radius until the stored point measures inside, so a second
      // projection leaves it untouched.
      double radius = epsilon;
      for (;;) {
        const auto f = static_cast<float>(radius / nrm);
        for (std::size_t i = r * n; i < (r + 1) * n; ++i) o[i] = x[i] + (z[i] - x[i]) * f;
        const double got = row_norm(o, r);
        if (got <= epsilon) break;
        radius -= 2.0 * (got - epsilon);
      }
    }
  }
  for (float& v : o) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

std::vector<float> perturbation_norms(const Tensor& x_adv, const Tensor& x_orig, Norm norm) {
  LRDET_REQUIRE(x_adv.shape() == x_orig.shape(), "perturbation_norms: shape mismatch");
  const std::size_t rows = x_adv.dim(0), n = x_adv.row_size();
  std::vector<float> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t i = r * n; i < (r + 1) * n; ++i) {
      const double d = std::abs(static_cast<double>(x_adv[i]) - x_orig[i]);
      acc = norm == Norm::linf ? std::max(acc, d) : acc + d * d;
    }
    out[r] = static_cast<float>(norm == Norm::linf ? acc : std::sqrt(acc));
  }
  return out;
}

Objective cross_entropy_objective(const Classifier& model, std::span<const std::uint32_t> labels, bool targeted) {
  auto owned = std::make_shared<std::vector<std::uint32_t>>(labels.begin(), labels.end());
  return [&model, owned, targeted](const Tensor& x, std::vector<float>& value) {
    Tape tape;
    Var xv = tape.leaf(x);
    Var ce = cross_entropy(model.forward(xv).logits, *owned);
    // Targeted attacks descend the loss toward the target class.
    Var obj = targeted ? ops::scale(ce, -1.0f) : ce;
    value.assign(obj.value().data().begin(), obj.value().data().end());
    return tape.backward(ops::sum(obj)).of(xv);
  };
}

namespace {

using Judge = std::function<std::vector<std::uint8_t>(const Tensor&, std::vector<std::uint32_t>&)>;

Judge make_judge(const Classifier& model, std::span<const std::uint32_t> labels, bool targeted,
                 std::span<const std::uint32_t> targets) {
  auto ref = std::make_shared<std::vector<std::uint32_t>>(targeted ? targets.begin() : labels.begin(),
                                                          targeted ? targets.end() : labels.end());
  return [&model, ref, targeted](const Tensor& x, std::vector<std::uint32_t>& pred) {
    pred = model.predict(x);
    std::vector<std::uint8_t> ok(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) ok[i] = targeted ? pred[i] == (*ref)[i] : pred[i] != (*ref)[i];
    return ok;
  };
}

void check_batch(const Tensor& x, std::span<const std::uint32_t> labels, const AttackConfig& cfg,
                 std::span<const std::uint32_t> targets) {
  cfg.validate();
  LRDET_REQUIRE(x.rank() >= 2 && x.dim(0) == labels.size(), "attack batch has " + std::to_string(labels.size()) +
                                                                 " labels for input " + shape_str(x.shape()));
  LRDET_REQUIRE(!cfg.targeted || targets.size() == labels.size(), "targeted attack needs one target per sample");
  for (float v : x.data()) LRDET_REQUIRE(v >= 0.0f && v <= 1.0f, "attack input must lie in [0,1]");
}

// Ascent direction per sample: sign for linf, unit l2 direction for l2.
// Sets moved[i] when sample i had a non-zero gradient.
Tensor ascent_direction(const Tensor& grad, Norm norm, std::vector<std::uint8_t>& moved) {
  const std::size_t rows = grad.dim(0), n = grad.row_size();
  Tensor dir = norm == Norm::linf ? sign(grad) : Tensor(grad.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t i = r * n; i < (r + 1) * n; ++i) sq += static_cast<double>(grad[i]) * grad[i];
    if (sq > 0.0) moved[r] = 1;
    if (norm == Norm::l2 && sq > 0.0) {
      const auto inv = static_cast<float>(1.0 / std::sqrt(sq));
      for (std::size_t i = r * n; i < (r + 1) * n; ++i) dir[i] = grad[i] * inv;
    }
  }
  return dir;
}

Tensor random_start(const Tensor& x, const AttackConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "attack-random-start"));
  Tensor out = x;
  if (cfg.norm == Norm::linf) {
    for (float& v : out.data()) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
  } else {
    const std::size_t rows = x.dim(0), n = x.row_size();
    std::vector<float> noise(n);
    for (std::size_t r = 0; r < rows; ++r) {
      double sq = 0.0;
      for (float& z : noise) {
        z = rng.normal();
        sq += static_cast<double>(z) * z;
      }
      const float radius = cfg.epsilon * rng.uniform();
      const auto f = static_cast<float>(radius / std::sqrt(std::max(sq, 1e-30)));
      for (std::size_t i = 0; i < n; ++i) out[r * n + i] += noise[i] * f;
    }
  }
  return project(out, x, cfg.epsilon, cfg.norm);
}

void copy_row(const Tensor& src, Tensor& dst, std::size_t r) {
  const std::size_t n = src.row_size();
  std::copy_n(src.data().data() + r * n, n, dst.data().data() + r * n);
}

AdvBatch finish(const Objective& objective, const Judge& judge, Tensor x_adv, const Tensor& x,
                const std::vector<std::uint8_t>& moved) {
  for (std::size_t r = 0; r < moved.size(); ++r)
    if (!moved[r]) copy_row(x, x_adv, r);
  AdvBatch out;
  objective(x_adv, out.final_loss);
  out.success = judge(x_adv, out.pred);
  for (std::size_t r = 0; r < moved.size(); ++r)
    if (!moved[r]) out.success[r] = 0;
  out.x_adv = std::move(x_adv);
  return out;
}

}  // namespace

AdvBatch projected_ascent(const Objective& objective, const Tensor& x, const AttackConfig& cfg, const Judge& judge,
                          AttackTrace* trace) {
  const float alpha = cfg.resolved_step();
  Tensor cur = cfg.random_start && cfg.epsilon > 0.0f ? random_start(x, cfg) : x;
  std::vector<std::uint8_t> moved(x.dim(0), 0);
  std::vector<float> value;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const Tensor grad = objective(cur, value);
    if (trace) trace->loss.push_back(value);
    const Tensor dir = ascent_direction(grad, cfg.norm, moved);
    auto c = cur.data();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += alpha * dir[i];
    cur = project(cur, x, cfg.epsilon, cfg.norm);
  }
  AdvBatch out = finish(objective, judge, std::move(cur), x, moved);
  if (trace) trace->loss.push_back(out.final_loss);
  return out;
}

AdvBatch apgd_ascent(const Objective& objective, const Tensor& x, const AttackConfig& cfg, const Judge& judge,
                     AttackTrace* trace) {
  constexpr float kMomentum = 0.75f;
  const std::size_t rows = x.dim(0), n = x.row_size();
  const std::size_t window = std::max<std::size_t>(1, cfg.steps / 5);
  std::vector<float> alpha(rows, cfg.resolved_step());
  std::vector<std::uint8_t> moved(rows, 0), improved(rows, 0);

  Tensor cur = cfg.random_start && cfg.epsilon > 0.0f ? random_start(x, cfg) : x;
  Tensor prev = cur;
  std::vector<float> value;
  Tensor grad = objective(cur, value);
  Tensor best_x = cur, best_grad = grad;
  std::vector<float> best = value;
  if (trace) {
    trace->loss.push_back(value);
    trace->step.push_back(alpha);
  }

  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const Tensor dir = ascent_direction(grad, cfg.norm, moved);
    Tensor z = cur;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = r * n; i < (r + 1) * n; ++i) z[i] += alpha[r] * dir[i];
    z = project(z, x, cfg.epsilon, cfg.norm);
    Tensor next = z;
    if (k > 0) {
      for (std::size_t i = 0; i < next.size(); ++i)
        next[i] = cur[i] + kMomentum * (z[i] - cur[i]) + (1.0f - kMomentum) * (cur[i] - prev[i]);
      next = project(next, x, cfg.epsilon, cfg.norm);
    }
    prev = std::move(cur);
    cur = std::move(next);
    grad = objective(cur, value);
    if (trace) trace->loss.push_back(value);
    for (std::size_t r = 0; r < rows; ++r) {
      if (value[r] > best[r]) {
        best[r] = value[r];
        copy_row(cur, best_x, r);
        copy_row(grad, best_grad, r);
        improved[r] = 1;
      }
    }
    if ((k + 1) % window == 0) {
      for (std::size_t r = 0; r < rows; ++r) {
        if (!improved[r]) {
          alpha[r] *= 0.5f;
          copy_row(best_x, cur, r);
          copy_row(best_x, prev, r);
          copy_row(best_grad, grad, r);
        }
        improved[r] = 0;
      }
      if (trace) trace->step.push_back(alpha);
    }
  }
  return finish(objective, judge, std::move(best_x), x, moved);
}

AdvBatch fgsm(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels, float epsilon) {
  AttackConfig cfg = default_attack(AttackKind::fgsm, epsilon);
  check_batch(x, labels, cfg, {});
  return projected_ascent(cross_entropy_objective(model, labels, false), x, cfg, make_judge(model, labels, false, {}));
}

AdvBatch pgd(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels, const AttackConfig& cfg,
             std::span<const std::uint32_t> targets) {
  check_batch(x, labels, cfg, targets);
  const auto ref = cfg.targeted ? targets : labels;
  return projected_ascent(cross_entropy_objective(model, ref, cfg.targeted), x, cfg,
                          make_judge(model, labels, cfg.targeted, targets));
}

AdvBatch bim(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels, const AttackConfig& cfg,
             std::span<const std::uint32_t> targets) {
  AttackConfig c = cfg;
  c.kind = AttackKind::bim;
  c.random_start = false;
  return pgd(model, x, labels, c, targets);
}

AdvBatch apgd_s(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels,
                const AttackConfig& cfg, std::span<const std::uint32_t> targets) {
  check_batch(x, labels, cfg, targets);
  const auto ref = cfg.targeted ? targets : labels;
  return apgd_ascent(cross_entropy_objective(model, ref, cfg.targeted), x, cfg,
                     make_judge(model, labels, cfg.targeted, targets));
}

AdvBatch adaptive_pgd(const Classifier& model, const Detector& detector, const Tensor& x,
                      std::span<const std::uint32_t> labels, const AttackConfig& cfg) {
  check_batch(x, labels, cfg, {});
  detector.check_compatible(model);
  auto owned = std::make_shared<std::vector<std::uint32_t>>(labels.begin(), labels.end());
  auto order_rng = std::make_shared<Rng>(derive_seed(cfg.seed, "adaptive-order"));
  const std::size_t segments = detector.spec().layers.size();
  const float lambda = cfg.lambda;
  const bool shuffle = cfg.adaptive_order == AdaptiveOrder::randomized;
  Objective objective = [&model, &detector, owned, order_rng, segments, lambda, shuffle](const Tensor& xb,
                                                                                          std::vector<float>& value) {
    Tape tape;
    Var xv = tape.leaf(xb);
    auto fwd = model.forward(xv, detector.required_taps());
    const std::vector<std::size_t> order = shuffle ? order_rng->permutation(segments) : std::vector<std::size_t>{};
    Var score = detector.score_from_taps(fwd.taps, order);
    Var obj = ops::sub(cross_entropy(fwd.logits, *owned), ops::scale(score, lambda));
    value.assign(obj.value().data().begin(), obj.value().data().end());
    return tape.backward(ops::sum(obj)).of(xv);
  };
  return projected_ascent(objective, x, cfg, make_judge(model, labels, false, {}));
}

AdvBatch run_attack(const Classifier& model, const Detector* detector, const Tensor& x,
                    std::span<const std::uint32_t> labels, const AttackConfig& cfg,
                    std::span<const std::uint32_t> targets) {
  switch (cfg.kind) {
    case AttackKind::fgsm: {
      AttackConfig c = cfg;
      c.steps = 1;
      c.random_start = false;
      c.step_size = cfg.epsilon;
      return pgd(model, x, labels, c, targets);
    }
    case AttackKind::bim: return bim(model, x, labels, cfg, targets);
    case AttackKind::pgd: return pgd(model, x, labels, cfg, targets);
    case AttackKind::apgd_s: return apgd_s(model, x, labels, cfg, targets);
    case AttackKind::adaptive_pgd:
      LRDET_REQUIRE(detector != nullptr, "adaptive_pgd needs a detector");
      return adaptive_pgd(model, *detector, x, labels, cfg);
  }
  throw PreconditionError("unhandled attack kind");
}

std::vector<std::uint32_t> random_targets(std::span<const std::uint32_t> labels, std::size_t num_classes,
                                          std::uint64_t seed) {
  LRDET_REQUIRE(num_classes >= 2, "targeted attacks need at least two classes");
  Rng rng(derive_seed(seed, "attack-targets"));
  std::vector<std::uint32_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = static_cast<std::uint32_t>((labels[i] + 1 + rng.below(num_classes - 1)) % num_classes);
  return out;
}

}  // namespace lrdet
