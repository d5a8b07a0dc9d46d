#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lrdet/detector.hpp"
#include "lrdet/model.hpp"

namespace lrdet {

enum class AttackKind { fgsm, bim, pgd, apgd_s, adaptive_pgd };
enum class Norm { linf, l2 };
// How the adaptive attack orders tap segments when differentiating the detector.
enum class AdaptiveOrder { fixed, randomized };

std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);
std::string to_string(Norm norm);
Norm parse_norm(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  float epsilon = 8.0f / 255.0f;  // pixel units, [0,1] scale
  float step_size = 0.0f;         // 0 selects the per-kind default
  std::size_t steps = 10;
  Norm norm = Norm::linf;
  bool targeted = false;
  bool random_start = true;
  float lambda = 1.0f;  // detector-loss weight, adaptive only
  AdaptiveOrder adaptive_order = AdaptiveOrder::fixed;
  std::uint64_t seed = 0;

  // Step size after defaults: pgd eps/4, bim eps/steps, apgd_s 2*eps, fgsm eps.
  float resolved_step() const;
  void validate() const;
};

// Defaults per kind: fgsm 1 step; bim and pgd/apgd 10 steps; adaptive 200 steps.
AttackConfig default_attack(AttackKind kind, float epsilon, std::uint64_t seed = 0);

struct AdvBatch {
  Tensor x_adv;
  std::vector<std::uint8_t> success;  // prediction changed (untargeted) or equals the target
  std::vector<float> final_loss;      // attack objective at x_adv
  std::vector<std::uint32_t> pred;

  std::size_t successes() const;
};

// Objective to maximise for a batch: fills per-sample values, returns d/dx.
using Objective = std::function<Tensor(const Tensor& x, std::vector<float>& value)>;

// linf: clamp to [x-eps, x+eps]; l2: rescale each sample's delta to norm eps
// when larger. Both then clamp to [0,1].
Tensor project(const Tensor& x_adv, const Tensor& x_orig, float epsilon, Norm norm);

Objective cross_entropy_objective(const Classifier& model, std::span<const std::uint32_t> labels, bool targeted);

AdvBatch fgsm(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels, float epsilon);
// `targets` is required when cfg.targeted.
AdvBatch pgd(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels, const AttackConfig& cfg,
             std::span<const std::uint32_t> targets = {});
AdvBatch bim(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels, const AttackConfig& cfg,
             std::span<const std::uint32_t> targets = {});
// Simplified APGD: momentum 0.75, step halving on stagnation at checkpoints,
// restart from the best iterate; returns the best iterate.
AdvBatch apgd_s(const Classifier& model, const Tensor& x, std::span<const std::uint32_t> labels,
                const AttackConfig& cfg, std::span<const std::uint32_t> targets = {});
// PGD on CE(g(x), y) - lambda * score(x).
AdvBatch adaptive_pgd(const Classifier& model, const Detector& detector, const Tensor& x,
                      std::span<const std::uint32_t> labels, const AttackConfig& cfg);

// Dispatches on cfg.kind. `detector` is needed only for adaptive_pgd.
AdvBatch run_attack(const Classifier& model, const Detector* detector, const Tensor& x,
                    std::span<const std::uint32_t> labels, const AttackConfig& cfg,
                    std::span<const std::uint32_t> targets = {});

// Seeded target classes != label.
std::vector<std::uint32_t> random_targets(std::span<const std::uint32_t> labels, std::size_t num_classes,
                                          std::uint64_t seed);

// Per-sample budget check: max |delta| (linf) or ||delta||_2 (l2).
std::vector<float> perturbation_norms(const Tensor& x_adv, const Tensor& x_orig, Norm norm);

// Trace of per-iteration objective values, recorded when non-null.
struct AttackTrace {
  std::vector<std::vector<float>> loss;  // [iteration][sample]
  std::vector<std::vector<float>> step;  // apgd_s: per-sample step size at each checkpoint
};

// Generic projected ascent used by pgd/bim/adaptive: x <- project(x + a*dir(grad)).
AdvBatch projected_ascent(const Objective& objective, const Tensor& x, const AttackConfig& cfg,
                          const std::function<std::vector<std::uint8_t>(const Tensor&, std::vector<std::uint32_t>&)>& judge,
                          AttackTrace* trace = nullptr);

AdvBatch apgd_ascent(const Objective& objective, const Tensor& x, const AttackConfig& cfg,
                     const std::function<std::vector<std::uint8_t>(const Tensor&, std::vector<std::uint32_t>&)>& judge,
                     AttackTrace* trace = nullptr);

}  // namespace lrdet
