#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrdet/attack.hpp"
#include "lrdet/baseline.hpp"
#include "lrdet/detector.hpp"

namespace lrdet {

// P(adv score > clean score) with ties counted 1/2, from exact pair counts.
double auroc(std::span<const float> scores_clean, std::span<const float> scores_adv);

// Runs fn(chunk) for chunk in [0, chunks) on up to `threads` workers.
void parallel_for(std::size_t chunks, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct EvalSets {
  Tensor clean_x;  // correctly classified inputs
  std::vector<std::uint32_t> clean_labels;
  Tensor adv_x;    // successful attacks on clean_x rows
  std::vector<std::uint32_t> adv_labels;
  std::vector<std::size_t> adv_source;  // row of clean_x each adversarial came from
  std::size_t dataset_size = 0;
  std::size_t attacked = 0;
  double clean_accuracy = 0.0;
  double success_rate = 0.0;

  std::size_t clean_count() const { return clean_labels.size(); }
  std::size_t adv_count() const { return adv_labels.size(); }
  // Clean rows matching adv_x row for row.
  Tensor paired_clean() const;
};

struct SetOptions {
  std::size_t max_samples = 0;  // 0 = whole dataset
  std::size_t chunk = 100;      // attack chunk; each chunk derives its own seed
  std::size_t threads = 1;
};

// Keeps correctly classified samples, attacks them and keeps the successes.
// Throws PreconditionError when no sample is classified correctly.
EvalSets build_eval_sets(const Classifier& model, const AttackConfig& attack, const Dataset& data,
                         const Detector* detector = nullptr, const SetOptions& options = {});

using BatchScorer = std::function<std::vector<float>(const Tensor& x)>;

std::vector<float> score_all(const BatchScorer& scorer, const Tensor& x, std::size_t batch = 256);

BatchScorer lr_scorer(const Classifier& model, const Detector& detector, std::uint64_t order_seed);
BatchScorer mismatch_scorer(const Classifier& model, const TransformSpec& spec);

struct NamedScorer {
  std::string name;
  BatchScorer scorer;
};

struct DetectorResult {
  std::string name;
  std::optional<double> auroc;  // empty when there are no adversarial samples
  MeanStd clean;
  MeanStd adv;
  std::optional<double> pts_seconds;
};

struct EvalReport {
  nlohmann::json config;
  std::size_t dataset_size = 0, clean_count = 0, attacked = 0, adv_count = 0;
  double clean_accuracy = 0.0, success_rate = 0.0;
  std::vector<DetectorResult> detectors;
  std::optional<ConjectureStats> conjecture;

  const DetectorResult& result(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

struct ScoredSets {
  std::vector<float> clean;
  std::vector<float> adv;
};

// Scores both sets with every scorer and fills auroc/mean/std rows.
EvalReport score_sets(const EvalSets& sets, std::span<const NamedScorer> scorers,
                      std::vector<ScoredSets>* raw = nullptr);

struct EvalOptions {
  SetOptions sets;
  std::vector<TransformSpec> baselines{TransformSpec::bit_reduce(1), TransformSpec::median_smooth(3)};
  bool conjecture = false;
  std::size_t timing_samples = 0;  // 0 = no timing
};

// Full protocol for one (model, attack, detector) triple.
EvalReport evaluate(const Classifier& model, const Detector& detector, const AttackConfig& attack, const Dataset& data,
                    const EvalOptions& options = {}, std::vector<ScoredSets>* raw = nullptr);

struct SweepRow {
  float epsilon;
  EvalReport report;
};

std::vector<SweepRow> epsilon_sweep(const Classifier& model, const Detector& detector, const AttackConfig& attack,
                                    const Dataset& data, std::span<const float> eps_list,
                                    const EvalOptions& options = {});

std::string sweep_table(std::span<const SweepRow> rows);

struct TimingResult {
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  std::size_t samples = 0;
  std::vector<double> repetition_means;
};

// Wall-clock per-sample time of `process` over single-sample batches, after
// one untimed warm-up pass.
TimingResult timing_bench(const std::function<void(const Tensor&)>& process, const Tensor& samples,
                          std::size_t repetitions = 1);

std::string scores_csv(std::span<const NamedScorer> scorers, std::span<const ScoredSets> raw);

}  // namespace lrdet
