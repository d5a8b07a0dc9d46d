#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lrdet/autodiff.hpp"
#include "lrdet/checkpoint.hpp"
#include "lrdet/dataset.hpp"
#include "lrdet/model.hpp"
#include "lrdet/rng.hpp"

namespace lrdet {

enum class OrderPolicy { fixed, randomized };

std::string to_string(OrderPolicy policy);
OrderPolicy parse_order_policy(const std::string& name);

struct SliceBounds {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - start; }
  friend bool operator==(const SliceBounds&, const SliceBounds&) = default;
};

// Which layer outputs feed the regressor, which part of each is kept, and how
// the kept parts are ordered when concatenated.
struct TapSpec {
  std::vector<std::size_t> layers;  // 1-based, sorted ascending
  std::vector<SliceBounds> slices;  // over each layer's flattened output
  OrderPolicy order = OrderPolicy::fixed;
  std::uint64_t order_seed = 0;

  std::size_t input_dim() const;
  // Offsets of each segment inside the fixed-order vector.
  std::vector<std::size_t> segment_offsets() const;
};

constexpr double kDefaultSliceFraction = 0.6;
constexpr std::size_t kDefaultTapCount = 3;

// m distinct indices drawn uniformly from [floor(n/5), floor(4n/5)), sorted.
// Indices are 1-based layer ids, so the window never reaches a_{n-1} or a_n
// for n >= 5.
std::vector<std::size_t> select_layers(std::size_t n_layers, std::size_t m, Rng& rng);

// [floor((1-f)/2 * L), that + floor(f * L))
SliceBounds middle_slice(std::size_t length, double fraction);
std::vector<float> slice_middle(std::span<const float> activation, double fraction);

TapSpec make_tap_spec(const Classifier& model, std::size_t m, double fraction, OrderPolicy order, std::uint64_t seed);

// Concatenated regressor inputs v for a batch trace, shape [B, input_dim].
// Fixed order concatenates segments by ascending layer index; randomized order
// draws one segment permutation per sample from `rng`.
Tensor build_input_vectors(const ActivationTrace& trace, const TapSpec& spec, Rng* rng = nullptr);

// Differentiable variant with one segment order for the whole batch. `order`
// lists positions into spec.layers; empty means ascending.
Var build_input_var(const std::map<std::size_t, Var>& taps, const TapSpec& spec,
                    std::span<const std::size_t> order = {});

// Two-hidden-layer ReLU MLP regressor.
class Regressor {
 public:
  Regressor() = default;
  Regressor(std::size_t input_dim, std::size_t hidden, std::size_t output_dim, std::uint64_t init_seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t output_dim() const { return output_dim_; }

  const std::vector<Var>& weights() const { return weights_; }
  void set_weight(std::size_t i, Tensor value);

  Var forward(const Var& v, std::span<const Var> params) const;
  Var forward(const Var& v) const { return forward(v, weights_); }

 private:
  std::size_t input_dim_ = 0, hidden_ = 0, output_dim_ = 0;
  std::vector<Var> weights_;  // w1 b1 w2 b2 w3 b3
};

// max(256, output_dim)
std::size_t default_hidden_width(std::size_t output_dim);

class Detector {
 public:
  Detector(TapSpec spec, Regressor regressor, std::size_t target_layer);

  const TapSpec& spec() const { return spec_; }
  const Regressor& regressor() const { return regressor_; }
  Regressor& regressor() { return regressor_; }
  std::size_t target_layer() const { return target_layer_; }

  // Throws ConfigError when tap or feature dimensions disagree with `model`.
  void check_compatible(const Classifier& model) const;

  // MSE between m(v) and a_{n-1}(x) per sample. In randomized mode segment
  // orders come from `order_rng`, or from a stream seeded by the spec's
  // order_seed when none is given.
  std::vector<float> score(const Classifier& model, const Tensor& x, Rng* order_rng = nullptr) const;

  // Differentiable score [B] with one segment order for the batch.
  Var score_var(const Classifier& model, const Var& x, std::span<const std::size_t> order = {}) const;
  // Same, from taps of an existing forward pass (must include the spec layers
  // and the feature layer).
  Var score_from_taps(const std::map<std::size_t, Var>& taps, std::span<const std::size_t> order = {}) const;
  std::vector<std::size_t> required_taps() const;

  // Regressor output and feature vector for a batch, fixed segment order.
  std::pair<Tensor, Tensor> predict_features(const Classifier& model, const Tensor& x) const;

  Checkpoint to_checkpoint() const;
  static Detector from_checkpoint(const Checkpoint& ckpt);

 private:
  TapSpec spec_;
  Regressor regressor_;
  std::size_t target_layer_;
};

struct RegressorHyper {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  float learning_rate = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::size_t hidden = 0;  // 0 = default_hidden_width
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0 = run all epochs
};

struct RegressorEpoch {
  std::size_t epoch;
  double mse;
};

// Fits the regressor on clean samples with the classifier frozen. In
// randomized mode every batch uses a freshly drawn segment order.
Detector train_regressor(const Classifier& model, const TapSpec& spec, const Dataset& clean, const RegressorHyper& hyper,
                         const std::function<void(const RegressorEpoch&)>& on_epoch = {});

// Paired-sample statistics for layer-change and regression-error claims.
struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

struct ConjectureStats {
  std::size_t pairs = 0;    // pairs used
  std::size_t skipped = 0;  // pairs with a zero normalisation denominator
  MeanStd d_first;          // normalised change in a_1
  MeanStd d_feature;        // normalised change in a_{n-1}
  MeanStd err_clean;        // ||m(v(x)) - a_{n-1}(x)||_2
  MeanStd err_adv;
  MeanStd d_diff;           // d_feature - d_first per pair
  MeanStd err_diff;         // err_adv - err_clean per pair
  std::size_t d_violations = 0;    // pairs with d_feature <= d_first
  std::size_t err_violations = 0;  // pairs with err_adv <= err_clean

  // Standard error of the mean paired difference.
  double d_diff_stderr() const;
  double err_diff_stderr() const;
};

ConjectureStats conjecture_stats(const Classifier& model, const Detector& detector, const Tensor& clean,
                                 const Tensor& adversarial);

MeanStd mean_std(std::span<const double> values);

// Score at quantile q of the clean scores (q = 0.95 flags 5% of clean inputs).
float quantile_threshold(std::span<const float> clean_scores, double q);

}  // namespace lrdet
