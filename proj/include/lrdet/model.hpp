#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lrdet/autodiff.hpp"
#include "lrdet/checkpoint.hpp"
#include "lrdet/dataset.hpp"

namespace lrdet {

enum class Architecture { mlp, small_cnn };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

struct ModelConfig {
  Architecture architecture = Architecture::small_cnn;
  Shape input_shape{1, 28, 28};  // {C,H,W}
  std::size_t num_classes = 10;
  // mlp: hidden widths. small_cnn: {conv1 channels, conv2 channels, fc width}.
  std::vector<std::size_t> hidden;

  static ModelConfig mlp();
  static ModelConfig small_cnn();
};

// Layer-boundary outputs a_i(x), keyed by 1-based layer index.
using ActivationTrace = std::map<std::size_t, Tensor>;

// g(x) = a_n(a_{n-1}(...a_1(x))). Every weighted layer's post-activation output
// is a boundary, as is every pooling output; a_n is the softmax over the
// logits and a_{n-1} is the feature vector.
class Classifier {
 public:
  enum class LayerKind { conv_relu, max_pool, dense_relu, dense_softmax };

  struct Layer {
    LayerKind kind;
    std::string name;
    Shape out_shape;  // per sample
    std::size_t first_param = 0;
    std::size_t param_count = 0;
  };

  struct Forward {
    Var logits;
    std::map<std::size_t, Var> taps;
  };

  Classifier(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t feature_layer() const { return layers_.size() - 1; }
  std::size_t layer_size(std::size_t index) const;  // flattened a_index size, 1-based

  const std::vector<Var>& weights() const { return weights_; }
  const std::vector<std::string>& weight_names() const { return weight_names_; }
  void set_weight(std::size_t i, Tensor value);

  // Differentiable forward with explicit parameter vars (used in training).
  // `taps` holds 1-based layer indices.
  Forward forward(const Var& x, std::span<const Var> params, std::span<const std::size_t> taps) const;
  // Same, with the stored weights as constants.
  Forward forward(const Var& x, std::span<const std::size_t> taps = {}) const;

  // Detached forward: logits plus exactly the requested activations.
  std::pair<Tensor, ActivationTrace> forward_with_taps(const Tensor& x, std::span<const std::size_t> taps) const;
  Tensor logits(const Tensor& x) const;
  std::vector<std::uint32_t> predict(const Tensor& x) const;

  Checkpoint to_checkpoint() const;
  static Classifier from_checkpoint(const Checkpoint& ckpt);

 private:
  void build_layers();

  ModelConfig config_;
  std::vector<Layer> layers_;
  std::vector<Var> weights_;
  std::vector<std::string> weight_names_;
};

// Per-sample -log softmax(logits)[label] for logits [B,K]; shape [B].
Var cross_entropy(const Var& logits, std::span<const std::uint32_t> labels);

struct TrainHyper {
  std::size_t epochs = 3;
  std::size_t batch_size = 64;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  std::uint64_t seed = 0;
  // Optional cap on optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
};

struct EpochStats {
  std::size_t epoch;
  double loss;
  double accuracy;
  double heldout_accuracy;  // negative when no held-out set was given
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  double final_step_loss = 0.0;
};

// Minibatch SGD with momentum on mean cross-entropy. Throws DivergenceError
// when the loss becomes non-finite.
TrainLog train_classifier(Classifier& model, const Dataset& data, const TrainHyper& hyper,
                          const Dataset* heldout = nullptr,
                          const std::function<void(const EpochStats&)>& on_epoch = {});

double accuracy(const Classifier& model, const Dataset& data, std::size_t batch_size = 256);

}  // namespace lrdet
