#include "lrdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "lrdet/errors.hpp"
#include "lrdet/ops.hpp"
#include "lrdet/rng.hpp"

namespace lrdet {

std::string to_string(Architecture arch) { return arch == Architecture::mlp ? "mlp" : "small_cnn"; }

Architecture parse_architecture(const std::string& name) {
  if (name == "mlp") return Architecture::mlp;
  if (name == "small_cnn") return Architecture::small_cnn;
  throw PreconditionError("unknown architecture '" + name + "' (expected mlp or small_cnn)");
}

ModelConfig ModelConfig::mlp() { return {Architecture::mlp, {1, 28, 28}, 10, {256, 128, 96, 64}}; }

ModelConfig ModelConfig::small_cnn() { return {Architecture::small_cnn, {1, 28, 28}, 10, {8, 16, 64}}; }

Classifier::Classifier(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  LRDET_REQUIRE(config_.input_shape.size() == 3, "input shape must be {C,H,W}");
  LRDET_REQUIRE(config_.num_classes >= 2, "need at least two classes");
  build_layers();
  LRDET_REQUIRE(layers_.size() >= 5, "model needs at least 5 layer boundaries, got " + std::to_string(layers_.size()));

  // He-normal for ReLU layers, LeCun-normal for the logit layer; zero biases.
  Rng rng(init_seed);
  for (const auto& layer : layers_) {
    if (layer.param_count == 0) continue;
    Tensor w = weights_[layer.first_param].value();
    const std::size_t fan_in = layer.kind == LayerKind::conv_relu ? w.dim(1) * w.dim(2) * w.dim(3) : w.dim(0);
    const float gain = layer.kind == LayerKind::dense_softmax ? 1.0f : 2.0f;
    const float stddev = std::sqrt(gain / static_cast<float>(fan_in));
    for (float& v : w.data()) v = stddev * rng.normal();
    weights_[layer.first_param] = Var(std::move(w));
  }
}

void Classifier::build_layers() {
  layers_.clear();
  weights_.clear();
  weight_names_.clear();
  auto add_params = [&](Layer& layer, Shape w_shape, std::size_t bias) {
    layer.first_param = weights_.size();
    layer.param_count = 2;
    weights_.emplace_back(Tensor(std::move(w_shape)));
    weights_.emplace_back(Tensor(Shape{bias}));
    weight_names_.push_back(layer.name + ".weight");
    weight_names_.push_back(layer.name + ".bias");
  };

  Shape cur = config_.input_shape;
  auto flat = [&] { return shape_numel(cur); };

  if (config_.architecture == Architecture::small_cnn) {
    LRDET_REQUIRE(config_.hidden.size() == 3, "small_cnn expects hidden = {conv1, conv2, fc}");
    for (std::size_t block = 0; block < 2; ++block) {
      const std::size_t ch = config_.hidden[block];
      Layer conv{LayerKind::conv_relu, "conv" + std::to_string(block + 1), {ch, cur[1], cur[2]}};
      add_params(conv, {ch, cur[0], 3, 3}, ch);
      layers_.push_back(conv);
      cur = conv.out_shape;
      LRDET_REQUIRE(cur[1] % 2 == 0 && cur[2] % 2 == 0, "small_cnn needs even spatial extents before pooling");
      Layer pool{LayerKind::max_pool, "pool" + std::to_string(block + 1), {ch, cur[1] / 2, cur[2] / 2}};
      layers_.push_back(pool);
      cur = pool.out_shape;
    }
    Layer fc{LayerKind::dense_relu, "fc1", {config_.hidden[2]}};
    add_params(fc, {flat(), config_.hidden[2]}, config_.hidden[2]);
    layers_.push_back(fc);
    cur = fc.out_shape;
  } else {
    LRDET_REQUIRE(!config_.hidden.empty(), "mlp expects at least one hidden width");
    for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
      Layer fc{LayerKind::dense_relu, "fc" + std::to_string(i + 1), {config_.hidden[i]}};
      add_params(fc, {flat(), config_.hidden[i]}, config_.hidden[i]);
      layers_.push_back(fc);
      cur = fc.out_shape;
    }
  }
  Layer out{LayerKind::dense_softmax, "out", {config_.num_classes}};
  add_params(out, {flat(), config_.num_classes}, config_.num_classes);
  layers_.push_back(out);
}

std::size_t Classifier::layer_size(std::size_t index) const {
  LRDET_REQUIRE(index >= 1 && index <= layers_.size(), "layer index " + std::to_string(index) + " out of range");
  return shape_numel(layers_[index - 1].out_shape);
}

void Classifier::set_weight(std::size_t i, Tensor value) {
  LRDET_REQUIRE(i < weights_.size(), "weight index out of range");
  LRDET_REQUIRE(value.shape() == weights_[i].shape(), "weight '" + weight_names_[i] + "' shape mismatch: " +
                                                           shape_str(value.shape()) + " vs " +
                                                           shape_str(weights_[i].shape()));
  weights_[i] = Var(std::move(value));
}

Classifier::Forward Classifier::forward(const Var& x, std::span<const Var> params,
                                        std::span<const std::size_t> taps) const {
  LRDET_REQUIRE(params.size() == weights_.size(), "parameter count mismatch");
  Shape expected{0};
  expected.insert(expected.end(), config_.input_shape.begin(), config_.input_shape.end());
  const Shape& got = x.shape();
  LRDET_REQUIRE(got.size() == 4 && std::equal(got.begin() + 1, got.end(), expected.begin() + 1),
                "input shape " + shape_str(got) + " does not match model input [B," +
                    shape_str(config_.input_shape).substr(1));
  std::vector<bool> wanted(layers_.size() + 1, false);
  for (auto t : taps) {
    LRDET_REQUIRE(t >= 1 && t <= layers_.size(),
                  "unknown tap index " + std::to_string(t) + " (model has " + std::to_string(layers_.size()) + " layers)");
    wanted[t] = true;
  }

  Forward result;
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    switch (layer.kind) {
      case LayerKind::conv_relu:
        h = ops::relu(ops::conv2d(h, params[layer.first_param], params[layer.first_param + 1], ops::Padding::same));
        break;
      case LayerKind::max_pool:
        h = ops::max_pool2x2(h);
        break;
      case LayerKind::dense_relu:
        h = ops::relu(ops::linear(ops::flatten(h), params[layer.first_param], params[layer.first_param + 1]));
        break;
      case LayerKind::dense_softmax:
        result.logits = ops::linear(ops::flatten(h), params[layer.first_param], params[layer.first_param + 1]);
        if (wanted[i + 1]) result.taps.emplace(i + 1, ops::softmax(result.logits));
        continue;
    }
    if (wanted[i + 1]) result.taps.emplace(i + 1, h);
  }
  return result;
}

Classifier::Forward Classifier::forward(const Var& x, std::span<const std::size_t> taps) const {
  return forward(x, weights_, taps);
}

std::pair<Tensor, ActivationTrace> Classifier::forward_with_taps(const Tensor& x,
                                                                 std::span<const std::size_t> taps) const {
  Forward f = forward(Var(x), taps);
  ActivationTrace trace;
  for (auto& [idx, v] : f.taps) trace.emplace(idx, v.value());
  return {f.logits.value(), std::move(trace)};
}

Tensor Classifier::logits(const Tensor& x) const { return forward(Var(x)).logits.value(); }

std::vector<std::uint32_t> Classifier::predict(const Tensor& x) const {
  const Tensor z = logits(x);
  const std::size_t k = z.dim(1);
  std::vector<std::uint32_t> out(z.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    const float* row = z.data().data() + r * k;
    out[r] = static_cast<std::uint32_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

Checkpoint Classifier::to_checkpoint() const {
  Checkpoint ckpt;
  for (std::size_t i = 0; i < weights_.size(); ++i) ckpt.tensors.emplace_back(weight_names_[i], weights_[i].value());
  nlohmann::json meta{{"kind", "classifier"},
                      {"architecture", to_string(config_.architecture)},
                      {"input_shape", config_.input_shape},
                      {"num_classes", config_.num_classes},
                      {"hidden", config_.hidden}};
  ckpt.metadata = meta.dump();
  return ckpt;
}

Classifier Classifier::from_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (meta.value("kind", "") != "classifier") throw IoError("checkpoint does not hold a classifier");
  ModelConfig cfg;
  cfg.architecture = parse_architecture(meta.at("architecture").get<std::string>());
  cfg.input_shape = meta.at("input_shape").get<Shape>();
  cfg.num_classes = meta.at("num_classes").get<std::size_t>();
  cfg.hidden = meta.at("hidden").get<std::vector<std::size_t>>();
  Classifier model(cfg, 0);
  if (ckpt.tensors.size() != model.weights_.size())
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                      std::to_string(model.weights_.size()));
  for (std::size_t i = 0; i < model.weights_.size(); ++i) model.set_weight(i, ckpt.get(model.weight_names_[i]));
  return model;
}

Var cross_entropy(const Var& logits, std::span<const std::uint32_t> labels) {
  const std::size_t k = logits.value().dim(1);
  for (auto l : labels)
    LRDET_REQUIRE(l < k, "label " + std::to_string(l) + " out of range for " + std::to_string(k) + " classes");
  return ops::scale(ops::pick(ops::log_softmax(logits), labels), -1.0f);
}

TrainLog train_classifier(Classifier& model, const Dataset& data, const TrainHyper& hyper, const Dataset* heldout,
                          const std::function<void(const EpochStats&)>& on_epoch) {
  LRDET_REQUIRE(data.size() > 0, "training set is empty");
  LRDET_REQUIRE(hyper.batch_size > 0 && hyper.epochs > 0, "epochs and batch size must be positive");
  for (float p : data.pixels) LRDET_REQUIRE(p >= 0.0f && p <= 1.0f, "training pixels must lie in [0,1]");

  Rng rng(derive_seed(hyper.seed, "classifier-shuffle"));
  std::vector<Tensor> velocity;
  for (const auto& w : model.weights()) velocity.emplace_back(w.shape());

  TrainLog log;
  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      if (hyper.max_steps && step >= hyper.max_steps) break;
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto labels = data.batch_labels(idx);

      Tape tape;
      std::vector<Var> params;
      for (const auto& w : model.weights()) params.push_back(tape.leaf(w.value()));
      auto fwd = model.forward(Var(data.batch(idx)), params, {});
      Var loss = ops::mean(cross_entropy(fwd.logits, labels));
      const float lv = loss.value().item();
      if (!std::isfinite(lv))
        throw DivergenceError("classifier training diverged at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step) + " (loss " + std::to_string(lv) + ")");
      const Gradients grads = tape.backward(loss);

      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor g = grads.of(params[i]);
        Tensor w = model.weights()[i].value();
        auto v = velocity[i].data();
        auto wd = w.data();
        for (std::size_t j = 0; j < wd.size(); ++j) {
          v[j] = hyper.momentum * v[j] + g[j];
          wd[j] -= hyper.learning_rate * v[j];
        }
        model.set_weight(i, std::move(w));
      }

      const Tensor& z = fwd.logits.value();
      const std::size_t k = z.dim(1);
      for (std::size_t r = 0; r < labels.size(); ++r) {
        const float* row = z.data().data() + r * k;
        if (static_cast<std::uint32_t>(std::max_element(row, row + k) - row) == labels[r]) ++correct;
      }
      loss_sum += static_cast<double>(lv) * static_cast<double>(labels.size());
      seen += labels.size();
      log.final_step_loss = lv;
      ++step;
    }
    for (const auto& w : model.weights())
      if (!w.value().all_finite()) throw DivergenceError("non-finite weights after epoch " + std::to_string(epoch));

    if (seen == 0) break;
    EpochStats stats{epoch + 1, loss_sum / static_cast<double>(seen), static_cast<double>(correct) / static_cast<double>(seen),
                     heldout ? accuracy(model, *heldout) : -1.0};
    log.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (hyper.max_steps && step >= hyper.max_steps) break;
  }
  return log;
}

double accuracy(const Classifier& model, const Dataset& data, std::size_t batch_size) {
  LRDET_REQUIRE(data.size() > 0, "accuracy on empty dataset");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto pred = model.predict(data.batch(idx));
    for (std::size_t i = 0; i < idx.size(); ++i) correct += pred[i] == data.labels[idx[i]];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lrdet
