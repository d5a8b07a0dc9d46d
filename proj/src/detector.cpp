#include "lrdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "lrdet/errors.hpp"
#include "lrdet/ops.hpp"

namespace lrdet {

std::string to_string(OrderPolicy policy) { return policy == OrderPolicy::fixed ? "fixed" : "randomized"; }

OrderPolicy parse_order_policy(const std::string& name) {
  if (name == "fixed") return OrderPolicy::fixed;
  if (name == "randomized") return OrderPolicy::randomized;
  throw PreconditionError("unknown order policy '" + name + "' (expected fixed or randomized)");
}

std::size_t TapSpec::input_dim() const {
  std::size_t total = 0;
  for (const auto& s : slices) total += s.size();
  return total;
}

std::vector<std::size_t> TapSpec::segment_offsets() const {
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& s : slices) {
    offsets.push_back(at);
    at += s.size();
  }
  return offsets;
}

std::vector<std::size_t> select_layers(std::size_t n_layers, std::size_t m, Rng& rng) {
  LRDET_REQUIRE(n_layers >= 5, "select_layers needs at least 5 layers, got " + std::to_string(n_layers));
  const std::size_t lo = n_layers / 5;
  const std::size_t hi = 4 * n_layers / 5;
  LRDET_REQUIRE(m >= 1 && m <= hi - lo, "select_layers: cannot pick " + std::to_string(m) + " layers from [" +
                                            std::to_string(lo) + "," + std::to_string(hi) + ")");
  std::vector<std::size_t> candidates(hi - lo);
  std::iota(candidates.begin(), candidates.end(), lo);
  // Partial Fisher-Yates: the first m entries are a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
  candidates.resize(m);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

SliceBounds middle_slice(std::size_t length, double fraction) {
  LRDET_REQUIRE(fraction > 0.0 && fraction <= 1.0, "slice fraction must lie in (0,1], got " + std::to_string(fraction));
  // The epsilon keeps products such as 0.6 * 10 from landing just below an integer.
  const auto start = static_cast<std::size_t>(std::floor((1.0 - fraction) / 2.0 * static_cast<double>(length) + 1e-9));
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length) + 1e-9));
  LRDET_REQUIRE(count >= 1, "slice of length " + std::to_string(length) + " at fraction " + std::to_string(fraction) +
                                " is empty");
  return {start, start + count};
}

std::vector<float> slice_middle(std::span<const float> activation, double fraction) {
  const SliceBounds b = middle_slice(activation.size(), fraction);
  return {activation.begin() + static_cast<std::ptrdiff_t>(b.start), activation.begin() + static_cast<std::ptrdiff_t>(b.end)};
}

TapSpec make_tap_spec(const Classifier& model, std::size_t m, double fraction, OrderPolicy order, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "layer-selection"));
  TapSpec spec;
  spec.layers = select_layers(model.num_layers(), m, rng);
  for (auto layer : spec.layers) spec.slices.push_back(middle_slice(model.layer_size(layer), fraction));
  spec.order = order;
  spec.order_seed = derive_seed(seed, "concat-order");
  return spec;
}

namespace {

const Tensor& trace_at(const ActivationTrace& trace, std::size_t layer) {
  auto it = trace.find(layer);
  LRDET_REQUIRE(it != trace.end(), "activation trace is missing tap " + std::to_string(layer));
  return it->second;
}

// Rearranges fixed-order rows of `v` so segment k of the output is segment
// perm[k] of the input.
void permute_segments(const float* src, float* dst, const TapSpec& spec, const std::vector<std::size_t>& offsets,
                      std::span<const std::size_t> perm) {
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const std::size_t seg = perm[k];
    const std::size_t len = spec.slices[seg].size();
    dst = std::copy_n(src + offsets[seg], len, dst);
  }
}

}  // namespace

Tensor build_input_vectors(const ActivationTrace& trace, const TapSpec& spec, Rng* rng) {
  LRDET_REQUIRE(!spec.layers.empty() && spec.layers.size() == spec.slices.size(), "malformed tap spec");
  const std::size_t batch = trace_at(trace, spec.layers[0]).dim(0);
  const std::size_t dim = spec.input_dim();
  Tensor fixed(Shape{batch, dim});
  std::size_t offset = 0;
  for (std::size_t s = 0; s < spec.layers.size(); ++s) {
    const Tensor& a = trace_at(trace, spec.layers[s]);
    LRDET_REQUIRE(a.dim(0) == batch, "tap batch sizes disagree");
    const std::size_t row = a.row_size();
    const SliceBounds& b = spec.slices[s];
    LRDET_REQUIRE(b.start < b.end && b.end <= row, "slice [" + std::to_string(b.start) + "," + std::to_string(b.end) +
                                                       ") exceeds layer " + std::to_string(spec.layers[s]) + " of size " +
                                                       std::to_string(row));
    for (std::size_t i = 0; i < batch; ++i)
      std::copy_n(a.data().data() + i * row + b.start, b.size(), fixed.data().data() + i * dim + offset);
    offset += b.size();
  }
  if (spec.order == OrderPolicy::fixed || spec.layers.size() == 1) return fixed;

  LRDET_REQUIRE(rng != nullptr, "randomized concatenation needs a random stream");
  const auto offsets = spec.segment_offsets();
  Tensor out(Shape{batch, dim});
  for (std::size_t i = 0; i < batch; ++i) {
    const auto perm = rng->permutation(spec.layers.size());
    permute_segments(fixed.data().data() + i * dim, out.data().data() + i * dim, spec, offsets, perm);
  }
  return out;
}

Var build_input_var(const std::map<std::size_t, Var>& taps, const TapSpec& spec, std::span<const std::size_t> order) {
  std::vector<std::size_t> seq(spec.layers.size());
  std::iota(seq.begin(), seq.end(), std::size_t{0});
  if (!order.empty()) {
    LRDET_REQUIRE(order.size() == seq.size(), "segment order has wrong length");
    seq.assign(order.begin(), order.end());
  }
  std::vector<Var> parts;
  for (auto s : seq) {
    LRDET_REQUIRE(s < spec.layers.size(), "segment order entry out of range");
    auto it = taps.find(spec.layers[s]);
    LRDET_REQUIRE(it != taps.end(), "missing tap " + std::to_string(spec.layers[s]));
    parts.push_back(ops::slice_cols(ops::flatten(it->second), spec.slices[s].start, spec.slices[s].end));
  }
  return parts.size() == 1 ? parts[0] : ops::concat_cols(parts);
}

std::size_t default_hidden_width(std::size_t output_dim) { return std::max<std::size_t>(256, output_dim); }

Regressor::Regressor(std::size_t input_dim, std::size_t hidden, std::size_t output_dim, std::uint64_t init_seed)
    : input_dim_(input_dim), hidden_(hidden), output_dim_(output_dim) {
  LRDET_REQUIRE(input_dim > 0 && hidden > 0 && output_dim > 0, "regressor dimensions must be positive");
  Rng rng(init_seed);
  const std::size_t fan_in[3] = {input_dim, hidden, hidden};
  const std::size_t fan_out[3] = {hidden, hidden, output_dim};
  for (int l = 0; l < 3; ++l) {
    Tensor w(Shape{fan_in[l], fan_out[l]});
    const float gain = l < 2 ? 2.0f : 1.0f;
    const float stddev = std::sqrt(gain / static_cast<float>(fan_in[l]));
    for (float& v : w.data()) v = stddev * rng.normal();
    weights_.emplace_back(std::move(w));
    weights_.emplace_back(Tensor(Shape{fan_out[l]}));
  }
}

void Regressor::set_weight(std::size_t i, Tensor value) {
  LRDET_REQUIRE(i < weights_.size() && value.shape() == weights_[i].shape(), "regressor weight shape mismatch");
  weights_[i] = Var(std::move(value));
}

Var Regressor::forward(const Var& v, std::span<const Var> p) const {
  LRDET_REQUIRE(p.size() == 6, "regressor expects 6 parameter tensors");
  LRDET_REQUIRE(v.value().rank() == 2 && v.value().dim(1) == input_dim_,
                "regressor input " + shape_str(v.shape()) + " does not match input_dim " + std::to_string(input_dim_));
  Var h = ops::relu(ops::linear(v, p[0], p[1]));
  h = ops::relu(ops::linear(h, p[2], p[3]));
  return ops::linear(h, p[4], p[5]);
}

Detector::Detector(TapSpec spec, Regressor regressor, std::size_t target_layer)
    : spec_(std::move(spec)), regressor_(std::move(regressor)), target_layer_(target_layer) {
  LRDET_REQUIRE(!spec_.layers.empty() && spec_.layers.size() == spec_.slices.size(), "malformed tap spec");
  for (auto l : spec_.layers)
    LRDET_REQUIRE(l >= 1 && l < target_layer_, "tap layer " + std::to_string(l) + " is not below the feature layer " +
                                                   std::to_string(target_layer_));
  LRDET_REQUIRE(std::is_sorted(spec_.layers.begin(), spec_.layers.end()) &&
                    std::adjacent_find(spec_.layers.begin(), spec_.layers.end()) == spec_.layers.end(),
                "tap layers must be distinct and sorted");
  LRDET_REQUIRE(regressor_.input_dim() == spec_.input_dim(), "regressor input does not match tap spec");
}

void Detector::check_compatible(const Classifier& model) const {
  if (target_layer_ != model.feature_layer())
    throw ConfigError("detector targets layer " + std::to_string(target_layer_) + " but the model's feature layer is " +
                      std::to_string(model.feature_layer()));
  if (regressor_.output_dim() != model.layer_size(target_layer_))
    throw ConfigError("detector predicts " + std::to_string(regressor_.output_dim()) +
                      " features, model feature vector has " + std::to_string(model.layer_size(target_layer_)));
  for (std::size_t s = 0; s < spec_.layers.size(); ++s) {
    if (spec_.slices[s].end > model.layer_size(spec_.layers[s]))
      throw ConfigError("detector slice for layer " + std::to_string(spec_.layers[s]) + " exceeds its size " +
                        std::to_string(model.layer_size(spec_.layers[s])));
  }
}

namespace {

std::vector<std::size_t> with_target(const TapSpec& spec, std::size_t target) {
  std::vector<std::size_t> taps = spec.layers;
  taps.push_back(target);
  return taps;
}

std::vector<float> row_mse(const Tensor& pred, const Tensor& target) {
  const std::size_t rows = pred.dim(0), cols = pred.row_size();
  std::vector<float> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = static_cast<double>(pred[r * cols + c]) - static_cast<double>(target[r * cols + c]);
      acc += d * d;
    }
    out[r] = static_cast<float>(acc / static_cast<double>(cols));
  }
  return out;
}

}  // namespace

std::vector<float> Detector::score(const Classifier& model, const Tensor& x, Rng* order_rng) const {
  check_compatible(model);
  const auto taps = with_target(spec_, target_layer_);
  auto [logits, trace] = model.forward_with_taps(x, taps);
  std::optional<Rng> own;
  if (spec_.order == OrderPolicy::randomized && order_rng == nullptr) order_rng = &own.emplace(spec_.order_seed);
  const Tensor v = build_input_vectors(trace, spec_, order_rng);
  const Tensor pred = regressor_.forward(Var(v)).value();
  const Tensor& feat = trace.at(target_layer_);
  return row_mse(pred, feat.reshaped(Shape{feat.dim(0), feat.row_size()}));
}

Var Detector::score_var(const Classifier& model, const Var& x, std::span<const std::size_t> order) const {
  check_compatible(model);
  return score_from_taps(model.forward(x, required_taps()).taps, order);
}

Var Detector::score_from_taps(const std::map<std::size_t, Var>& taps, std::span<const std::size_t> order) const {
  auto feat = taps.find(target_layer_);
  LRDET_REQUIRE(feat != taps.end(), "missing feature-layer tap " + std::to_string(target_layer_));
  const Var v = build_input_var(taps, spec_, order);
  const Var diff = ops::sub(regressor_.forward(v), ops::flatten(feat->second));
  return ops::row_mean(ops::square(diff));
}

std::vector<std::size_t> Detector::required_taps() const { return with_target(spec_, target_layer_); }

std::pair<Tensor, Tensor> Detector::predict_features(const Classifier& model, const Tensor& x) const {
  check_compatible(model);
  auto [logits, trace] = model.forward_with_taps(x, with_target(spec_, target_layer_));
  TapSpec fixed = spec_;
  fixed.order = OrderPolicy::fixed;
  Tensor pred = regressor_.forward(Var(build_input_vectors(trace, fixed))).value();
  Tensor& feat = trace.at(target_layer_);
  return {std::move(pred), feat.reshaped(Shape{feat.dim(0), feat.row_size()})};
}

Checkpoint Detector::to_checkpoint() const {
  static const char* names[6] = {"regressor.fc1.weight", "regressor.fc1.bias", "regressor.fc2.weight",
                                 "regressor.fc2.bias",   "regressor.out.weight", "regressor.out.bias"};
  Checkpoint ckpt;
  for (std::size_t i = 0; i < 6; ++i) ckpt.tensors.emplace_back(names[i], regressor_.weights()[i].value());
  nlohmann::json slices = nlohmann::json::array();
  for (const auto& s : spec_.slices) slices.push_back({s.start, s.end});
  nlohmann::json meta{{"kind", "detector"},
                      {"tap_layers", spec_.layers},
                      {"slice_bounds", slices},
                      {"order_policy", to_string(spec_.order)},
                      {"order_seed", spec_.order_seed},
                      {"target_layer", target_layer_},
                      {"input_dim", regressor_.input_dim()},
                      {"hidden", regressor_.hidden()},
                      {"output_dim", regressor_.output_dim()}};
  ckpt.metadata = meta.dump();
  return ckpt;
}

Detector Detector::from_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("detector metadata is not valid JSON: ") + e.what());
  }
  if (meta.value("kind", "") != "detector") throw IoError("checkpoint does not hold a detector");
  TapSpec spec;
  spec.layers = meta.at("tap_layers").get<std::vector<std::size_t>>();
  for (const auto& s : meta.at("slice_bounds")) spec.slices.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  spec.order = parse_order_policy(meta.at("order_policy").get<std::string>());
  spec.order_seed = meta.at("order_seed").get<std::uint64_t>();
  Regressor reg(meta.at("input_dim").get<std::size_t>(), meta.at("hidden").get<std::size_t>(),
                meta.at("output_dim").get<std::size_t>(), 0);
  if (ckpt.tensors.size() != 6) throw ConfigError("detector checkpoint must hold 6 tensors");
  for (std::size_t i = 0; i < 6; ++i) reg.set_weight(i, ckpt.tensors[i].second);
  return Detector(std::move(spec), std::move(reg), meta.at("target_layer").get<std::size_t>());
}

Detector train_regressor(const Classifier& model, const TapSpec& spec, const Dataset& clean, const RegressorHyper& hyper,
                         const std::function<void(const RegressorEpoch&)>& on_epoch) {
  LRDET_REQUIRE(clean.size() > 0, "regressor training set is empty");
  LRDET_REQUIRE(hyper.batch_size > 0 && hyper.epochs > 0, "epochs and batch size must be positive");
  const std::size_t target = model.feature_layer();
  const std::size_t out_dim = model.layer_size(target);
  const std::size_t hidden = hyper.hidden ? hyper.hidden : default_hidden_width(out_dim);
  Detector det(spec, Regressor(spec.input_dim(), hidden, out_dim, derive_seed(hyper.seed, "regressor-init")), target);
  det.check_compatible(model);

  // Activations are computed once; the classifier is frozen.
  TapSpec fixed = spec;
  fixed.order = OrderPolicy::fixed;
  const std::size_t n = clean.size(), dim = spec.input_dim();
  std::vector<float> inputs(n * dim), targets(n * out_dim);
  const auto taps = with_target(spec, target);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += 256) {
    const std::size_t end = std::min(n, start + 256);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto [logits, trace] = model.forward_with_taps(clean.batch(idx), taps);
    const Tensor v = build_input_vectors(trace, fixed);
    std::copy(v.data().begin(), v.data().end(), inputs.begin() + static_cast<std::ptrdiff_t>(start * dim));
    const Tensor& f = trace.at(target);
    std::copy(f.data().begin(), f.data().end(), targets.begin() + static_cast<std::ptrdiff_t>(start * out_dim));
  }

  Rng shuffle_rng(derive_seed(hyper.seed, "regressor-shuffle"));
  Rng order_rng(derive_seed(hyper.seed, "regressor-order"));
  const auto offsets = spec.segment_offsets();
  Regressor& reg = det.regressor();
  std::vector<Tensor> m1, m2;
  for (const auto& w : reg.weights()) {
    m1.emplace_back(w.shape());
    m2.emplace_back(w.shape());
  }

  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += hyper.batch_size) {
      if (hyper.max_steps && step >= hyper.max_steps) break;
      const std::size_t end = std::min(n, start + hyper.batch_size);
      const std::size_t b = end - start;
      Tensor vb(Shape{b, dim}), tb(Shape{b, out_dim});
      std::vector<std::size_t> perm;
      if (spec.order == OrderPolicy::randomized) perm = order_rng.permutation(spec.layers.size());
      for (std::size_t i = 0; i < b; ++i) {
        const float* src = inputs.data() + order[start + i] * dim;
        float* dst = vb.data().data() + i * dim;
        if (perm.empty()) {
          std::copy_n(src, dim, dst);
        } else {
          permute_segments(src, dst, spec, offsets, perm);
        }
        std::copy_n(targets.data() + order[start + i] * out_dim, out_dim, tb.data().data() + i * out_dim);
      }

      Tape tape;
      std::vector<Var> params;
      for (const auto& w : reg.weights()) params.push_back(tape.leaf(w.value()));
      Var loss = ops::mean(ops::square(ops::sub(reg.forward(Var(std::move(vb)), params), Var(std::move(tb)))));
      const float lv = loss.value().item();
      if (!std::isfinite(lv))
        throw DivergenceError("regressor training diverged at epoch " + std::to_string(epoch) + " (loss " +
                              std::to_string(lv) + ")");
      const Gradients grads = tape.backward(loss);

      ++step;
      const float bc1 = 1.0f - std::pow(hyper.beta1, static_cast<float>(step));
      const float bc2 = 1.0f - std::pow(hyper.beta2, static_cast<float>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor g = grads.of(params[p]);
        Tensor w = reg.weights()[p].value();
        auto a = m1[p].data();
        auto s = m2[p].data();
        auto wd = w.data();
        for (std::size_t j = 0; j < wd.size(); ++j) {
          a[j] = hyper.beta1 * a[j] + (1.0f - hyper.beta1) * g[j];
          s[j] = hyper.beta2 * s[j] + (1.0f - hyper.beta2) * g[j] * g[j];
          wd[j] -= hyper.learning_rate * (a[j] / bc1) / (std::sqrt(s[j] / bc2) + hyper.adam_eps);
        }
        reg.set_weight(p, std::move(w));
      }
      loss_sum += static_cast<double>(lv) * static_cast<double>(b);
      seen += b;
    }
    if (seen == 0) break;
    if (on_epoch) on_epoch({epoch + 1, loss_sum / static_cast<double>(seen)});
    if (hyper.max_steps && step >= hyper.max_steps) break;
  }
  for (const auto& w : reg.weights())
    if (!w.value().all_finite()) throw DivergenceError("regressor weights became non-finite");
  return det;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

double ConjectureStats::d_diff_stderr() const {
  return pairs ? d_diff.stddev / std::sqrt(static_cast<double>(pairs)) : 0.0;
}

double ConjectureStats::err_diff_stderr() const {
  return pairs ? err_diff.stddev / std::sqrt(static_cast<double>(pairs)) : 0.0;
}

namespace {

double l2(const float* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * a[i];
  return std::sqrt(s);
}

double l2_diff(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

ConjectureStats conjecture_stats(const Classifier& model, const Detector& detector, const Tensor& clean,
                                 const Tensor& adversarial) {
  LRDET_REQUIRE(clean.shape() == adversarial.shape(), "clean/adversarial batches must align: " +
                                                          shape_str(clean.shape()) + " vs " +
                                                          shape_str(adversarial.shape()));
  const std::size_t feat = model.feature_layer();
  const std::size_t taps[2] = {1, feat};
  std::vector<double> d1, dn, ec, ea, dd, de;
  ConjectureStats stats;
  const std::size_t n = clean.dim(0);
  for (std::size_t start = 0; start < n; start += 256) {
    const std::size_t end = std::min(n, start + 256);
    const Tensor xc = clean.rows(start, end), xa = adversarial.rows(start, end);
    auto [lc, tc] = model.forward_with_taps(xc, taps);
    auto [la, ta] = model.forward_with_taps(xa, taps);
    auto [pc, fc] = detector.predict_features(model, xc);
    auto [pa, fa] = detector.predict_features(model, xa);
    const std::size_t s1 = tc.at(1).row_size(), sf = tc.at(feat).row_size();
    for (std::size_t i = 0; i < end - start; ++i) {
      const float* c1 = tc.at(1).data().data() + i * s1;
      const float* a1 = ta.at(1).data().data() + i * s1;
      const float* cf = tc.at(feat).data().data() + i * sf;
      const float* af = ta.at(feat).data().data() + i * sf;
      const double den1 = l2(c1, s1) + l2(a1, s1);
      const double denf = l2(cf, sf) + l2(af, sf);
      if (den1 == 0.0 || denf == 0.0) {
        ++stats.skipped;
        continue;
      }
      const double v1 = l2_diff(a1, c1, s1) / den1;
      const double vf = l2_diff(af, cf, sf) / denf;
      const double e_c = l2_diff(pc.data().data() + i * sf, fc.data().data() + i * sf, sf);
      const double e_a = l2_diff(pa.data().data() + i * sf, fa.data().data() + i * sf, sf);
      d1.push_back(v1);
      dn.push_back(vf);
      ec.push_back(e_c);
      ea.push_back(e_a);
      dd.push_back(vf - v1);
      de.push_back(e_a - e_c);
      stats.d_violations += vf <= v1;
      stats.err_violations += e_a <= e_c;
    }
  }
  stats.pairs = d1.size();
  stats.d_first = mean_std(d1);
  stats.d_feature = mean_std(dn);
  stats.err_clean = mean_std(ec);
  stats.err_adv = mean_std(ea);
  stats.d_diff = mean_std(dd);
  stats.err_diff = mean_std(de);
  return stats;
}

float quantile_threshold(std::span<const float> clean_scores, double q) {
  LRDET_REQUIRE(!clean_scores.empty(), "quantile of empty score set");
  LRDET_REQUIRE(q >= 0.0 && q <= 1.0, "quantile must lie in [0,1]");
  std::vector<float> sorted(clean_scores.begin(), clean_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto pos = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size() - 1, pos == 0 ? 0 : pos - 1)];
}

}  // namespace lrdet
