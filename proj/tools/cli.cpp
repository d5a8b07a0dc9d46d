#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "lrdet/advfile.hpp"
#include "lrdet/checkpoint.hpp"
#include "lrdet/dataset.hpp"
#include "lrdet/errors.hpp"
#include "lrdet/eval.hpp"

namespace lrdet::cli {
namespace {

using nlohmann::json;

std::string default_data_dir() {
  if (const char* env = std::getenv("LR_DATA_DIR"); env && *env) return env;
  return LRDET_DATA_DIR;
}

// Shared flag values. Each subcommand registers the subset it uses.
struct Args {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string data = default_data_dir();

  // classifier
  std::string arch = "small_cnn";
  std::string out;
  std::size_t epochs = 8;
  std::size_t batch = 64;
  float lr = 0.05f;
  float momentum = 0.9f;
  std::size_t max_train = 0;

  // detector
  std::string model;
  std::string detector;
  std::string order = "fixed";
  std::size_t taps = kDefaultTapCount;
  double fraction = kDefaultSliceFraction;
  std::size_t det_epochs = 10;
  std::size_t det_batch = 128;
  float det_lr = 3e-4f;
  std::size_t hidden = 0;

  // attack
  std::string attack = "pgd";
  float eps = 8.0f;  // 0-255 scale
  float step = 0.0f;
  std::size_t steps = 0;
  std::string norm = "linf";
  bool targeted = false;
  std::string random_start = "auto";
  float lambda = 1.0f;
  std::string adaptive_order = "fixed";

  // evaluation
  std::string split = "test";
  std::size_t max_samples = 0;
  std::vector<std::string> baselines{"bit_reduce:1", "median_smooth:3"};
  bool conjecture = false;
  std::size_t timing = 0;
  std::string csv;
  std::string report;
  std::vector<float> eps_list{4, 8, 16, 32, 64, 128};
  std::size_t samples = 1000;
  std::size_t reps = 1;
  std::string adv;
};

void add_common(CLI::App* app, Args& a) {
  app->add_option("--config", a.config, "JSON file of flag values; flags given on the command line win");
  app->add_option("--seed", a.seed, "Root seed for every random stream");
  app->add_option("--threads", a.threads, "Worker cap for parallel stages")->check(CLI::PositiveNumber);
}

void add_data(CLI::App* app, Args& a) {
  app->add_option("--data", a.data, "Directory holding the IDX files (default $LR_DATA_DIR)");
}

void add_attack(CLI::App* app, Args& a) {
  app->add_option("--attack", a.attack, "fgsm | bim | pgd | apgd_s | adaptive_pgd");
  app->add_option("--eps", a.eps, "Budget on the 0-255 pixel scale");
  app->add_option("--step", a.step, "Step size on the 0-255 scale (0 = per-attack default)");
  app->add_option("--steps", a.steps, "Iterations (0 = per-attack default)");
  app->add_option("--norm", a.norm, "linf | l2");
  app->add_flag("--targeted", a.targeted, "Attack toward a seeded random class");
  app->add_option("--random-start", a.random_start, "auto | on | off");
  app->add_option("--lambda", a.lambda, "Detector-loss weight for adaptive_pgd");
  app->add_option("--adaptive-order", a.adaptive_order, "fixed | randomized segment order seen by adaptive_pgd");
}

void add_eval(CLI::App* app, Args& a) {
  app->add_option("--split", a.split, "train | test");
  app->add_option("--max-samples", a.max_samples, "Use the first N samples of the split (0 = all)");
  app->add_option("--baselines", a.baselines, "Mismatch baselines, e.g. bit_reduce:1 median_smooth:3")->delimiter(',');
}

AttackConfig attack_from(const Args& a) {
  AttackConfig cfg = default_attack(parse_attack_kind(a.attack), a.eps / 255.0f, derive_seed(a.seed, "attack"));
  if (a.steps > 0) cfg.steps = a.steps;
  if (a.step > 0) cfg.step_size = a.step / 255.0f;
  cfg.norm = parse_norm(a.norm);
  cfg.targeted = a.targeted;
  if (a.random_start == "on") {
    cfg.random_start = true;
  } else if (a.random_start == "off") {
    cfg.random_start = false;
  } else if (a.random_start != "auto") {
    throw PreconditionError("--random-start must be auto, on or off, got '" + a.random_start + "'");
  }
  cfg.lambda = a.lambda;
  if (a.adaptive_order == "fixed") {
    cfg.adaptive_order = AdaptiveOrder::fixed;
  } else if (a.adaptive_order == "randomized") {
    cfg.adaptive_order = AdaptiveOrder::randomized;
  } else {
    throw PreconditionError("--adaptive-order must be fixed or randomized, got '" + a.adaptive_order + "'");
  }
  cfg.validate();
  return cfg;
}

TransformSpec parse_baseline(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  int param = 0;
  if (colon != std::string::npos) {
    try {
      param = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw PreconditionError("bad baseline parameter in '" + text + "'");
    }
  }
  TransformSpec spec;
  if (kind == "bit_reduce") {
    spec = TransformSpec::bit_reduce(colon == std::string::npos ? 1 : param);
  } else if (kind == "median_smooth") {
    spec = TransformSpec::median_smooth(colon == std::string::npos ? 3 : param);
  } else {
    throw PreconditionError("unknown baseline '" + kind + "' (expected bit_reduce or median_smooth)");
  }
  spec.validate();
  return spec;
}

std::vector<TransformSpec> baselines_from(const Args& a) {
  std::vector<TransformSpec> out;
  for (const auto& b : a.baselines)
    if (!b.empty()) out.push_back(parse_baseline(b));
  return out;
}

Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw PreconditionError("--split must be train or test, got '" + s + "'");
}

Dataset load_split(const Args& a, Split split) { return load_idx_dir(a.data, split); }

Classifier load_model(const Args& a) {
  if (a.model.empty()) throw PreconditionError("--model is required");
  return Classifier::from_checkpoint(load_checkpoint(a.model));
}

Detector load_detector(const Args& a, const Classifier& model) {
  if (a.detector.empty()) throw PreconditionError("--detector is required");
  Detector det = Detector::from_checkpoint(load_checkpoint(a.detector));
  det.check_compatible(model);
  return det;
}

EvalOptions eval_options(const Args& a) {
  EvalOptions opt;
  opt.sets.max_samples = a.max_samples;
  opt.sets.threads = a.threads;
  opt.baselines = baselines_from(a);
  opt.conjecture = a.conjecture;
  opt.timing_samples = a.timing;
  return opt;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed for " + path);
}

void emit_json(const Args& a, const json& j, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (!a.report.empty()) write_text(a.report, text);
  out << text;
}

// Applies values from --config to options not given on the command line.
void merge_config(CLI::App* sub, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw ConfigError("unknown config key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    std::vector<std::string> items;
    if (value.is_array()) {
      for (const auto& v : value) items.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      items.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
    for (const auto& item : items) opt->add_result(item);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

// Option value as a JSON number when the option is numeric, else as a string.
json typed_value(const CLI::Option* opt, const std::string& v) {
  const std::string type = opt->get_type_name();
  try {
    std::size_t used = 0;
    if (type.starts_with("INT")) {
      const long long n = std::stoll(v, &used);
      if (used == v.size()) return n;
    } else if (type.starts_with("UINT")) {
      const unsigned long long n = std::stoull(v, &used);
      if (used == v.size()) return n;
    } else if (type.starts_with("FLOAT")) {
      const double n = std::stod(v, &used);
      if (used == v.size()) return n;
    }
  } catch (const std::exception&) {
  }
  return v;
}

json resolved_config(const CLI::App* sub) {
  json j;
  j["command"] = sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    const bool is_flag = opt->get_expected_min() == 0;
    const bool is_list = opt->get_expected_max() > 1;
    if (is_flag) {
      const auto& values = opt->results();
      j[name] = opt->count() > 0 && (values.empty() || values.back() != "false");
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (opt->count() == 0) {
      std::string d = opt->get_default_str();
      values.clear();
      if (is_list && d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
      if (is_list) {
        std::stringstream ss(d);
        for (std::string item; std::getline(ss, item, ',');)
          if (!item.empty()) values.push_back(item);
      } else {
        values.push_back(d);
      }
    }
    if (!is_list) {
      j[name] = values.empty() ? json("") : typed_value(opt, values.back());
    } else {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(typed_value(opt, v));
      j[name] = arr;
    }
  }
  return j;
}

// ---- subcommands ------------------------------------------------------------

void cmd_train_model(const Args& a, std::ostream& out, std::ostream& err) {
  if (a.out.empty()) throw PreconditionError("--out is required");
  Dataset train = load_split(a, Split::train);
  if (a.max_train) train = train.head(a.max_train);
  const Dataset test = load_split(a, Split::test);
  const Architecture arch = parse_architecture(a.arch);
  ModelConfig mc = arch == Architecture::mlp ? ModelConfig::mlp() : ModelConfig::small_cnn();
  LRDET_REQUIRE(train.sample_shape == mc.input_shape, "dataset samples " + shape_str(train.sample_shape) +
                                                          " do not match model input " + shape_str(mc.input_shape));
  Classifier model(mc, derive_seed(a.seed, "model-init"));
  TrainHyper hyper;
  hyper.epochs = a.epochs;
  hyper.batch_size = a.batch;
  hyper.learning_rate = a.lr;
  hyper.momentum = a.momentum;
  hyper.seed = derive_seed(a.seed, "model-train");
  json epochs = json::array();
  train_classifier(model, train, hyper, &test, [&](const EpochStats& e) {
    err << "epoch " << e.epoch << " loss " << e.loss << " train_acc " << e.accuracy << " test_acc "
        << e.heldout_accuracy << "\n";
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.accuracy},
                      {"test_accuracy", e.heldout_accuracy}});
  });
  save_checkpoint(a.out, model.to_checkpoint());
  const double acc = accuracy(model, test);
  err << "accuracy " << acc << "\n";
  emit_json(a, {{"checkpoint", a.out}, {"arch", a.arch}, {"test_accuracy", acc}, {"epochs", epochs}}, out);
}

void cmd_train_detector(const Args& a, std::ostream& out, std::ostream& err) {
  if (a.out.empty()) throw PreconditionError("--out is required");
  const Classifier model = load_model(a);
  Dataset train = load_split(a, Split::train);
  if (a.max_train) train = train.head(a.max_train);
  const TapSpec spec =
      make_tap_spec(model, a.taps, a.fraction, parse_order_policy(a.order), derive_seed(a.seed, "tap-spec"));
  RegressorHyper hyper;
  hyper.epochs = a.det_epochs;
  hyper.batch_size = a.det_batch;
  hyper.learning_rate = a.det_lr;
  hyper.hidden = a.hidden;
  hyper.seed = derive_seed(a.seed, "regressor");
  json epochs = json::array();
  const Detector det = train_regressor(model, spec, train, hyper, [&](const RegressorEpoch& e) {
    err << "epoch " << e.epoch << " mse " << e.mse << "\n";
    epochs.push_back({{"epoch", e.epoch}, {"mse", e.mse}});
  });
  save_checkpoint(a.out, det.to_checkpoint());
  json slices = json::array();
  for (const auto& s : spec.slices) slices.push_back({s.start, s.end});
  emit_json(a,
            {{"checkpoint", a.out},
             {"tap_layers", spec.layers},
             {"slice_bounds", slices},
             {"order_policy", to_string(spec.order)},
             {"input_dim", spec.input_dim()},
             {"epochs", epochs}},
            out);
}

void cmd_gen_adv(const Args& a, std::ostream& out, std::ostream& err) {
  if (a.out.empty()) throw PreconditionError("--out is required");
  const Classifier model = load_model(a);
  const AttackConfig cfg = attack_from(a);
  std::optional<Detector> det;
  if (cfg.kind == AttackKind::adaptive_pgd) det.emplace(load_detector(a, model));
  const Dataset data = load_split(a, split_from(a.split));
  SetOptions so;
  so.max_samples = a.max_samples;
  so.threads = a.threads;
  const EvalSets sets = build_eval_sets(model, cfg, data, det ? &*det : nullptr, so);
  std::vector<AdvRecord> records;
  const Shape sample(sets.clean_x.shape().begin() + 1, sets.clean_x.shape().end());
  const auto preds = sets.adv_count() ? model.predict(sets.adv_x) : std::vector<std::uint32_t>{};
  for (std::size_t i = 0; i < sets.adv_count(); ++i) {
    const std::size_t src = sets.adv_source[i];
    records.push_back({sets.adv_labels[i], preds[i], sets.clean_x.rows(src, src + 1).reshaped(sample),
                       sets.adv_x.rows(i, i + 1).reshaped(sample)});
  }
  save_adv(a.out, records);
  err << "attacked " << sets.attacked << " kept " << records.size() << "\n";
  emit_json(a,
            {{"file", a.out},
             {"dataset", sets.dataset_size},
             {"clean", sets.clean_count()},
             {"adversarial", sets.adv_count()},
             {"attack_success_rate", sets.success_rate}},
            out);
}

void cmd_eval(const Args& a, std::ostream& out, std::ostream& err) {
  const Classifier model = load_model(a);
  const Detector det = load_detector(a, model);
  const Dataset data = load_split(a, split_from(a.split));
  const EvalOptions opt = eval_options(a);
  std::vector<ScoredSets> raw;
  const EvalReport report = evaluate(model, det, attack_from(a), data, opt, a.csv.empty() ? nullptr : &raw);
  if (!a.csv.empty()) {
    std::vector<NamedScorer> names{{"lr", nullptr}};
    for (const auto& b : opt.baselines) names.push_back({b.name(), nullptr});
    write_text(a.csv, scores_csv(names, raw));
  }
  err << report.to_text();
  emit_json(a, report.to_json(), out);
}

void cmd_sweep(const Args& a, std::ostream& out, std::ostream& err) {
  const Classifier model = load_model(a);
  const Detector det = load_detector(a, model);
  const Dataset data = load_split(a, split_from(a.split));
  std::vector<float> eps;
  for (float e : a.eps_list) eps.push_back(e / 255.0f);
  const auto rows = epsilon_sweep(model, det, attack_from(a), data, eps, eval_options(a));
  err << sweep_table(rows);
  json j = json::array();
  for (const auto& r : rows) j.push_back({{"epsilon_255", r.epsilon * 255.0f}, {"report", r.report.to_json()}});
  emit_json(a, j, out);
}

void cmd_bench(const Args& a, std::ostream& out, std::ostream& err) {
  const Classifier model = load_model(a);
  const Detector det = load_detector(a, model);
  const Dataset data = load_split(a, split_from(a.split));
  LRDET_REQUIRE(a.samples > 0, "--samples must be positive");
  const Dataset subset = data.head(std::min(a.samples, data.size()));
  std::vector<std::size_t> idx(subset.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor xs = subset.batch(idx);
  Rng order_rng(derive_seed(a.seed, "bench-order"));
  json rows = json::array();
  auto record = [&](const std::string& name, const std::function<void(const Tensor&)>& fn) {
    const TimingResult t = timing_bench(fn, xs, a.reps);
    err << name << " " << t.mean_seconds << " s/sample (std " << t.std_seconds << ")\n";
    rows.push_back({{"name", name}, {"pts_seconds", t.mean_seconds}, {"std_seconds", t.std_seconds}});
    return t.mean_seconds;
  };
  const double fwd = record("forward", [&](const Tensor& x) { model.logits(x); });
  const double lr = record("lr", [&](const Tensor& x) { det.score(model, x, &order_rng); });
  for (const auto& b : baselines_from(a)) record(b.name(), [&](const Tensor& x) { mismatch_score(model, x, b); });
  emit_json(a, {{"samples", xs.dim(0)}, {"repetitions", a.reps}, {"lr_over_forward", lr / fwd}, {"timings", rows}},
            out);
}

json stats_json(const ConjectureStats& c) {
  auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.stddev}}; };
  return {{"pairs", c.pairs},
          {"skipped", c.skipped},
          {"d_first", ms(c.d_first)},
          {"d_feature", ms(c.d_feature)},
          {"err_clean", ms(c.err_clean)},
          {"err_adv", ms(c.err_adv)},
          {"d_diff", ms(c.d_diff)},
          {"err_diff", ms(c.err_diff)},
          {"d_diff_stderr", c.d_diff_stderr()},
          {"err_diff_stderr", c.err_diff_stderr()},
          {"d_violations", c.d_violations},
          {"err_violations", c.err_violations}};
}

void cmd_stats(const Args& a, std::ostream& out, std::ostream& err) {
  const Classifier model = load_model(a);
  const Detector det = load_detector(a, model);
  Tensor clean, adv;
  if (!a.adv.empty()) {
    const auto records = load_adv(a.adv);
    LRDET_REQUIRE(!records.empty(), a.adv + " holds no adversarial pairs");
    std::vector<Tensor> xs, ys;
    for (const auto& r : records) {
      xs.push_back(r.x);
      ys.push_back(r.x_adv);
    }
    clean = stack(xs);
    adv = stack(ys);
  } else {
    SetOptions so;
    so.max_samples = a.max_samples;
    so.threads = a.threads;
    const AttackConfig cfg = attack_from(a);
    const EvalSets sets =
        build_eval_sets(model, cfg, load_split(a, split_from(a.split)), &det, so);
    LRDET_REQUIRE(sets.adv_count() > 0, "the attack produced no successful adversarial samples");
    clean = sets.paired_clean();
    adv = sets.adv_x;
  }
  const ConjectureStats c = conjecture_stats(model, det, clean, adv);
  err << "pairs " << c.pairs << "  d_1 " << c.d_first.mean << "  d_n-1 " << c.d_feature.mean << "  e_c "
      << c.err_clean.mean << "  e_a " << c.err_adv.mean << "\n";
  emit_json(a, stats_json(c), out);
}

void cmd_adaptive(const Args& a, std::ostream& out, std::ostream& err) {
  const Classifier model = load_model(a);
  const Detector det = load_detector(a, model);
  const Dataset data = load_split(a, split_from(a.split));
  const EvalOptions opt = eval_options(a);
  Args static_args = a;
  static_args.attack = "pgd";
  static_args.steps = 0;
  const EvalReport base = evaluate(model, det, attack_from(static_args), data, opt);
  Args adaptive_args = a;
  adaptive_args.attack = "adaptive_pgd";
  const EvalReport adaptive = evaluate(model, det, attack_from(adaptive_args), data, opt);
  err << "static pgd\n" << base.to_text() << "adaptive pgd\n" << adaptive.to_text();
  emit_json(a, {{"static", base.to_json()}, {"adaptive", adaptive.to_json()}}, out);
}

struct Command {
  CLI::App* app;
  void (*run)(const Args&, std::ostream&, std::ostream&);
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Layer regression adversarial-example detector toolkit", "lrdet"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  std::map<std::string, Command> commands;

  auto* tm = app.add_subcommand("train-model", "Train a target classifier");
  add_common(tm, a);
  add_data(tm, a);
  tm->add_option("--arch", a.arch, "mlp | small_cnn");
  tm->add_option("--out", a.out, "Checkpoint path to write");
  tm->add_option("--epochs", a.epochs);
  tm->add_option("--batch", a.batch);
  tm->add_option("--lr", a.lr);
  tm->add_option("--momentum", a.momentum);
  tm->add_option("--max-train", a.max_train, "Use the first N training samples (0 = all)");
  commands["train-model"] = {tm, cmd_train_model};

  auto* td = app.add_subcommand("train-detector", "Fit the layer regression detector on clean data");
  add_common(td, a);
  add_data(td, a);
  td->add_option("--model", a.model, "Classifier checkpoint");
  td->add_option("--out", a.out, "Detector checkpoint path to write");
  td->add_option("--order", a.order, "fixed | randomized segment order");
  td->add_option("--taps", a.taps, "Number of tapped layers");
  td->add_option("--fraction", a.fraction, "Middle fraction kept from each tapped layer");
  td->add_option("--epochs", a.det_epochs);
  td->add_option("--batch", a.det_batch);
  td->add_option("--lr", a.det_lr);
  td->add_option("--hidden", a.hidden, "Hidden width (0 = max(256, feature size))");
  td->add_option("--max-train", a.max_train, "Use the first N training samples (0 = all)");
  commands["train-detector"] = {td, cmd_train_detector};

  auto* ga = app.add_subcommand("gen-adv", "Attack correctly classified samples and save successes");
  add_common(ga, a);
  add_data(ga, a);
  add_attack(ga, a);
  ga->add_option("--split", a.split, "train | test");
  ga->add_option("--max-samples", a.max_samples);
  ga->add_option("--model", a.model, "Classifier checkpoint");
  ga->add_option("--detector", a.detector, "Detector checkpoint (adaptive_pgd only)");
  ga->add_option("--out", a.out, "LRADV1 file to write");
  commands["gen-adv"] = {ga, cmd_gen_adv};

  auto* ev = app.add_subcommand("eval", "AUROC of LR and baselines for one attack");
  add_common(ev, a);
  add_data(ev, a);
  add_attack(ev, a);
  add_eval(ev, a);
  ev->add_option("--model", a.model, "Classifier checkpoint");
  ev->add_option("--detector", a.detector, "Detector checkpoint");
  ev->add_flag("--conjecture", a.conjecture, "Add layer-change and regression-error statistics");
  ev->add_option("--timing", a.timing, "Time each detector over N clean samples (0 = off)");
  ev->add_option("--csv", a.csv, "Write raw scores to this CSV file");
  ev->add_option("--report", a.report, "Also write the JSON report here");
  commands["eval"] = {ev, cmd_eval};

  auto* sw = app.add_subcommand("sweep-eps", "AUROC across attack budgets");
  add_common(sw, a);
  add_data(sw, a);
  add_attack(sw, a);
  add_eval(sw, a);
  sw->add_option("--model", a.model, "Classifier checkpoint");
  sw->add_option("--detector", a.detector, "Detector checkpoint");
  sw->add_option("--eps-list", a.eps_list, "Budgets on the 0-255 scale")->delimiter(',');
  sw->add_option("--report", a.report, "Also write the JSON report here");
  commands["sweep-eps"] = {sw, cmd_sweep};

  auto* be = app.add_subcommand("bench", "Per-sample processing time of each detector");
  add_common(be, a);
  add_data(be, a);
  be->add_option("--model", a.model, "Classifier checkpoint");
  be->add_option("--detector", a.detector, "Detector checkpoint");
  be->add_option("--split", a.split, "train | test");
  be->add_option("--samples", a.samples, "Samples timed one at a time");
  be->add_option("--reps", a.reps, "Timed passes after the warm-up pass");
  be->add_option("--baselines", a.baselines)->delimiter(',');
  be->add_option("--report", a.report, "Also write the JSON report here");
  commands["bench"] = {be, cmd_bench};

  auto* st = app.add_subcommand("stats", "Layer-change and regression-error statistics over attack pairs");
  add_common(st, a);
  add_data(st, a);
  add_attack(st, a);
  st->add_option("--split", a.split, "train | test");
  st->add_option("--max-samples", a.max_samples);
  st->add_option("--model", a.model, "Classifier checkpoint");
  st->add_option("--detector", a.detector, "Detector checkpoint");
  st->add_option("--adv", a.adv, "LRADV1 file of pairs (otherwise attack the split)");
  st->add_option("--report", a.report, "Also write the JSON report here");
  commands["stats"] = {st, cmd_stats};

  auto* ad = app.add_subcommand("adaptive-eval", "Static PGD vs detector-aware PGD on one detector");
  add_common(ad, a);
  add_data(ad, a);
  add_attack(ad, a);
  add_eval(ad, a);
  ad->add_option("--model", a.model, "Classifier checkpoint");
  ad->add_option("--detector", a.detector, "Detector checkpoint");
  ad->add_option("--report", a.report, "Also write the JSON report here");
  commands["adaptive-eval"] = {ad, cmd_adaptive};

  // Unknown or missing commands get the usage text and exit 64.
  if (argc < 2) {
    err << app.help();
    return kExitUsage;
  }
  const std::string first = argv[1];
  if (!first.empty() && first[0] != '-' && !commands.count(first)) {
    err << "unknown command '" << first << "'\n" << app.help();
    return kExitUsage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    for (const auto& [name, cmd] : commands)
      if (cmd.app->parsed()) {
        out << cmd.app->help();
        return kExitOk;
      }
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::RequiredError& e) {
    err << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitPrecondition;
  }

  for (const auto& [name, cmd] : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      if (!a.config.empty()) merge_config(cmd.app, a.config);
      err << "config " << resolved_config(cmd.app).dump() << "\n";
      cmd.run(a, out, err);
      return kExitOk;
    } catch (const IoError& e) {
      err << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitPrecondition;
    }
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace lrdet::cli
