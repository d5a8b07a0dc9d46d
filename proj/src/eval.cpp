#include "lrdet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <mutex>
#include <thread>

#include "lrdet/errors.hpp"

namespace lrdet {

double auroc(std::span<const float> scores_clean, std::span<const float> scores_adv) {
  LRDET_REQUIRE(!scores_clean.empty() && !scores_adv.empty(), "auroc needs non-empty clean and adversarial scores");
  std::vector<float> clean(scores_clean.begin(), scores_clean.end());
  std::vector<float> adv(scores_adv.begin(), scores_adv.end());
  std::sort(clean.begin(), clean.end());
  std::sort(adv.begin(), adv.end());
  // Twice the Mann-Whitney U statistic, accumulated as an integer.
  std::uint64_t twice_u = 0;
  std::size_t below = 0, upto = 0;
  for (float a : adv) {
    while (below < clean.size() && clean[below] < a) ++below;
    if (upto < below) upto = below;
    while (upto < clean.size() && clean[upto] <= a) ++upto;
    twice_u += 2 * below + (upto - below);
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(clean.size()) * static_cast<double>(adv.size()));
}

void parallel_for(std::size_t chunks, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, chunks));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t c; (c = next++) < chunks;) {
        try {
          fn(c);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

Tensor EvalSets::paired_clean() const {
  LRDET_REQUIRE(!adv_source.empty(), "no adversarial samples to pair");
  std::vector<Tensor> rows;
  rows.reserve(adv_source.size());
  for (auto s : adv_source) rows.push_back(clean_x.rows(s, s + 1).reshaped(Shape(clean_x.shape().begin() + 1, clean_x.shape().end())));
  return stack(rows);
}

EvalSets build_eval_sets(const Classifier& model, const AttackConfig& attack, const Dataset& data,
                         const Detector* detector, const SetOptions& options) {
  LRDET_REQUIRE(data.size() > 0, "evaluation dataset is empty");
  const Dataset pool = options.max_samples ? data.head(options.max_samples) : data;
  EvalSets sets;
  sets.dataset_size = pool.size();

  std::vector<std::size_t> all(pool.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Tensor x_all = pool.batch(all);
  const auto pred = [&] {
    std::vector<std::uint32_t> p;
    for (std::size_t s = 0; s < pool.size(); s += 256) {
      auto part = model.predict(x_all.rows(s, std::min(pool.size(), s + 256)));
      p.insert(p.end(), part.begin(), part.end());
    }
    return p;
  }();
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pred[i] == pool.labels[i]) correct.push_back(i);
  sets.clean_accuracy = static_cast<double>(correct.size()) / static_cast<double>(pool.size());
  if (correct.empty()) throw PreconditionError("no correctly classified samples: clean set is empty");

  sets.clean_x = pool.batch(correct);
  sets.clean_labels = pool.batch_labels(correct);
  sets.attacked = correct.size();

  const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
  const std::size_t chunks = (correct.size() + chunk - 1) / chunk;
  std::vector<AdvBatch> results(chunks);
  parallel_for(chunks, options.threads, [&](std::size_t c) {
    const std::size_t begin = c * chunk, end = std::min(correct.size(), begin + chunk);
    AttackConfig cfg = attack;
    cfg.seed = derive_seed(attack.seed, "attack-chunk-" + std::to_string(c));
    std::span<const std::uint32_t> labels(sets.clean_labels.data() + begin, end - begin);
    std::vector<std::uint32_t> targets;
    if (cfg.targeted) targets = random_targets(labels, model.config().num_classes, cfg.seed);
    results[c] = run_attack(model, detector, sets.clean_x.rows(begin, end), labels, cfg, targets);
  });

  std::vector<Tensor> adv_rows;
  const Shape sample(sets.clean_x.shape().begin() + 1, sets.clean_x.shape().end());
  for (std::size_t c = 0; c < chunks; ++c) {
    const AdvBatch& r = results[c];
    for (std::size_t i = 0; i < r.success.size(); ++i) {
      if (!r.success[i]) continue;
      const std::size_t src = c * chunk + i;
      adv_rows.push_back(r.x_adv.rows(i, i + 1).reshaped(sample));
      sets.adv_labels.push_back(sets.clean_labels[src]);
      sets.adv_source.push_back(src);
    }
  }
  if (!adv_rows.empty()) sets.adv_x = stack(adv_rows);
  sets.success_rate = static_cast<double>(sets.adv_count()) / static_cast<double>(sets.attacked);
  return sets;
}

std::vector<float> score_all(const BatchScorer& scorer, const Tensor& x, std::size_t batch) {
  std::vector<float> out;
  if (x.empty()) return out;
  out.reserve(x.dim(0));
  for (std::size_t s = 0; s < x.dim(0); s += batch) {
    auto part = scorer(x.rows(s, std::min(x.dim(0), s + batch)));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

BatchScorer lr_scorer(const Classifier& model, const Detector& detector, std::uint64_t order_seed) {
  auto rng = std::make_shared<Rng>(order_seed);
  return [&model, &detector, rng](const Tensor& x) { return detector.score(model, x, rng.get()); };
}

BatchScorer mismatch_scorer(const Classifier& model, const TransformSpec& spec) {
  return [&model, spec](const Tensor& x) { return mismatch_score(model, x, spec); };
}

const DetectorResult& EvalReport::result(const std::string& name) const {
  for (const auto& d : detectors)
    if (d.name == name) return d;
  throw PreconditionError("report has no detector named '" + name + "'");
}

namespace {

nlohmann::json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.stddev}}; }

MeanStd summarize(const std::vector<float>& scores) {
  std::vector<double> d(scores.begin(), scores.end());
  return mean_std(d);
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  j["counts"] = {{"dataset", dataset_size}, {"clean", clean_count}, {"attacked", attacked}, {"adversarial", adv_count}};
  j["clean_accuracy"] = clean_accuracy;
  j["attack_success_rate"] = success_rate;
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : detectors) {
    nlohmann::json e{{"name", d.name}, {"auroc", d.auroc ? nlohmann::json(*d.auroc) : nlohmann::json(nullptr)}, {"clean_score", ms_json(d.clean)}, {"adv_score", ms_json(d.adv)}};
    if (d.pts_seconds) e["pts_seconds"] = *d.pts_seconds;
    dets.push_back(e);
  }
  j["detectors"] = dets;
  if (conjecture) {
    const auto& c = *conjecture;
    j["conjecture"] = {{"pairs", c.pairs},
                       {"skipped", c.skipped},
                       {"d_first", ms_json(c.d_first)},
                       {"d_feature", ms_json(c.d_feature)},
                       {"err_clean", ms_json(c.err_clean)},
                       {"err_adv", ms_json(c.err_adv)},
                       {"d_diff_stderr", c.d_diff_stderr()},
                       {"err_diff_stderr", c.err_diff_stderr()},
                       {"d_violations", c.d_violations},
                       {"err_violations", c.err_violations}};
  }
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "samples %zu  clean %zu (acc %.4f)  adversarial %zu (success %.4f)\n", dataset_size,
                clean_count, clean_accuracy, adv_count, success_rate);
  os << line;
  std::snprintf(line, sizeof line, "%-20s %8s %22s %22s %12s\n", "detector", "auroc", "clean mean/std", "adv mean/std",
                "pts[s]");
  os << line;
  for (const auto& d : detectors) {
    char pts[32] = "-";
    if (d.pts_seconds) std::snprintf(pts, sizeof pts, "%.3g", *d.pts_seconds);
    char auc[16] = "-";
    if (d.auroc) std::snprintf(auc, sizeof auc, "%.4f", *d.auroc);
    std::snprintf(line, sizeof line, "%-20s %8s %11.4g/%-10.4g %11.4g/%-10.4g %12s\n", d.name.c_str(), auc,
                  d.clean.mean, d.clean.stddev, d.adv.mean, d.adv.stddev, pts);
    os << line;
  }
  if (conjecture) {
    const auto& c = *conjecture;
    std::snprintf(line, sizeof line, "layer change   d_1 %.4f/%.4f   d_n-1 %.4f/%.4f   (%zu pairs, %zu skipped)\n",
                  c.d_first.mean, c.d_first.stddev, c.d_feature.mean, c.d_feature.stddev, c.pairs, c.skipped);
    os << line;
    std::snprintf(line, sizeof line, "regression err e_c %.4f/%.4f   e_a %.4f/%.4f\n", c.err_clean.mean,
                  c.err_clean.stddev, c.err_adv.mean, c.err_adv.stddev);
    os << line;
  }
  return os.str();
}

EvalReport score_sets(const EvalSets& sets, std::span<const NamedScorer> scorers, std::vector<ScoredSets>* raw) {
  EvalReport report;
  report.dataset_size = sets.dataset_size;
  report.clean_count = sets.clean_count();
  report.attacked = sets.attacked;
  report.adv_count = sets.adv_count();
  report.clean_accuracy = sets.clean_accuracy;
  report.success_rate = sets.success_rate;
  if (raw) raw->clear();
  for (const auto& s : scorers) {
    ScoredSets scored{score_all(s.scorer, sets.clean_x), score_all(s.scorer, sets.adv_x)};
    DetectorResult r;
    r.name = s.name;
    r.clean = summarize(scored.clean);
    r.adv = summarize(scored.adv);
    if (!scored.adv.empty()) r.auroc = auroc(scored.clean, scored.adv);
    report.detectors.push_back(r);
    if (raw) raw->push_back(std::move(scored));
  }
  return report;
}

namespace {

std::vector<NamedScorer> default_scorers(const Classifier& model, const Detector& detector, const EvalOptions& options) {
  std::vector<NamedScorer> scorers;
  scorers.push_back({"lr", lr_scorer(model, detector, derive_seed(detector.spec().order_seed, "eval"))});
  for (const auto& b : options.baselines) scorers.push_back({b.name(), mismatch_scorer(model, b)});
  return scorers;
}

nlohmann::json attack_json(const AttackConfig& a) {
  return {{"attack", to_string(a.kind)},       {"epsilon", a.epsilon},
          {"epsilon_255", a.epsilon * 255.0f}, {"step_size", a.resolved_step()},
          {"steps", a.steps},                  {"norm", to_string(a.norm)},
          {"targeted", a.targeted},            {"random_start", a.random_start},
          {"lambda", a.lambda},                {"adaptive_order", a.adaptive_order == AdaptiveOrder::fixed ? "fixed" : "randomized"},
          {"seed", a.seed}};
}

}  // namespace

EvalReport evaluate(const Classifier& model, const Detector& detector, const AttackConfig& attack, const Dataset& data,
                    const EvalOptions& options, std::vector<ScoredSets>* raw) {
  detector.check_compatible(model);
  const EvalSets sets = build_eval_sets(model, attack, data, &detector, options.sets);
  const auto scorers = default_scorers(model, detector, options);
  EvalReport report = score_sets(sets, scorers, raw);
  report.config = attack_json(attack);
  report.config["order_policy"] = to_string(detector.spec().order);
  report.config["tap_layers"] = detector.spec().layers;
  if (options.conjecture && sets.adv_count() > 0)
    report.conjecture = conjecture_stats(model, detector, sets.paired_clean(), sets.adv_x);
  if (options.timing_samples > 0) {
    LRDET_REQUIRE(sets.clean_count() >= options.timing_samples,
                  "timing asked for " + std::to_string(options.timing_samples) + " samples but the clean set holds " +
                      std::to_string(sets.clean_count()));
    const Tensor samples = sets.clean_x.rows(0, options.timing_samples);
    for (std::size_t i = 0; i < scorers.size(); ++i) {
      const auto& scorer = scorers[i].scorer;
      report.detectors[i].pts_seconds = timing_bench([&](const Tensor& x) { scorer(x); }, samples).mean_seconds;
    }
  }
  return report;
}

std::vector<SweepRow> epsilon_sweep(const Classifier& model, const Detector& detector, const AttackConfig& attack,
                                    const Dataset& data, std::span<const float> eps_list, const EvalOptions& options) {
  LRDET_REQUIRE(!eps_list.empty(), "epsilon sweep needs at least one epsilon");
  std::vector<SweepRow> rows;
  for (float eps : eps_list) {
    AttackConfig cfg = attack;
    cfg.epsilon = eps;
    rows.push_back({eps, evaluate(model, detector, cfg, data, options)});
  }
  return rows;
}

std::string sweep_table(std::span<const SweepRow> rows) {
  std::ostringstream os;
  char cell[64];
  os << "eps*255   success    n_adv";
  if (!rows.empty())
    for (const auto& d : rows[0].report.detectors) {
      std::snprintf(cell, sizeof cell, " %16s", d.name.c_str());
      os << cell;
    }
  os << '\n';
  for (const auto& r : rows) {
    std::snprintf(cell, sizeof cell, "%7.1f %9.4f %8zu", r.epsilon * 255.0f, r.report.success_rate, r.report.adv_count);
    os << cell;
    for (const auto& d : r.report.detectors) {
      if (d.auroc) {
        std::snprintf(cell, sizeof cell, " %16.4f", *d.auroc);
      } else {
        std::snprintf(cell, sizeof cell, " %16s", "-");
      }
      os << cell;
    }
    os << '\n';
  }
  return os.str();
}

TimingResult timing_bench(const std::function<void(const Tensor&)>& process, const Tensor& samples,
                          std::size_t repetitions) {
  LRDET_REQUIRE(samples.rank() >= 2 && samples.dim(0) >= 100,
                "timing needs at least 100 samples, got " + std::to_string(samples.rank() >= 2 ? samples.dim(0) : 0));
  LRDET_REQUIRE(repetitions >= 1, "timing needs at least one repetition");
  const std::size_t n = samples.dim(0);
  std::vector<Tensor> singles;
  singles.reserve(n);
  for (std::size_t i = 0; i < n; ++i) singles.push_back(samples.rows(i, i + 1));
  for (const auto& s : singles) process(s);  // warm-up

  using clock = std::chrono::steady_clock;
  std::vector<double> times;
  TimingResult result;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    double rep_total = 0.0;
    for (const auto& s : singles) {
      const auto t0 = clock::now();
      process(s);
      const double dt = std::chrono::duration<double>(clock::now() - t0).count();
      times.push_back(dt);
      rep_total += dt;
    }
    result.repetition_means.push_back(rep_total / static_cast<double>(n));
  }
  const MeanStd ms = mean_std(times);
  result.mean_seconds = ms.mean;
  result.std_seconds = ms.stddev;
  result.samples = n;
  return result;
}

std::string scores_csv(std::span<const NamedScorer> scorers, std::span<const ScoredSets> raw) {
  std::ostringstream os;
  os << "detector,set,index,score\n";
  char buf[64];
  for (std::size_t i = 0; i < scorers.size() && i < raw.size(); ++i) {
    for (std::size_t j = 0; j < raw[i].clean.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", raw[i].clean[j]);
      os << scorers[i].name << ",clean," << j << ',' << buf << '\n';
    }
    for (std::size_t j = 0; j < raw[i].adv.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", raw[i].adv[j]);
      os << scorers[i].name << ",adversarial," << j << ',' << buf << '\n';
    }
  }
  return os.str();
}

}  // namespace lrdet
