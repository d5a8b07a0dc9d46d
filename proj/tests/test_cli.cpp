#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "lrdet/advfile.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "lrdet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = lrdet::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small end-to-end pipeline shared by the tests below.
class Pipeline : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "lrdet_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const Result m = run({"train-model", "--arch", "mlp", "--epochs", "1", "--max-train", "1500", "--seed", "7",
                          "--out", (dir / "m.ckpt").string()});
    ASSERT_EQ(m.code, 0) << m.err;
    const Result d = run({"train-detector", "--model", (dir / "m.ckpt").string(), "--epochs", "1", "--max-train",
                          "500", "--seed", "7", "--out", (dir / "d.ckpt").string()});
    ASSERT_EQ(d.code, 0) << d.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string model() { return (dir / "m.ckpt").string(); }
  static std::string detector() { return (dir / "d.ckpt").string(); }
};

fs::path Pipeline::dir;

}  // namespace

TEST(Cli, HelpAndUsage) {
  const Result help = run({"--help"});
  EXPECT_EQ(help.code, lrdet::cli::kExitOk);
  EXPECT_NE(help.out.find("train-model"), std::string::npos);
  const Result sub = run({"eval", "--help"});
  EXPECT_EQ(sub.code, lrdet::cli::kExitOk);
  EXPECT_NE(sub.out.find("--detector"), std::string::npos);

  EXPECT_EQ(run({}).code, lrdet::cli::kExitUsage);
  const Result unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, lrdet::cli::kExitUsage);
  EXPECT_NE(unknown.err.find("unknown command"), std::string::npos);
}

TEST(Cli, PreconditionAndIoExitCodes) {
  EXPECT_EQ(run({"train-model", "--arch", "mlp"}).code, lrdet::cli::kExitPrecondition);  // no --out
  EXPECT_EQ(run({"train-model", "--no-such-flag"}).code, lrdet::cli::kExitPrecondition);
  EXPECT_EQ(run({"eval", "--model", "/nonexistent/m.ckpt", "--detector", "/nonexistent/d.ckpt"}).code,
            lrdet::cli::kExitIo);
  EXPECT_EQ(run({"train-model", "--out", "/tmp/x.ckpt", "--data", "/nonexistent"}).code, lrdet::cli::kExitIo);
  EXPECT_EQ(run({"train-model", "--out", "/tmp/x.ckpt", "--arch", "vgg", "--max-train", "10", "--epochs", "1"}).code,
            lrdet::cli::kExitPrecondition);
}

TEST(Cli, ConfigFileMergesUnderCommandLine) {
  const fs::path cfg = fs::temp_directory_path() / "lrdet_cli_cfg.json";
  {
    std::ofstream(cfg) << R"({"arch": "vgg", "epochs": 1, "max-train": 10})";
  }
  // Value from the config file is used...
  EXPECT_EQ(run({"train-model", "--config", cfg.string(), "--out", "/tmp/x.ckpt"}).code,
            lrdet::cli::kExitPrecondition);
  // ...unless the command line overrides it.
  const fs::path out = fs::temp_directory_path() / "lrdet_cli_cfg.ckpt";
  const Result ok = run({"train-model", "--config", cfg.string(), "--arch", "mlp", "--out", out.string()});
  EXPECT_EQ(ok.code, lrdet::cli::kExitOk) << ok.err;
  EXPECT_NE(ok.err.find(R"("arch":"mlp")"), std::string::npos) << ok.err;
  EXPECT_NE(ok.err.find(R"("epochs":1)"), std::string::npos) << ok.err;

  {
    std::ofstream(cfg) << R"({"bogus": 1})";
  }
  const Result bad = run({"train-model", "--config", cfg.string(), "--out", out.string()});
  EXPECT_EQ(bad.code, lrdet::cli::kExitPrecondition);
  EXPECT_NE(bad.err.find("unknown config key 'bogus'"), std::string::npos);
  EXPECT_EQ(run({"train-model", "--config", "/nonexistent.json", "--out", out.string()}).code, lrdet::cli::kExitIo);
  fs::remove(cfg);
  fs::remove(out);
}

TEST_F(Pipeline, EvalEmitsJsonReportAndCsv) {
  const fs::path csv = dir / "scores.csv", report = dir / "report.json";
  const Result r = run({"eval", "--model", model(), "--detector", detector(), "--attack", "pgd", "--eps", "32",
                        "--max-samples", "100", "--conjecture", "--csv", csv.string(), "--report", report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["config"]["attack"], "pgd");
  EXPECT_EQ(j["counts"]["dataset"], 100);
  EXPECT_EQ(j["detectors"][0]["name"], "lr");
  EXPECT_TRUE(j.contains("conjecture"));
  EXPECT_EQ(json::parse(slurp(report)), j);
  EXPECT_EQ(slurp(csv).rfind("detector,set,index,score", 0), 0u);

  const Result again = run({"eval", "--model", model(), "--detector", detector(), "--attack", "pgd", "--eps", "32",
                            "--max-samples", "100", "--conjecture"});
  EXPECT_EQ(again.out, r.out);
}

TEST_F(Pipeline, GenAdvThenStats) {
  const fs::path adv = dir / "pairs.adv";
  const Result g = run({"gen-adv", "--model", model(), "--attack", "bim", "--eps", "48", "--max-samples", "60", "--out",
                        adv.string()});
  ASSERT_EQ(g.code, 0) << g.err;
  const auto recs = lrdet::load_adv(adv);
  EXPECT_EQ(json::parse(g.out)["adversarial"], recs.size());
  for (const auto& rec : recs) EXPECT_NE(rec.pred, rec.label);
  const Result s = run({"stats", "--model", model(), "--detector", detector(), "--adv", adv.string()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_TRUE(json::parse(s.out).contains("d_first"));
}

TEST_F(Pipeline, SweepBenchAndAdaptive) {
  const Result sw = run({"sweep-eps", "--model", model(), "--detector", detector(), "--eps-list", "8,64",
                         "--max-samples", "60"});
  ASSERT_EQ(sw.code, 0) << sw.err;
  EXPECT_EQ(json::parse(sw.out).size(), 2u);

  const Result be = run({"bench", "--model", model(), "--detector", detector(), "--samples", "100", "--reps", "1"});
  ASSERT_EQ(be.code, 0) << be.err;
  EXPECT_TRUE(json::parse(be.out).contains("lr_over_forward"));
  EXPECT_EQ(run({"bench", "--model", model(), "--detector", detector(), "--samples", "50"}).code,
            lrdet::cli::kExitPrecondition);

  const Result ad = run({"adaptive-eval", "--model", model(), "--detector", detector(), "--steps", "5",
                         "--max-samples", "60", "--eps", "32"});
  ASSERT_EQ(ad.code, 0) << ad.err;
}

TEST_F(Pipeline, SameSeedReproducesCheckpointsByteForByte) {
  const fs::path m2 = dir / "m2.ckpt", d2 = dir / "d2.ckpt";
  ASSERT_EQ(run({"train-model", "--arch", "mlp", "--epochs", "1", "--max-train", "1500", "--seed", "7", "--out",
                 m2.string()})
                .code,
            0);
  ASSERT_EQ(run({"train-detector", "--model", m2.string(), "--epochs", "1", "--max-train", "500", "--seed", "7", "--out",
                 d2.string()})
                .code,
            0);
  EXPECT_EQ(slurp(m2), slurp(model()));
  EXPECT_EQ(slurp(d2), slurp(detector()));
}
