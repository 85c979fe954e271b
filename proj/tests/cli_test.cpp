// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lct/config.hpp"
#include "test_util.hpp"

namespace lct {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is discarded.
Run lct(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" LCT_CLI_PATH "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<json> jsonl(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// A config small enough to train in well under a second.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    auto c = load_train_config(testing::source_path("configs/smoke.json"));
    c.lct_steps = 4;
    c.causal_steps = 2;
    c.checkpoint_every = 2;
    c.log_every = 1;
    c.sampling.steps = 2;
    c.eval.consistency_scenes = 2;
    c.eval.tc_trials = 2;
    c.eval.curve_scenes = 2;
    std::ofstream(*dir_ / "tiny.json") << to_json(c).dump(2);
    ASSERT_EQ(lct("-q gen-corpus --config " + path("tiny.json") + " --out " + path("corpus") + " --seed 3 --count 6").code, 0);
    ASSERT_EQ(lct("-q train --config " + path("tiny.json") + " --corpus " + path("corpus") + " --out " + path("run")).code, 0);
    ASSERT_EQ(lct("-q adapt-causal --from " + path("run/lct-final.lct") + " --corpus " + path("corpus") + " --out " +
                  path("causal"))
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& rel) { return (*dir_ / rel).string(); }

  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

const char* kPrompt = R"({
  "global": {"characters": [{"id": 0, "color": 2, "size": 1}, {"id": 1, "color": 5, "size": 0}],
             "environment": 1, "story": 3},
  "shots": [
    {"type": "wide", "subject": 0, "action": "right"},
    {"type": "close", "subject": 1, "action": "idle", "shot_cut": true}
  ]
})";

TEST(Cli, HelpListsSubcommands) {
  const auto r = lct("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"gen-corpus", "train", "adapt-causal", "sample", "eval", "serve"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(lct("").code, 2);
  EXPECT_EQ(lct("frobnicate").code, 2);
  EXPECT_EQ(lct("train --config x.json").code, 2);
  EXPECT_EQ(lct("sample --ckpt a --mode sideways --prompt-file p --out o").code, 2);
  EXPECT_EQ(lct("serve").code, 2);  // checkpoint directory is required
}

TEST(Cli, BadConfigIsExitTwo) {
  TempDir d;
  std::ofstream(d / "bad.json") << R"({"model": {"depth": 3}})";
  EXPECT_EQ(lct("gen-corpus --config " + (d / "bad.json").string() + " --out " + (d / "c").string() + " --seed 1").code, 2);
  EXPECT_EQ(lct("gen-corpus --config " + (d / "absent.json").string() + " --out " + (d / "c").string() + " --seed 1").code, 2);
}

TEST_F(CliTest, CorpusIsByteIdenticalUnderTheSameSeed) {
  TempDir d;
  ASSERT_EQ(lct("-q gen-corpus --config " + path("tiny.json") + " --out " + (d / "again").string() + " --seed 3 --count 6").code, 0);
  EXPECT_EQ(slurp(d / "again/scenes-00000.lct"), slurp(*dir_ / "corpus/scenes-00000.lct"));
  ASSERT_EQ(lct("-q gen-corpus --config " + path("tiny.json") + " --out " + (d / "other").string() + " --seed 4 --count 6").code, 0);
  EXPECT_NE(slurp(d / "other/scenes-00000.lct"), slurp(*dir_ / "corpus/scenes-00000.lct"));
}

TEST_F(CliTest, TrainingWritesLogsAndIsDeterministic) {
  EXPECT_TRUE(std::filesystem::exists(*dir_ / "run/lct-000002.lct"));
  const auto log = jsonl(slurp(*dir_ / "run/train.jsonl"));
  ASSERT_EQ(log.size(), 4u);
  EXPECT_EQ(log.back()["step"], 4);
  EXPECT_EQ(log.back()["phase"], "lct");
  TempDir d;
  ASSERT_EQ(lct("-q train --config " + path("tiny.json") + " --corpus " + path("corpus") + " --out " + (d / "run").string()).code, 0);
  EXPECT_EQ(slurp(d / "run/lct-final.lct"), slurp(*dir_ / "run/lct-final.lct"));
}

TEST_F(CliTest, ResumeMatchesUninterruptedTraining) {
  TempDir d;
  const auto out = (d / "run").string();
  ASSERT_EQ(lct("-q train --config " + path("tiny.json") + " --corpus " + path("corpus") + " --out " + out + " --stop-after 2").code, 0);
  EXPECT_FALSE(std::filesystem::exists(d / "run/lct-final.lct"));
  ASSERT_EQ(lct("-q train --config " + path("tiny.json") + " --corpus " + path("corpus") + " --out " + out + " --resume " +
                out + "/lct-000002.lct")
                .code,
            0);
  EXPECT_EQ(slurp(d / "run/lct-final.lct"), slurp(*dir_ / "run/lct-final.lct"));
}

TEST_F(CliTest, AdaptationWritesCurve) {
  const auto curve = jsonl(slurp(*dir_ / "causal/curve.jsonl"));
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve.front()["step"], 0);
  EXPECT_EQ(curve.back()["step"], 2);
  EXPECT_TRUE(std::filesystem::exists(*dir_ / "causal/causal-final.lct"));
  // A causal checkpoint cannot be adapted again.
  EXPECT_EQ(lct("-q adapt-causal --from " + path("causal/causal-final.lct") + " --corpus " + path("corpus") + " --out " +
                path("causal2"))
                .code,
            2);
}

TEST_F(CliTest, SampleWritesLatentsFramesAndIsDeterministic) {
  TempDir d;
  std::ofstream(d / "prompt.json") << kPrompt;
  const auto args = [&](const std::string& out) {
    return "-q sample --ckpt " + path("run/lct-final.lct") + " --mode joint --prompt-file " + (d / "prompt.json").string() +
           " --out " + out + " --seed 7";
  };
  ASSERT_EQ(lct(args((d / "a").string())).code, 0);
  ASSERT_EQ(lct(args((d / "b").string())).code, 0);
  for (const char* f : {"shot-0.lat", "shot-1.lat", "shot-1-frame-3.bmp", "sample.json"}) {
    EXPECT_TRUE(std::filesystem::exists(d / "a" / f)) << f;
  }
  EXPECT_EQ(slurp(d / "a/shot-1.lat"), slurp(d / "b/shot-1.lat"));
  const auto meta = json::parse(slurp(d / "a/sample.json"));
  EXPECT_EQ(meta["mode"], "joint");

  // Auto-regressive sampling needs the causal checkpoint; the bidirectional one is a usage error.
  EXPECT_EQ(lct("-q sample --ckpt " + path("causal/causal-final.lct") + " --mode ar --prompt-file " +
                (d / "prompt.json").string() + " --out " + (d / "ar").string())
                .code,
            0);
  EXPECT_EQ(lct("-q sample --ckpt " + path("run/lct-final.lct") + " --mode ar --prompt-file " +
                (d / "prompt.json").string() + " --out " + (d / "bad").string())
                .code,
            2);
  // Joint mode refuses conditions; cond mode requires them.
  EXPECT_EQ(lct("-q sample --ckpt " + path("run/lct-final.lct") + " --mode cond --prompt-file " +
                (d / "prompt.json").string() + " --out " + (d / "bad").string())
                .code,
            2);
  auto with_condition = json::parse(kPrompt);
  with_condition["conditions"] = {{{"shot", 0}, {"t_c", 0.2}}};
  std::ofstream(d / "cond.json") << with_condition.dump();
  EXPECT_EQ(lct("-q sample --ckpt " + path("run/lct-final.lct") + " --mode cond --prompt-file " +
                (d / "cond.json").string() + " --out " + (d / "cond").string())
                .code,
            0);
  std::ofstream(d / "vocab.json") << R"({"global": {"characters": [], "environment": 9, "story": 0}, "shots": []})";
  EXPECT_EQ(lct("-q sample --ckpt " + path("run/lct-final.lct") + " --mode joint --prompt-file " +
                (d / "vocab.json").string() + " --out " + (d / "v").string())
                .code,
            2);
}

TEST_F(CliTest, OutputRootPrefixesRelativePaths) {
  TempDir d;
  std::ofstream(d / "prompt.json") << kPrompt;
  ASSERT_EQ(lct("-q sample --ckpt " + path("run/lct-final.lct") + " --mode joint --prompt-file " +
                    (d / "prompt.json").string() + " --out rel/out --steps 1",
                "LCT_OUTPUT_ROOT='" + d.path().string() + "'")
                .code,
            0);
  EXPECT_TRUE(std::filesystem::exists(d / "rel/out/sample.json"));
}

TEST_F(CliTest, EvalSuitesEmitJsonLines) {
  TempDir d;
  const auto c = lct("eval --ckpt " + path("run/lct-final.lct") + " --suite consistency --scenes 2 --steps 1 --out " +
                     (d / "eval.jsonl").string());
  ASSERT_EQ(c.code, 0);
  const auto lines = jsonl(c.out);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0]["suite"], "consistency");
  EXPECT_EQ(jsonl(slurp(d / "eval.jsonl")), lines);

  const auto t = lct("eval --ckpt " + path("run/lct-final.lct") + " --suite tc-sweep --scenes 2 --steps 1");
  ASSERT_EQ(t.code, 0);
  const auto tc = jsonl(t.out);
  ASSERT_EQ(tc.size(), 1u);
  EXPECT_EQ(tc[0]["suite"], "tc-sweep");
  EXPECT_TRUE(tc[0].contains("monotone"));
  EXPECT_EQ(tc[0]["points"].size(), 3u);

  const auto s = lct("eval --ckpt " + path("run/lct-final.lct") + " --suite single-shot --scenes 2 --steps 1");
  ASSERT_EQ(s.code, 0);
  EXPECT_EQ(jsonl(s.out)[0]["suite"], "single-shot");

  const auto a = lct("eval --ckpt " + path("causal/causal-final.lct") + " --suite accumulation --scenes 2 --steps 1");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(jsonl(a.out)[0]["suite"], "accumulation");

  EXPECT_EQ(lct("eval --ckpt " + path("run/lct-final.lct") + " --suite bogus").code, 2);
  EXPECT_EQ(lct("eval --ckpt " + path("missing.lct") + " --suite consistency").code, 2);
  std::ofstream(d / "corrupt.lct") << "LCTCKPT garbage";
  EXPECT_EQ(lct("eval --ckpt " + (d / "corrupt.lct").string() + " --suite consistency").code, 1);
}

}  // namespace
}  // namespace lct
