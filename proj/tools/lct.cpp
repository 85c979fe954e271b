// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// lct: corpus generation, training, causal adaptation, sampling, evaluation
// and the session service.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
// Relative output paths resolve under $LCT_OUTPUT_ROOT when it is set.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "lct/config.hpp"
#include "lct/corpus.hpp"
#include "lct/engine.hpp"
#include "lct/errors.hpp"
#include "lct/eval.hpp"
#include "lct/sampling_io.hpp"
#include "lct/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* root = std::getenv("LCT_OUTPUT_ROOT"); root && *root) return fs::path(root) / path;
  }
  return path;
}

lct::TrainConfig read_config(const std::string& path) {
  if (!fs::exists(path)) throw lct::ConfigError("config file not found: " + path);
  return lct::load_train_config(path);
}

void write_jsonl(std::ostream& out, const json& record) { out << record.dump() << "\n"; }

struct Report {
  std::optional<std::ofstream> file;
  void emit(const json& record) {
    write_jsonl(std::cout, record);
    if (file) write_jsonl(*file, record);
  }
};

int run_gen_corpus(const std::string& config_path, const std::string& out, std::uint64_t seed,
                   std::optional<int> count) {
  const auto config = read_config(config_path);
  const auto corpus = lct::generate_corpus(config.scene, count.value_or(config.corpus_size), seed);
  const auto dir = output_path(out);
  lct::write_corpus(dir, corpus);
  std::cout << json{{"corpus", dir.string()}, {"count", corpus.scenes.size()}, {"seed", seed}}.dump() << "\n";
  return 0;
}

lct::TrainOptions train_options(const fs::path& out, std::optional<long> stop_after, bool quiet) {
  lct::TrainOptions options;
  options.out_dir = out;
  options.stop_after = stop_after;
  if (!quiet) {
    options.on_step = [](const lct::TrainLogRecord& r) {
      if (r.step % 50 == 0) std::cerr << r.phase << " step " << r.step << " loss " << r.loss << "\n";
    };
  }
  return options;
}

int run_train(const std::string& config_path, const std::string& corpus_dir, const std::string& out,
              const std::string& resume, std::optional<long> stop_after, bool quiet) {
  const auto config = read_config(config_path);
  if (!fs::exists(fs::path(corpus_dir) / "manifest.json")) throw lct::ConfigError("no corpus at " + corpus_dir);
  const auto corpus = lct::read_corpus(corpus_dir);
  std::optional<lct::Checkpoint> start;
  if (!resume.empty()) {
    if (!fs::exists(resume)) throw lct::ConfigError("resume checkpoint not found: " + resume);
    start = lct::load_checkpoint(resume);
  }
  const auto dir = output_path(out);
  const auto ckpt = lct::train(config, corpus, train_options(dir, stop_after, quiet), std::move(start));
  std::cout << json{{"out", dir.string()}, {"step", ckpt.step}}.dump() << "\n";
  return 0;
}

int run_adapt(const std::string& from, const std::string& corpus_dir, const std::string& out,
              std::optional<long> stop_after, bool quiet) {
  if (!fs::exists(from)) throw lct::ConfigError("checkpoint not found: " + from);
  if (!fs::exists(fs::path(corpus_dir) / "manifest.json")) throw lct::ConfigError("no corpus at " + corpus_dir);
  const auto bidir = lct::load_checkpoint(from);
  const auto corpus = lct::read_corpus(corpus_dir);
  const auto dir = output_path(out);
  const auto result = lct::adapt_causal(bidir, corpus, train_options(dir, stop_after, quiet));
  for (const auto& p : result.curve) std::cout << lct::to_json(p).dump() << "\n";
  return 0;
}

int run_sample(const std::string& ckpt_path, const std::string& mode_text, const std::string& prompt_file,
               const std::string& out, std::uint64_t seed, std::optional<int> steps) {
  if (!fs::exists(ckpt_path)) throw lct::ConfigError("checkpoint not found: " + ckpt_path);
  if (!fs::exists(prompt_file)) throw lct::ConfigError("prompt file not found: " + prompt_file);
  const auto mode = lct::parse_sample_mode(mode_text);
  const auto ckpt = lct::load_checkpoint(ckpt_path);
  json prompt_json;
  {
    std::ifstream in(prompt_file);
    try {
      in >> prompt_json;
    } catch (const json::exception& e) {
      throw lct::ConfigError("prompt file is not valid JSON: " + std::string(e.what()));
    }
  }
  const auto doc = lct::parse_prompt_document(prompt_json);
  const auto dir = output_path(out);
  const auto written = lct::sample_to_directory(ckpt, doc, mode, seed, steps, dir);
  std::cout << written.dump() << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& suite, const std::string& out,
             std::optional<std::uint64_t> seed, std::optional<int> steps, std::optional<int> scenes) {
  if (!fs::exists(ckpt_path)) throw lct::ConfigError("checkpoint not found: " + ckpt_path);
  const auto ckpt = lct::load_checkpoint(ckpt_path);
  const auto& config = ckpt.config;
  const std::uint64_t s = seed.value_or(config.eval.seed);
  const int n_steps = steps.value_or(config.sampling.steps);
  const bool bidir = ckpt.mode == lct::AttentionMode::kBidirectional;

  Report report;
  if (!out.empty()) {
    const auto path = output_path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    report.file.emplace(path);
    if (!*report.file) throw std::runtime_error("cannot write " + path.string());
  }
  const json header{{"checkpoint", ckpt_path},
                    {"mode", bidir ? "bidirectional" : "context-causal"},
                    {"step", ckpt.step},
                    {"seed", s},
                    {"sampling_steps", n_steps}};

  if (suite == "consistency") {
    if (bidir) {
      const auto cases = lct::consistency_suite(config.scene, scenes.value_or(config.eval.consistency_scenes),
                                                config.eval.consistency_shots, s);
      auto r = lct::to_json(lct::eval_consistency(ckpt.weights, config, cases, n_steps, s));
      r.update(header);
      r["joint_lower"] = r["joint_mean_std"].is_number() && r["independent_mean_std"].is_number() &&
                         r["joint_mean_std"].get<double>() < r["independent_mean_std"].get<double>();
      report.emit(r);
    } else {
      const auto cases = lct::consistency_suite(config.scene, scenes.value_or(config.eval.curve_scenes),
                                                config.eval.consistency_shots, s);
      const auto ar = lct::eval_ar_consistency(ckpt.weights, config, cases, n_steps, config.sampling.history_tc, s);
      json r{{"suite", "ar-consistency"}, {"color_std", ar.color_std}, {"consistency", 1.0 - ar.color_std},
             {"measured", ar.measured}};
      r.update(header);
      report.emit(r);
    }
  } else if (suite == "single-shot") {
    json r{{"suite", "single-shot"},
           {"loss", lct::eval_single_shot_loss(ckpt.weights, ckpt.mode, config, scenes.value_or(64), s)}};
    r.update(header);
    report.emit(r);
  } else if (suite == "tc-sweep") {
    if (!bidir) throw lct::ConfigError("tc-sweep needs a bidirectional checkpoint");
    const std::vector<double> tcs{0.1, 0.5, 0.9};
    const auto sweep = lct::eval_tc_sweep(ckpt.weights, config, tcs, scenes.value_or(config.eval.tc_trials), n_steps, s);
    auto r = lct::to_json(sweep);
    bool monotone = true;
    for (std::size_t i = 1; i < sweep.mean_error.size(); ++i) monotone = monotone && sweep.mean_error[i] >= sweep.mean_error[i - 1];
    r["monotone"] = monotone;
    r.update(header);
    report.emit(r);
  } else if (suite == "accumulation") {
    if (bidir) throw lct::ConfigError("accumulation needs a context-causal checkpoint");
    auto r = lct::to_json(lct::eval_accumulation(ckpt.weights, config, 6, config.sampling.history_tc,
                                                 scenes.value_or(8), n_steps, s));
    r.update(header);
    report.emit(r);
  } else {
    throw UsageError("unknown suite '" + suite + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lct: long-context multi-shot video diffusion at toy scale"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output on stderr");

  std::string config_path, out, corpus_dir, resume, from, ckpt, mode, prompt_file, suite;
  std::uint64_t seed = 0;
  std::optional<int> count, steps, scenes;
  std::optional<long> stop_after;
  std::optional<std::uint64_t> eval_seed;

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic scene corpus");
  gen->add_option("--config", config_path, "Training config (JSON); its scene section is used")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Corpus seed")->required();
  gen->add_option("--count", count, "Number of scenes (default: corpus_size from the config)")
      ->check(CLI::NonNegativeNumber);

  auto* train = app.add_subcommand("train", "Long-context tuning (bidirectional)");
  train->add_option("--config", config_path, "Training config (JSON)")->required();
  train->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  train->add_option("--out", out, "Output directory for checkpoints and train.jsonl")->required();
  train->add_option("--resume", resume, "Resume from this checkpoint");
  train->add_option("--stop-after", stop_after, "Stop after this many completed steps")->check(CLI::NonNegativeNumber);

  auto* adapt = app.add_subcommand("adapt-causal", "Context-causal fine-tuning of a bidirectional checkpoint");
  adapt->add_option("--from", from, "Bidirectional checkpoint")->required();
  adapt->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  adapt->add_option("--out", out, "Output directory for checkpoints, train.jsonl and curve.jsonl")->required();
  adapt->add_option("--stop-after", stop_after, "Stop after this many completed steps")->check(CLI::NonNegativeNumber);

  auto* sample = app.add_subcommand("sample", "Generate a scene from a prompt file");
  sample->add_option("--ckpt", ckpt, "Checkpoint")->required();
  sample->add_option("--mode", mode, "joint | cond | ar")->required()->check(CLI::IsMember({"joint", "cond", "ar"}));
  sample->add_option("--prompt-file", prompt_file, "Prompt document (JSON, see docs/cli.md)")->required();
  sample->add_option("--out", out, "Output directory for latents and frame images")->required();
  sample->add_option("--seed", seed, "Sampling seed");
  sample->add_option("--steps", steps, "Euler steps (default: sampling.steps from the checkpoint config)")
      ->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Run a measurement suite; writes JSON lines");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--suite", suite, "consistency | single-shot | tc-sweep | accumulation")
      ->required()
      ->check(CLI::IsMember({"consistency", "single-shot", "tc-sweep", "accumulation"}));
  eval->add_option("--out", out, "Also append the report to this file");
  eval->add_option("--seed", eval_seed, "Suite seed (default: eval.seed from the config)");
  eval->add_option("--steps", steps, "Euler steps")->check(CLI::PositiveNumber);
  eval->add_option("--scenes", scenes, "Scenes or trials in the suite")->check(CLI::PositiveNumber);

  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string checkpoint_dir, state_dir;
  auto* serve = app.add_subcommand("serve", "Run the session HTTP service");
  serve->add_option("--host", bind, "Bind address")->envname("LCT_BIND_ADDRESS");
  serve->add_option("--port", port, "Port")->envname("LCT_PORT")->check(CLI::Range(0, 65535));
  serve->add_option("--checkpoint-dir", checkpoint_dir, "Directory of servable checkpoints")
      ->envname("LCT_CHECKPOINT_DIR")
      ->required();
  serve->add_option("--state-dir", state_dir, "Session journal directory (empty: sessions are not persisted)")
      ->envname("LCT_STATE_DIR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return run_gen_corpus(config_path, out, seed, count);
    if (*train) return run_train(config_path, corpus_dir, out, resume, stop_after, quiet);
    if (*adapt) return run_adapt(from, corpus_dir, out, stop_after, quiet);
    if (*sample) return run_sample(ckpt, mode, prompt_file, out, seed, steps);
    if (*eval) return run_eval(ckpt, suite, out, eval_seed, steps, scenes);
    if (*serve) {
      lct::ServiceOptions options;
      options.checkpoint_dir = checkpoint_dir;
      options.state_dir = state_dir;
      return lct::run_server(options, bind, port);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lct::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lct::VocabularyError& e) {
    std::cerr << "prompt error: " << e.what() << "\n";
    return 2;
  } catch (const lct::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
