// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "lct/seeding.hpp"

namespace lct {

namespace {

constexpr std::uint64_t kJointTag = 1;
constexpr std::uint64_t kIndependentTag = 2;
constexpr std::uint64_t kTcTag = 3;
constexpr std::uint64_t kArTag = 4;
constexpr std::uint64_t kSingleTag = 5;
constexpr std::uint64_t kAccumulationTag = 6;

double mean_finite(const std::vector<double>& v) {
  double sum = 0.0;
  int n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

SampleRequest scene_request(const TrainConfig& config, const SceneSample& scene, int steps, SampleMode mode,
                            std::uint64_t seed) {
  SampleRequest req;
  req.layout = scene_layout(config.scene, config.model, scene.prompt, scene.shots);
  req.prompt_ids = encode_prompt(scene.prompt, config.scene);
  req.steps = steps;
  req.mode = mode;
  req.seed = seed;
  return req;
}

// Drops the global group's dummy latent from a sample result.
std::vector<Latent> shot_latents(const SampleResult& r) {
  std::vector<Latent> out;
  for (std::size_t k = 1; k < r.shots.size(); ++k) out.push_back(r.shots[k]);
  return out;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::vector<SceneSample> consistency_suite(const SceneConfig& config, int count, int shots, std::uint64_t seed) {
  config.validate();
  if (shots < 2) throw ConfigError("consistency suite needs at least 2 shots per scene");
  std::vector<SceneSample> suite;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(i), 0x5u}));
    SceneSample s;
    s.world = sample_world(config, rng);
    s.prompt.global = describe_world(s.world);
    const int subject = std::uniform_int_distribution<int>(0, static_cast<int>(s.world.characters.size()) - 1)(rng);
    for (int k = 0; k < shots; ++k) {
      ShotPrompt p;
      p.type = static_cast<ShotType>(std::uniform_int_distribution<int>(0, 2)(rng));
      p.subject = subject;
      p.action = static_cast<Action>(std::uniform_int_distribution<int>(0, vocab::kActionCount - 1)(rng));
      p.shot_cut = k > 0;
      ShotMotion m{std::uniform_int_distribution<int>(0, config.width - 1)(rng),
                   std::uniform_int_distribution<int>(0, config.height - 1)(rng)};
      s.prompt.shots.push_back(p);
      s.motions.push_back(m);
      s.shots.push_back(render_shot(s.world, p, m, config, rng()));
    }
    suite.push_back(std::move(s));
  }
  return suite;
}

double cross_shot_color_std(const StructuredPrompt& prompt, const std::vector<Latent>& shots) {
  if (prompt.shots.size() != shots.size()) throw ShapeError("cross_shot_color_std: prompt and shot counts differ");
  std::map<int, std::vector<Color>> found;
  for (std::size_t k = 0; k < shots.size(); ++k) {
    if (!prompt.shots[k].subject) continue;
    const int id = *prompt.shots[k].subject;
    const auto attrs = extract_attributes(shots[k]);
    const auto it = attrs.characters.find(id);
    if (it != attrs.characters.end()) found[id].push_back(it->second.color);
  }
  double total = 0.0;
  int characters = 0;
  for (const auto& [id, colors] : found) {
    if (colors.size() < 2) continue;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& c : colors) mean += c.cast<double>();
    mean /= static_cast<double>(colors.size());
    Eigen::Vector3d var = Eigen::Vector3d::Zero();
    for (const auto& c : colors) var += (c.cast<double>() - mean).cwiseAbs2();
    var /= static_cast<double>(colors.size());
    total += var.cwiseSqrt().mean();
    ++characters;
  }
  return characters == 0 ? std::numeric_limits<double>::quiet_NaN() : total / characters;
}

nlohmann::json to_json(const ConsistencyReport& r) {
  nlohmann::json joint = nlohmann::json::array();
  nlohmann::json independent = nlohmann::json::array();
  for (double v : r.joint) joint.push_back(finite_or_null(v));
  for (double v : r.independent) independent.push_back(finite_or_null(v));
  return {{"suite", "consistency"},      {"joint_mean_std", finite_or_null(r.joint_mean)},
          {"independent_mean_std", finite_or_null(r.independent_mean)},
          {"measured", r.measured},      {"scenes", r.joint.size()},
          {"joint_std", joint},          {"independent_std", independent}};
}

ConsistencyReport eval_consistency(const ModelWeights<float>& weights, const TrainConfig& config,
                                   const std::vector<SceneSample>& suite, int steps, std::uint64_t seed) {
  const ModelField field(weights, AttentionMode::kBidirectional);
  ConsistencyReport report;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& scene = suite[i];
    const auto joint = euler_sample(
        field, scene_request(config, scene, steps, SampleMode::kJoint, derive_seed({seed, i, kJointTag})));
    report.joint.push_back(cross_shot_color_std(scene.prompt, shot_latents(joint)));

    std::vector<Latent> alone;
    for (std::size_t k = 0; k < scene.shots.size(); ++k) {
      SceneSample single;
      single.world = scene.world;
      single.prompt.global = scene.prompt.global;
      single.prompt.shots = {scene.prompt.shots[k]};
      single.shots = {scene.shots[k]};
      const auto r = euler_sample(field, scene_request(config, single, steps, SampleMode::kJoint,
                                                       derive_seed({seed, i, k, kIndependentTag})));
      alone.push_back(r.shots[1]);
    }
    report.independent.push_back(cross_shot_color_std(scene.prompt, alone));
  }
  std::vector<double> j;
  std::vector<double> ind;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (std::isfinite(report.joint[i]) && std::isfinite(report.independent[i])) {
      j.push_back(report.joint[i]);
      ind.push_back(report.independent[i]);
    }
  }
  report.measured = static_cast<int>(j.size());
  report.joint_mean = mean_finite(j);
  report.independent_mean = mean_finite(ind);
  return report;
}

ArConsistency eval_ar_consistency(const ModelWeights<float>& weights, const TrainConfig& config,
                                  const std::vector<SceneSample>& suite, int steps, double history_tc,
                                  std::uint64_t seed) {
  const ModelField field(weights, AttentionMode::kContextCausal);
  std::vector<double> stds;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    auto req = scene_request(config, suite[i], steps, SampleMode::kAutoRegressive, derive_seed({seed, i, kArTag}));
    req.history_tc = history_tc;
    stds.push_back(cross_shot_color_std(suite[i].prompt, shot_latents(euler_sample(field, req))));
  }
  ArConsistency out;
  out.color_std = mean_finite(stds);
  out.measured = static_cast<int>(std::count_if(stds.begin(), stds.end(), [](double v) { return std::isfinite(v); }));
  return out;
}

nlohmann::json to_json(const TcSweepReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < r.tc.size(); ++i) {
    points.push_back({{"t_c", r.tc[i]},
                      {"mean_error", finite_or_null(r.mean_error[i])},
                      {"penalized_mean_error", r.penalized_mean_error[i]},
                      {"missing", r.missing[i]},
                      {"trials", r.errors[i].size()}});
  }
  return {{"suite", "tc-sweep"}, {"paired_trials", r.paired}, {"points", points}};
}

TcSweepReport eval_tc_sweep(const ModelWeights<float>& weights, const TrainConfig& config,
                            const std::vector<double>& tcs, int trials, int steps, std::uint64_t seed) {
  const ModelField field(weights, AttentionMode::kBidirectional);
  TcSweepReport report;
  report.tc = tcs;
  report.errors.assign(tcs.size(), {});
  report.missing.assign(tcs.size(), 0);
  const auto suite = consistency_suite(config.scene, trials, 2, derive_seed({seed, kTcTag}));
  for (int i = 0; i < trials; ++i) {
    const auto& scene = suite[static_cast<std::size_t>(i)];
    const int subject = *scene.prompt.shots[0].subject;
    const auto source = extract_attributes(scene.shots[0]);
    const auto src_it = source.characters.find(subject);
    if (src_it == source.characters.end()) throw ContractError("tc sweep: rendered source lacks its subject");
    for (std::size_t c = 0; c < tcs.size(); ++c) {
      auto req = scene_request(config, scene, steps, SampleMode::kConditioned,
                               derive_seed({seed, static_cast<std::uint64_t>(i), kTcTag}));
      req.conditions.shots[1] = ConditionSource{scene.shots[0], tcs[c], derive_seed({seed, static_cast<std::uint64_t>(i), 77})};
      const auto out = euler_sample(field, req);
      const auto attrs = extract_attributes(out.shots[2]);
      const auto it = attrs.characters.find(subject);
      double err = std::numeric_limits<double>::quiet_NaN();
      if (it == attrs.characters.end()) {
        ++report.missing[c];
      } else {
        err = static_cast<double>((it->second.color - src_it->second.color).cwiseAbs().mean());
      }
      report.errors[c].push_back(err);
    }
  }
  std::vector<bool> paired(static_cast<std::size_t>(trials), true);
  for (const auto& e : report.errors)
    for (int i = 0; i < trials; ++i) paired[static_cast<std::size_t>(i)] = paired[static_cast<std::size_t>(i)] && std::isfinite(e[static_cast<std::size_t>(i)]);
  report.paired = static_cast<int>(std::count(paired.begin(), paired.end(), true));
  for (const auto& e : report.errors) {
    double sum = 0.0;
    double penalized = 0.0;
    for (int i = 0; i < trials; ++i) {
      const double v = e[static_cast<std::size_t>(i)];
      if (paired[static_cast<std::size_t>(i)]) sum += v;
      penalized += std::isfinite(v) ? v : 1.0;
    }
    report.mean_error.push_back(report.paired > 0 ? sum / report.paired : std::numeric_limits<double>::quiet_NaN());
    report.penalized_mean_error.push_back(penalized / trials);
  }
  return report;
}

double eval_single_shot_loss(const ModelWeights<float>& weights, AttentionMode mode, const TrainConfig& config,
                             int samples, std::uint64_t seed) {
  NoGradGuard no_grad;
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(i), kSingleTag}));
    const auto scene = generate_scene(config.scene, rng);
    SceneBatch batch;
    batch.layout.shots = {global_group(config.scene.global_text_len)};
    auto shot = shot_for_latent(scene.shots[0], config.model, config.scene.shot_text_len);
    shot.shot_cut = scene.prompt.shots[0].shot_cut;
    batch.layout.shots.push_back(shot);
    const auto ids = encode_prompt(scene.prompt, config.scene);
    batch.prompt_ids = {ids[0], ids[1]};
    batch.z0 = {global_dummy_latent(config.model), scene.shots[0]};
    draw_noise(batch, config.timestep_mu, config.timestep_sigma, rng);
    total += static_cast<double>(scene_loss(weights, batch, mode).loss.item());
  }
  return total / samples;
}

nlohmann::json to_json(const AccumulationReport& r) {
  return {{"suite", "accumulation"}, {"history_tc", r.history_tc}, {"residual", r.residual}, {"slope", r.slope}};
}

AccumulationReport eval_accumulation(const ModelWeights<float>& weights, const TrainConfig& config, int shots,
                                     double history_tc, int trials, int steps, std::uint64_t seed) {
  const ModelField field(weights, AttentionMode::kContextCausal);
  const auto suite = consistency_suite(config.scene, trials, shots, derive_seed({seed, kAccumulationTag}));
  AccumulationReport report;
  report.history_tc = history_tc;
  report.residual.assign(static_cast<std::size_t>(shots), 0.0);
  NoGradGuard no_grad;
  for (int i = 0; i < trials; ++i) {
    const auto& scene = suite[static_cast<std::size_t>(i)];
    auto req = scene_request(config, scene, steps, SampleMode::kAutoRegressive,
                             derive_seed({seed, static_cast<std::uint64_t>(i), kAccumulationTag}));
    req.history_tc = history_tc;
    const auto out = euler_sample(field, req);
    const auto ids = encode_prompt(scene.prompt, config.scene);
    for (int k = 0; k < shots; ++k) {
      const auto& z = out.shots[static_cast<std::size_t>(k + 1)];
      std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k), 99}));
      SceneBatch batch;
      batch.layout.shots = {req.layout.shots[0], req.layout.shots[static_cast<std::size_t>(k + 1)]};
      batch.prompt_ids = {ids[0], ids[static_cast<std::size_t>(k + 1)]};
      batch.z0 = {global_dummy_latent(config.model), z};
      batch.eps = {global_dummy_latent(config.model), gaussian_like(z, rng)};
      batch.t_shots = {0.0, 0.5};
      report.residual[static_cast<std::size_t>(k)] +=
          static_cast<double>(scene_loss(weights, batch, AttentionMode::kContextCausal).loss.item()) / trials;
    }
  }
  const double n = shots;
  const double xbar = (n - 1.0) / 2.0;
  const double ybar = std::accumulate(report.residual.begin(), report.residual.end(), 0.0) / n;
  double num = 0.0;
  double den = 0.0;
  for (int k = 0; k < shots; ++k) {
    num += (k - xbar) * (report.residual[static_cast<std::size_t>(k)] - ybar);
    den += (k - xbar) * (k - xbar);
  }
  report.slope = den > 0.0 ? num / den : 0.0;
  return report;
}

}  // namespace lct
