// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/sampling_io.hpp"

#include <cstdio>

#include "lct/binary_io.hpp"
#include "lct/latent_io.hpp"
#include "lct/prompt_json.hpp"
#include "lct/seeding.hpp"

namespace lct {

using nlohmann::json;

PromptDocument parse_prompt_document(const json& j) {
  PromptDocument doc;
  doc.prompt = structured_prompt_from_json(j);
  if (doc.prompt.shots.empty()) throw VocabularyError("prompt document has no shots");
  for (const auto& [k, v] : j.items()) {
    if (k != "global" && k != "shots" && k != "conditions" && k != "texture_seed") {
      throw VocabularyError("prompt document has unknown key \"" + k + "\"");
    }
  }
  if (const auto it = j.find("texture_seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw VocabularyError("texture_seed must be a non-negative integer");
    doc.texture_seed = it->get<std::uint64_t>();
  }
  if (const auto it = j.find("conditions"); it != j.end()) {
    if (!it->is_array()) throw VocabularyError("conditions must be an array");
    for (const auto& c : *it) {
      if (!c.is_object() || !c.contains("shot") || !c.at("shot").is_number_integer()) {
        throw VocabularyError("each condition needs an integer \"shot\"");
      }
      const int shot = c.at("shot").get<int>();
      if (shot < 0 || shot >= static_cast<int>(doc.prompt.shots.size())) {
        throw VocabularyError("condition shot " + std::to_string(shot) + " is out of range");
      }
      PromptCondition pc;
      if (c.contains("t_c")) {
        if (!c.at("t_c").is_number()) throw VocabularyError("t_c must be a number");
        pc.t_c = c.at("t_c").get<double>();
      }
      if (c.contains("motion")) {
        const auto& m = c.at("motion");
        if (!m.is_array() || m.size() != 2 || !m[0].is_number_integer() || !m[1].is_number_integer()) {
          throw VocabularyError("motion must be [x0, y0]");
        }
        pc.motion = {m[0].get<int>(), m[1].get<int>()};
      }
      if (!doc.conditions.emplace(shot, pc).second) {
        throw VocabularyError("shot " + std::to_string(shot) + " conditioned twice");
      }
    }
  }
  return doc;
}

SampleRequest prompt_request(const TrainConfig& config, const PromptDocument& doc, SampleMode mode,
                             std::uint64_t seed, std::optional<int> steps) {
  if (mode == SampleMode::kJoint && !doc.conditions.empty()) {
    throw ConfigError("the prompt has conditions; use --mode cond");
  }
  if (mode == SampleMode::kConditioned && doc.conditions.empty()) {
    throw ConfigError("--mode cond needs at least one condition in the prompt file");
  }
  const World world = world_from_prompt(doc.prompt.global, doc.texture_seed);
  std::vector<Latent> shapes(doc.prompt.shots.size(), Latent(config.model.latent_channels, config.scene.height,
                                                             config.scene.width, config.scene.frames));
  SampleRequest req;
  req.layout = scene_layout(config.scene, config.model, doc.prompt, shapes);
  req.prompt_ids = encode_prompt(doc.prompt, config.scene);
  req.steps = steps.value_or(config.sampling.steps);
  req.mode = mode;
  req.seed = seed;
  req.history_tc = config.sampling.history_tc;
  for (const auto& [shot, c] : doc.conditions) {
    const auto& p = doc.prompt.shots[static_cast<std::size_t>(shot)];
    const auto source_seed = derive_seed({seed, static_cast<std::uint64_t>(shot), 0x72656eu});
    req.conditions.shots[shot + 1] =
        ConditionSource{render_shot(world, p, c.motion, config.scene, source_seed), c.t_c,
                        derive_seed({seed, static_cast<std::uint64_t>(shot), 0x6e6f6973u})};
  }
  return req;
}

json sample_to_directory(const Checkpoint& ckpt, const PromptDocument& doc, SampleMode mode, std::uint64_t seed,
                         std::optional<int> steps, const std::filesystem::path& dir) {
  const auto req = prompt_request(ckpt.config, doc, mode, seed, steps);
  const ModelField field(ckpt.weights, ckpt.mode);
  const auto result = euler_sample(field, req);

  std::filesystem::create_directories(dir);
  json shots = json::array();
  for (std::size_t k = 1; k < result.shots.size(); ++k) {
    const auto& z = result.shots[k];
    const int index = static_cast<int>(k) - 1;
    char name[64];
    std::snprintf(name, sizeof name, "shot-%d.lat", index);
    save_latent(dir / name, z);
    json frames = json::array();
    for (int f = 0; f < z.frames; ++f) {
      char image[64];
      std::snprintf(image, sizeof image, "shot-%d-frame-%d.bmp", index, f);
      write_file_atomic(dir / image, encode_bmp(z, f, 8));
      frames.push_back(image);
    }
    const auto attrs = extract_attributes(z);
    json characters = json::object();
    for (const auto& [id, r] : attrs.characters) {
      characters[std::to_string(id)] = {{"color", {r.color[0], r.color[1], r.color[2]}}, {"pixels", r.pixels}};
    }
    shots.push_back({{"index", index},
                     {"generated", static_cast<bool>(result.generated[k])},
                     {"prompt", to_json(doc.prompt.shots[static_cast<std::size_t>(index)])},
                     {"latent", name},
                     {"frames", frames},
                     {"attributes",
                      {{"background", {attrs.background[0], attrs.background[1], attrs.background[2]}},
                       {"characters", characters}}}});
  }
  json summary{{"mode", to_string(mode)}, {"seed", seed}, {"steps", req.steps}, {"global", to_json(doc.prompt.global)},
               {"shots", shots}};
  const std::string text = summary.dump(2) + "\n";
  write_file_atomic(dir / "sample.json", std::vector<char>(text.begin(), text.end()));
  return summary;
}

}  // namespace lct
