// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/corpus.hpp"

#include <cstdio>
#include <fstream>

#include "lct/binary_io.hpp"
#include "lct/config.hpp"

namespace lct {

namespace {

using nlohmann::json;

json color_json(const Color& c) { return json::array({c[0], c[1], c[2]}); }

Color color_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("corpus: color must be a 3-element array");
  return Color(j[0].get<float>(), j[1].get<float>(), j[2].get<float>());
}

std::string shard_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scenes-%05d.lct", index);
  return buf;
}

}  // namespace

Corpus generate_corpus(const SceneConfig& config, int count, std::uint64_t seed) {
  config.validate();
  if (count < 0) throw ConfigError("corpus count must be >= 0");
  Corpus corpus;
  corpus.config = config;
  corpus.seed = seed;
  corpus.scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    corpus.scenes.push_back(generate_scene(config, rng));
  }
  return corpus;
}

nlohmann::json scene_header(const SceneSample& scene, const SceneConfig& config) {
  json characters = json::array();
  for (const auto& c : scene.world.characters) {
    characters.push_back({{"id", c.id}, {"palette", c.palette}, {"color", color_json(c.color)}, {"size", c.size}});
  }
  json motions = json::array();
  for (const auto& m : scene.motions) motions.push_back(json::array({m.x0, m.y0}));
  json shots = json::array();
  for (const auto& z : scene.shots) {
    shots.push_back({{"channels", z.channels}, {"height", z.height}, {"width", z.width}, {"frames", z.frames}});
  }
  return {{"prompt_ids", encode_prompt(scene.prompt, config)},
          {"continuous", scene.continuous},
          {"world",
           {{"characters", characters},
            {"environment",
             {{"palette", scene.world.environment.palette},
              {"background", color_json(scene.world.environment.background)},
              {"texture_seed", scene.world.environment.texture_seed}}},
            {"story", scene.world.story}}},
          {"motions", motions},
          {"shots", shots}};
}

namespace {

SceneSample scene_from_record(const json& h, ByteReader& r) {
  SceneSample s;
  s.prompt = decode_prompt(h.at("prompt_ids").get<std::vector<std::vector<int>>>());
  s.continuous = h.at("continuous").get<bool>();
  const auto& w = h.at("world");
  for (const auto& c : w.at("characters")) {
    Character ch;
    ch.id = c.at("id").get<int>();
    ch.palette = c.at("palette").get<int>();
    ch.color = color_from(c.at("color"));
    ch.size = c.at("size").get<int>();
    s.world.characters.push_back(ch);
  }
  const auto& env = w.at("environment");
  s.world.environment.palette = env.at("palette").get<int>();
  s.world.environment.background = color_from(env.at("background"));
  s.world.environment.texture_seed = env.at("texture_seed").get<std::uint64_t>();
  s.world.story = w.at("story").get<int>();
  for (const auto& m : h.at("motions")) s.motions.push_back({m.at(0).get<int>(), m.at(1).get<int>()});

  std::size_t expected = 0;
  for (const auto& d : h.at("shots")) {
    s.shots.emplace_back(d.at("channels").get<int>(), d.at("height").get<int>(), d.at("width").get<int>(),
                         d.at("frames").get<int>());
    expected += static_cast<std::size_t>(s.shots.back().size());
  }
  if (s.shots.size() != s.prompt.shots.size() || s.motions.size() != s.shots.size()) {
    throw FormatError(r.what() + ": record shot lists disagree");
  }
  const auto n = r.u32();
  if (n != expected) throw FormatError(r.what() + ": payload has " + std::to_string(n) + " floats, header implies " +
                                       std::to_string(expected));
  for (auto& z : s.shots) r.floats(z.data.data(), static_cast<std::size_t>(z.size()));
  return s;
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, int shard_size) {
  if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
  std::filesystem::create_directories(dir);
  json shards = json::array();
  const int total = static_cast<int>(corpus.scenes.size());
  // An empty corpus still gets one (empty) shard.
  for (int index = 0, begin = 0; index == 0 || begin < total; ++index, begin += shard_size) {
    const int end = std::min(total, begin + shard_size);
    ByteWriter w;
    w.bytes(kCorpusMagic, sizeof kCorpusMagic);
    w.u32(kCorpusVersion);
    w.u32(static_cast<std::uint32_t>(end - begin));
    for (int i = begin; i < end; ++i) {
      const auto& scene = corpus.scenes[static_cast<std::size_t>(i)];
      w.string(scene_header(scene, corpus.config).dump());
      std::size_t n = 0;
      for (const auto& z : scene.shots) n += static_cast<std::size_t>(z.size());
      w.u32(static_cast<std::uint32_t>(n));
      for (const auto& z : scene.shots) w.floats(z.data.data(), static_cast<std::size_t>(z.size()));
    }
    const auto& buf = w.buffer();
    w.u64(fnv1a(buf.data(), buf.size()));
    const auto name = shard_name(index);
    write_file_atomic(dir / name, w.buffer());
    shards.push_back({{"file", name}, {"count", end - begin}});
  }
  const json manifest{{"format", "lct-corpus"}, {"version", kCorpusVersion}, {"count", total},
                      {"seed", corpus.seed},    {"scene", to_json(corpus.config)}, {"shards", shards}};
  const std::string text = manifest.dump(2) + "\n";
  write_file_atomic(dir / "manifest.json", std::vector<char>(text.begin(), text.end()));
}

Corpus read_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw ConfigError("no corpus manifest at " + manifest_path.string());
  json manifest;
  try {
    std::ifstream in(manifest_path);
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("corpus manifest is not valid JSON: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "lct-corpus") throw FormatError("not an lct corpus manifest");
  if (manifest.value("version", 0u) != kCorpusVersion) throw FormatError("unsupported corpus version");
  Corpus corpus;
  corpus.config = scene_config_from_json(manifest.at("scene"));
  corpus.seed = manifest.at("seed").get<std::uint64_t>();
  for (const auto& shard : manifest.at("shards")) {
    const auto path = dir / shard.at("file").get<std::string>();
    const auto bytes = read_file(path);
    if (bytes.size() < sizeof kCorpusMagic + 16) throw FormatError(path.string() + ": file too small");
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (fnv1a(bytes.data(), bytes.size() - 8) != stored) throw FormatError(path.string() + ": checksum mismatch");
    ByteReader r(bytes.data(), bytes.size() - 8, path.string());
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kCorpusMagic, 8) != 0) throw FormatError(path.string() + ": bad magic");
    if (r.u32() != kCorpusVersion) throw FormatError(path.string() + ": unsupported version");
    const auto count = r.u32();
    if (count != shard.at("count").get<std::uint32_t>()) throw FormatError(path.string() + ": count disagrees with manifest");
    for (std::uint32_t i = 0; i < count; ++i) {
      json header;
      try {
        header = json::parse(r.string());
        corpus.scenes.push_back(scene_from_record(header, r));
      } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed record header: " + e.what());
      }
    }
    if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  }
  if (static_cast<int>(corpus.scenes.size()) != manifest.at("count").get<int>()) {
    throw FormatError("corpus: manifest count disagrees with shard contents");
  }
  return corpus;
}

}  // namespace lct
