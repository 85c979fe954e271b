// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic scene corpus on disk.
//
// A corpus directory holds shard files "scenes-NNNNN.lct" and "manifest.json".
// Shard layout (little-endian):
//
//   magic     8 bytes "LCTSCENE"
//   version   u32 (currently 1)
//   count     u32 records in this shard
//   records   { u32 length + JSON header, u32 float count, float payload }
//   checksum  u64 FNV-1a over every preceding byte
//
// The JSON header carries the prompt token ids, the structured prompt, world
// attributes (provenance), motions and per-shot latent dimensions; the
// payload is every shot's latent data concatenated in shot order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "lct/scenegen.hpp"

namespace lct {

inline constexpr char kCorpusMagic[8] = {'L', 'C', 'T', 'S', 'C', 'E', 'N', 'E'};
inline constexpr std::uint32_t kCorpusVersion = 1;

struct Corpus {
  SceneConfig config;
  std::uint64_t seed = 0;
  std::vector<SceneSample> scenes;
};

// Scene i is generated from its own stream seeded by (seed, i), so corpora
// of different sizes share a prefix and generation could be split freely.
Corpus generate_corpus(const SceneConfig& config, int count, std::uint64_t seed);

nlohmann::json scene_header(const SceneSample& scene, const SceneConfig& config);

// Writes shards of at most `shard_size` scenes plus the manifest.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, int shard_size = 256);
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace lct
