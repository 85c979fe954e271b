// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Versioned binary checkpoint container.
//
//   magic        8 bytes  "LCTCKPT\0"
//   version      u32      (currently 1)
//   mode         u32      0 = bidirectional, 1 = context-causal
//   step         u64      training step within the current phase
//   adam_step    u64
//   config_hash  u64      FNV-1a of the canonical config JSON
//   config       u32 length + UTF-8 JSON
//   blob_count   u32
//   blobs        { u32 name length, name, u32 rows, u32 cols, rows*cols f32 }
//   checksum     u64      FNV-1a over every preceding byte
//
// Blob names: "weights/<param>", "adam.m/<param>", "adam.v/<param>". All
// integers and floats are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lct/config.hpp"
#include "lct/mmdit.hpp"
#include "lct/optimizer.hpp"

namespace lct {

inline constexpr char kCheckpointMagic[8] = {'L', 'C', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  ModelWeights<float> weights;
  AdamState<float> optimizer;
  long step = 0;
  AttentionMode mode = AttentionMode::kBidirectional;

  std::uint64_t config_hash() const { return lct::config_hash(config); }
};

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<char>& bytes, const std::string& what = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lct
