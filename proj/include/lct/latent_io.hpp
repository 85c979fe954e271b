// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Latent files and frame images.
//
// Latent file: "LCTLATNT", u32 version, u32 channels, height, width, frames,
// f32 data in storage order, u64 FNV-1a of everything before it.
//
// Frame images are 24-bit uncompressed BMP: channels 0..2 map to R, G, B,
// clamped to [0, 1] and rounded to 8 bits; each latent cell becomes a
// scale x scale pixel block.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lct/latent.hpp"

namespace lct {

std::vector<char> serialize_latent(const Latent& z);
Latent deserialize_latent(const std::vector<char>& bytes, const std::string& what = "latent");
void save_latent(const std::filesystem::path& path, const Latent& z);
Latent load_latent(const std::filesystem::path& path);

// Throws DomainError if `frame` is outside [0, frames) or scale < 1, and
// ShapeError if the latent has fewer than three channels.
std::vector<char> encode_bmp(const Latent& z, int frame, int scale = 1);

}  // namespace lct
