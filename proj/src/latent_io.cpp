// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/latent_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lct/binary_io.hpp"
#include "lct/config.hpp"

namespace lct {

namespace {

constexpr char kLatentMagic[8] = {'L', 'C', 'T', 'L', 'A', 'T', 'N', 'T'};
constexpr std::uint32_t kLatentVersion = 1;
constexpr int kMaxDim = 1 << 16;

}  // namespace

std::vector<char> serialize_latent(const Latent& z) {
  ByteWriter w;
  w.bytes(kLatentMagic, sizeof kLatentMagic);
  w.u32(kLatentVersion);
  w.u32(static_cast<std::uint32_t>(z.channels));
  w.u32(static_cast<std::uint32_t>(z.height));
  w.u32(static_cast<std::uint32_t>(z.width));
  w.u32(static_cast<std::uint32_t>(z.frames));
  w.floats(z.data.data(), static_cast<std::size_t>(z.size()));
  const auto& buf = w.buffer();
  w.u64(fnv1a(buf.data(), buf.size()));
  return w.buffer();
}

Latent deserialize_latent(const std::vector<char>& bytes, const std::string& what) {
  if (bytes.size() < sizeof kLatentMagic + 28) throw FormatError(what + ": file too small");
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (fnv1a(bytes.data(), bytes.size() - 8) != stored) throw FormatError(what + ": checksum mismatch");
  ByteReader r(bytes.data(), bytes.size() - 8, what);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kLatentMagic, 8) != 0) throw FormatError(what + ": bad magic");
  if (r.u32() != kLatentVersion) throw FormatError(what + ": unsupported version");
  int dims[4];
  for (int& d : dims) {
    const auto v = r.u32();
    if (v == 0 || v > kMaxDim) throw FormatError(what + ": implausible dimension " + std::to_string(v));
    d = static_cast<int>(v);
  }
  Latent z(dims[0], dims[1], dims[2], dims[3]);
  r.floats(z.data.data(), static_cast<std::size_t>(z.size()));
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
  return z;
}

void save_latent(const std::filesystem::path& path, const Latent& z) { write_file_atomic(path, serialize_latent(z)); }

Latent load_latent(const std::filesystem::path& path) { return deserialize_latent(read_file(path), path.string()); }

std::vector<char> encode_bmp(const Latent& z, int frame, int scale) {
  if (z.channels < 3) throw ShapeError("encode_bmp: latent needs at least three color channels");
  if (frame < 0 || frame >= z.frames) {
    throw DomainError("frame " + std::to_string(frame) + " outside [0, " + std::to_string(z.frames) + ")");
  }
  if (scale < 1 || scale > 64) throw DomainError("image scale must be in [1, 64]");
  const int width = z.width * scale;
  const int height = z.height * scale;
  const int row_bytes = (3 * width + 3) / 4 * 4;
  const std::uint32_t pixel_bytes = static_cast<std::uint32_t>(row_bytes) * static_cast<std::uint32_t>(height);

  ByteWriter w;
  w.bytes("BM", 2);
  w.u32(54 + pixel_bytes);
  w.u32(0);
  w.u32(54);
  w.u32(40);  // BITMAPINFOHEADER
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(height));
  w.u16(1);
  w.u16(24);
  w.u32(0);
  w.u32(pixel_bytes);
  w.u32(2835);
  w.u32(2835);
  w.u32(0);
  w.u32(0);

  auto byte = [](float v) {
    const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
    return static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f)));
  };
  std::vector<char> row(static_cast<std::size_t>(row_bytes), 0);
  // Rows are stored bottom-up.
  for (int py = height - 1; py >= 0; --py) {
    const int y = py / scale;
    for (int px = 0; px < width; ++px) {
      const int x = px / scale;
      const auto o = static_cast<std::size_t>(3 * px);
      row[o] = byte(z.at(2, y, x, frame));
      row[o + 1] = byte(z.at(1, y, x, frame));
      row[o + 2] = byte(z.at(0, y, x, frame));
    }
    w.bytes(row.data(), row.size());
  }
  return w.buffer();
}

}  // namespace lct
