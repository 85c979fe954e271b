// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/checkpoint.hpp"

#include <fstream>
#include <map>

#include "lct/binary_io.hpp"

namespace lct {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size))) {
    throw FormatError("failed reading " + path.string());
  }
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

void write_blob(ByteWriter& w, const std::string& name, const Matrix<float>& m) {
  w.string(name);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.floats(m.data(), static_cast<std::size_t>(m.size()));
}

}  // namespace

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(ckpt.mode == AttentionMode::kBidirectional ? 0u : 1u);
  w.u64(static_cast<std::uint64_t>(ckpt.step));
  w.u64(static_cast<std::uint64_t>(ckpt.optimizer.step));
  w.u64(ckpt.config_hash());
  w.string(to_json(ckpt.config).dump());

  const auto params = ckpt.weights.parameters();
  const bool with_adam = !ckpt.optimizer.m.empty();
  if (with_adam && (ckpt.optimizer.m.size() != params.size() || ckpt.optimizer.v.size() != params.size())) {
    throw ContractError("checkpoint: optimizer state does not match the parameter list");
  }
  w.u32(static_cast<std::uint32_t>(params.size() * (with_adam ? 3 : 1)));
  for (const auto& [name, t] : params) write_blob(w, "weights/" + name, t.value());
  if (with_adam) {
    for (std::size_t i = 0; i < params.size(); ++i) write_blob(w, "adam.m/" + params[i].first, ckpt.optimizer.m[i]);
    for (std::size_t i = 0; i < params.size(); ++i) write_blob(w, "adam.v/" + params[i].first, ckpt.optimizer.v[i]);
  }
  const auto& buf = w.buffer();
  w.u64(fnv1a(buf.data(), buf.size()));
  return w.buffer();
}

Checkpoint deserialize_checkpoint(const std::vector<char>& bytes, const std::string& what) {
  if (bytes.size() < sizeof kCheckpointMagic + 8) throw FormatError(what + ": file too small");
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (fnv1a(bytes.data(), bytes.size() - 8) != stored) throw FormatError(what + ": checksum mismatch");

  ByteReader r(bytes.data(), bytes.size() - 8, what);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError(what + ": bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  const auto mode = r.u32();
  if (mode > 1) throw FormatError(what + ": unknown attention mode " + std::to_string(mode));

  Checkpoint ckpt;
  ckpt.mode = mode == 0 ? AttentionMode::kBidirectional : AttentionMode::kContextCausal;
  ckpt.step = static_cast<long>(r.u64());
  ckpt.optimizer.step = static_cast<long>(r.u64());
  const auto hash = r.u64();
  try {
    ckpt.config = train_config_from_json(nlohmann::json::parse(r.string()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": embedded config is not valid JSON: " + e.what());
  }
  if (ckpt.config_hash() != hash) throw FormatError(what + ": config hash mismatch");

  std::map<std::string, Matrix<float>> blobs;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.string(4096);
    const auto rows = r.u32();
    const auto cols = r.u32();
    Matrix<float> m(rows, cols);
    r.floats(m.data(), static_cast<std::size_t>(m.size()));
    if (!blobs.emplace(std::move(name), std::move(m)).second) throw FormatError(what + ": duplicate blob name");
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes before checksum");

  ckpt.weights = init_model<float>(ckpt.config.model, 0, InitScheme::kAdaLnZero);
  auto params = ckpt.weights.parameters();
  auto take = [&](const std::string& name, Index rows, Index cols) -> Matrix<float> {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw FormatError(what + ": missing blob " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw FormatError(what + ": blob " + name + " has shape " + shape_string(it->second.rows(), it->second.cols()) +
                        ", expected " + shape_string(rows, cols));
    }
    return std::move(it->second);
  };
  for (auto& [name, t] : params) t.mutable_value() = take("weights/" + name, t.rows(), t.cols());
  if (blobs.count("adam.m/" + params.front().first)) {
    for (auto& [name, t] : params) ckpt.optimizer.m.push_back(take("adam.m/" + name, t.rows(), t.cols()));
    for (auto& [name, t] : params) ckpt.optimizer.v.push_back(take("adam.v/" + name, t.rows(), t.cols()));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path), path.string());
}

}  // namespace lct
