// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian byte buffers for the checkpoint and corpus containers.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lct/errors.hpp"

namespace lct {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u16(std::uint16_t v) { bytes(&v, sizeof v); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void floats(const float* data, std::size_t n) { bytes(data, n * sizeof(float)); }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  const std::vector<char>& buffer() const { return buf_; }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size, std::string what) : data_(data), size_(size), what_(std::move(what)) {}

  void bytes(void* out, std::size_t n) {
    if (n > size_ - pos_) throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  std::uint16_t u16() { return read<std::uint16_t>(); }
  std::uint32_t u32() { return read<std::uint32_t>(); }
  std::uint64_t u64() { return read<std::uint64_t>(); }
  float f32() { return read<float>(); }
  void floats(float* out, std::size_t n) {
    if (n > (size_ - pos_) / sizeof(float)) throw FormatError(what_ + ": truncated float payload");
    bytes(out, n * sizeof(float));
  }
  std::string string(std::size_t max_len = 1u << 24) {
    const auto n = u32();
    if (n > max_len) throw FormatError(what_ + ": string length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }
  const std::string& what() const { return what_; }

 private:
  template <typename T>
  T read() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<char> read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace lct
