#pragma once

// Little-endian binary encoding shared by the index, vector and model files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrm/error.hpp"

namespace lrm {

class BinaryWriter {
 public:
  void put_bytes(std::string_view bytes) { buf_.append(bytes); }

  void put_u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) put_u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) put_u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

  /// u32 length prefix followed by the raw UTF-8 bytes.
  void put_string(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }

  void put_varint(std::uint64_t v) {
    while (v >= 0x80) {
      put_u8(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    put_u8(static_cast<std::uint8_t>(v));
  }

  const std::string& bytes() const { return buf_; }
  std::string release() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::string buf_;
};

/// Bounds-checked reader; every overrun throws FormatError.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  std::string_view get_bytes(std::size_t n) {
    require(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t get_u8() {
    require(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::uint32_t get_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }

  std::uint64_t get_u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }

  float get_f32() { return std::bit_cast<float>(get_u32()); }
  double get_f64() { return std::bit_cast<double>(get_u64()); }

  std::string get_string() {
    auto n = get_u32();
    return std::string(get_bytes(n));
  }

  std::uint64_t get_varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      auto byte = get_u8();
      v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
      if ((byte & 0x80) == 0) return v;
    }
    throw FormatError("varint overflow");
  }

  /// Element count read from the file, validated against the bytes left.
  std::uint64_t get_count(std::size_t min_element_bytes) {
    auto n = get_u64();
    if (min_element_bytes > 0 && n > remaining() / min_element_bytes)
      throw FormatError("truncated file: element count exceeds data");
    return n;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  void expect_end() const {
    if (!at_end()) throw FormatError("trailing bytes after payload");
  }

 private:
  void require(std::size_t n) const {
    if (n > data_.size() - pos_) throw FormatError("truncated file");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

/// FNV-1a, 64 bit.
inline std::uint64_t checksum64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// File layout: magic(4) | version u32 | body | checksum u64 over body.
std::string frame_with_checksum(std::string_view magic, std::uint32_t version,
                                std::string_view body);

/// Validates magic, version and checksum; returns the body.
std::string_view unframe_with_checksum(std::string_view file, std::string_view magic,
                                       std::uint32_t version);

std::string read_file(const std::string& path);

/// Writes to a sibling temporary file then renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view data);

}  // namespace lrm
