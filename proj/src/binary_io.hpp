#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "bertgram/error.hpp"

namespace bertgram::detail {

class ByteWriter {
 public:
  void magic(std::string_view tag) { out_.append(tag); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::string& bytes() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string_view format) : bytes_(bytes), format_(format) {}

  void expect_magic(std::string_view tag) {
    need(tag.size(), "magic");
    if (bytes_.substr(pos_, tag.size()) != tag) {
      throw FormatError(std::string(format_) + ": bad magic (expected \"" + std::string(tag) + "\")");
    }
    pos_ += tag.size();
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(const char* what) { return get(8, what); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw FormatError(std::string(format_) + ": " + std::to_string(remaining()) +
                        " trailing bytes at offset " + std::to_string(pos_));
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(std::string(format_) + ": " + what + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string(format_) + ": truncated file reading " + what + " at offset " +
                        std::to_string(pos_));
    }
  }
  std::uint64_t get(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    return v;
  }

  std::string_view bytes_;
  std::string_view format_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace bertgram::detail
