#pragma once

#include "vq/types.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace vq {

// Little-endian byte building/parsing for the WTS and VQM containers.
// The host is assumed little-endian for f32 payloads; integer fields are
// assembled bytewise so they are endian-safe either way.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
  }
  void raw(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + len);
  }
  void f32_row_major(const MatF& m) {
    static_assert(sizeof(float) == 4);
    raw(m.data(), static_cast<std::size_t>(m.size()) * 4);  // row-major storage
  }

  std::size_t size() const { return buf_.size(); }

  std::uint32_t crc32_all() const { return crc32_range(0, buf_.size()); }
  std::uint32_t crc32_range(std::size_t begin, std::size_t end) const {
    return static_cast<std::uint32_t>(
        ::crc32(0L, buf_.data() + begin, static_cast<uInt>(end - begin)));
  }

  std::vector<std::uint8_t> take() && { return std::move(buf_); }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : buf_(bytes) {}

  std::uint8_t u8(const char* what) {
    need(1, what);
    return buf_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(buf_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }
  void raw(void* dst, std::size_t len, const char* what) {
    need(len, what);
    std::memcpy(dst, buf_.data() + pos_, len);
    pos_ += len;
  }
  std::string str(std::size_t len, const char* what) {
    need(len, what);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  void f32_row_major(MatF& m, const std::string& what) {
    need(static_cast<std::size_t>(m.size()) * 4, what.c_str());
    std::memcpy(m.data(), buf_.data() + pos_, static_cast<std::size_t>(m.size()) * 4);
    pos_ += static_cast<std::size_t>(m.size()) * 4;
  }

  std::size_t pos() const { return pos_; }
  bool exhausted() const { return pos_ == buf_.size(); }

  std::uint32_t crc32_prefix(std::size_t len) const { return crc32_range(0, len); }
  std::uint32_t crc32_range(std::size_t begin, std::size_t end) const {
    return static_cast<std::uint32_t>(
        ::crc32(0L, buf_.data() + begin, static_cast<uInt>(end - begin)));
  }

 private:
  void need(std::size_t len, const char* what) const {
    if (pos_ + len > buf_.size())
      throw IoError(std::string("truncated input while reading ") + what);
  }

  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failure on '" + path + "'");
  return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failure on '" + path + "'");
}

}  // namespace vq
