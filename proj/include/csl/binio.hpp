#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "csl/error.hpp"

// Little-endian byte buffers for the binary formats (checkpoint, feature
// store, raw clips).
namespace csl::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f32s(const float* p, std::size_t n) { bytes(p, n * sizeof(float)); }

  const std::vector<char>& buffer() const { return buf_; }
  std::vector<char> take() { return std::move(buf_); }

 private:
  std::vector<char> buf_;
};

// Bounds-checked reader; every failure is a FormatError carrying the offset.
class Reader {
 public:
  explicit Reader(const std::vector<char>& buf) : buf_(buf) {}

  std::uint64_t offset() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void expect_magic(std::string_view m, const char* what) {
    need(m.size(), what);
    if (std::memcmp(buf_.data() + pos_, m.data(), m.size()) != 0) {
      throw FormatError(std::string("bad magic for ") + what, pos_);
    }
    pos_ += m.size();
  }
  std::uint8_t u8(const char* what) { return scalar<std::uint8_t>(what); }
  std::uint16_t u16(const char* what) { return scalar<std::uint16_t>(what); }
  std::uint32_t u32(const char* what) { return scalar<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return scalar<std::uint64_t>(what); }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void f32s(float* out, std::size_t n, const char* what) {
    if (n > remaining() / sizeof(float)) throw FormatError(std::string("truncated ") + what, pos_);
    std::memcpy(out, buf_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  void expect_end(const char* what) {
    if (!at_end()) throw FormatError(std::string("trailing bytes after ") + what, pos_);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > remaining()) throw FormatError(std::string("truncated ") + what, pos_);
  }

  template <typename U>
  U scalar(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace csl::binio
