#pragma once

// Little-endian encoders used by the binary model and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emsca/error.hpp"

namespace emsca::detail {

template <typename U>
U to_little(U v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      r = static_cast<U>((r << 8) | ((v >> (8 * i)) & 0xff));
    }
    return r;
  } else {
    return v;
  }
}

class ByteWriter {
 public:
  void bytes(std::string_view s) {
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    buf_.insert(buf_.end(), p, p + s.size());
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
  void u32(std::uint32_t v) { raw(to_little(v)); }
  void u64(std::uint64_t v) { raw(to_little(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }

  const std::vector<std::byte>& data() const noexcept { return buf_; }
  std::string_view view() const noexcept {
    return {reinterpret_cast<const char*>(buf_.data()), buf_.size()};
  }

 private:
  template <typename U>
  void raw(U v) {
    std::byte tmp[sizeof(U)];
    std::memcpy(tmp, &v, sizeof(U));
    buf_.insert(buf_.end(), tmp, tmp + sizeof(U));
  }
  std::vector<std::byte> buf_;
};

/// Bounds-checked reader; any overrun raises `code` with `context`.
class ByteReader {
 public:
  ByteReader(std::string_view data, Errc code, std::string context)
      : data_(data), code_(code), context_(std::move(context)) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t max_len = 1 << 20) {
    const auto n = u32();
    if (n > max_len) fail(code_, context_ + ": string length " + std::to_string(n) + " exceeds limit");
    return std::string(bytes(n));
  }
  std::vector<double> f64s(std::size_t n) {
    need(n * 8);
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0)
      fail(code_, context_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining())
      fail(code_, context_ + ": truncated (needed " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", " +
                      std::to_string(remaining()) + " left)");
  }
  template <typename U>
  U raw() {
    auto b = bytes(sizeof(U));
    U v;
    std::memcpy(&v, b.data(), sizeof(U));
    return to_little(v);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  Errc code_;
  std::string context_;
};

}  // namespace emsca::detail
