#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace refacer::bytes {

template <typename T>
T byteswap_value(T value) noexcept {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

/// Reads a little-endian T at `offset`; caller checks bounds.
template <typename T>
T load_le(std::span<const std::uint8_t> buf, std::size_t offset) noexcept {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
  return value;
}

template <typename T>
void store_le(std::span<std::uint8_t> buf, std::size_t offset, T value) noexcept {
  if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  const std::size_t at = out.size();
  out.resize(at + sizeof(T));
  store_le<T>(out, at, value);
}

inline void append_raw(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
  if (n == 0) return;
  const std::size_t at = out.size();
  out.resize(at + n);
  std::memcpy(out.data() + at, data, n);
}

/// Sequential little-endian reader used by the project's container formats.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> buf) noexcept : buf_(buf) {}

  bool can_read(std::size_t n) const noexcept { return n <= buf_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

  /// Returns false (and leaves the cursor) when fewer than sizeof(T) bytes remain.
  template <typename T>
  bool read(T& out) noexcept {
    if (!can_read(sizeof(T))) return false;
    out = load_le<T>(buf_, pos_);
    pos_ += sizeof(T);
    return true;
  }

  bool read_string(std::size_t n, std::string& out) {
    if (!can_read(n)) return false;
    out.assign(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return true;
  }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace refacer::bytes
