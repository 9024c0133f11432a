#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "voxgan/error.hpp"

// Little-endian encoding helpers shared by the checkpoint and NIfTI codecs.
namespace voxgan::binary {

template <class T>
T byteswap_value(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
    std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <class T>
void put_le(std::string& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    value = byteswap_value(value);
  }
  const auto* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

template <class T>
void store_le(char* dst, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    value = byteswap_value(value);
  }
  std::memcpy(dst, &value, sizeof(T));
}

template <class T>
T load_le(const char* src) {
  T value;
  std::memcpy(&value, src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    value = byteswap_value(value);
  }
  return value;
}

// Sequential reader over a byte buffer; throws DataError on overrun.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v = load_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("truncated data");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace voxgan::binary
