#pragma once

// Little-endian scalar (de)serialization helpers shared by the DVOL and DCKP
// writers. Internal to the library but installed for reuse by tools.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>

#include "dixon/error.hpp"

namespace dixon::io {

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is, ErrorCode on_short = ErrorCode::kFormat) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    fail(on_short, "unexpected end of stream");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::uint32_t max_len = 1U << 24) {
  const auto n = get<std::uint32_t>(is);
  if (n > max_len) fail(ErrorCode::kFormat, "string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) fail(ErrorCode::kFormat, "truncated string");
  return s;
}

}  // namespace dixon::io
