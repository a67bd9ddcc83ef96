#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>

#include "ppap/errors.hpp"

namespace ppap::io {

static_assert(std::endian::native == std::endian::little,
              "container code assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, ErrorKind on_short, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    raise(on_short, std::string("unexpected end of stream reading ") + what);
  }
  return value;
}

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* p, std::size_t n, ErrorKind on_short,
                       const char* what) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    raise(on_short, std::string("unexpected end of stream reading ") + what);
  }
}

}  // namespace ppap::io
