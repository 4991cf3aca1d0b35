#pragma once

// Little-endian scalar I/O for the checkpoint and dataset containers.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "uwcsr/errors.hpp"

namespace uwcsr::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw IoError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
inline void write_f32(std::ostream& os, float v) { write_le(os, v); }
inline void write_f64(std::ostream& os, double v) { write_le(os, v); }
inline std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
inline std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }
inline float read_f32(std::istream& is) { return read_le<float>(is); }
inline double read_f64(std::istream& is) { return read_le<double>(is); }

inline void write_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), 4); }

inline void expect_magic(std::istream& is, std::string_view magic) {
  char buf[4];
  if (!is.read(buf, 4) || std::string_view(buf, 4) != magic)
    throw IoError("bad magic, expected '" + std::string(magic) + "'");
}

}  // namespace uwcsr::binio
