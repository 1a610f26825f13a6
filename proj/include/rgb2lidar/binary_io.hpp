#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "rgb2lidar/error.hpp"

namespace rgb2lidar::io {

/// Little-endian writer over an ostream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  void u8(std::uint8_t v) { put_le(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  void f32s(std::span<const float> v) {
    for (float x : v) f32(x);
  }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  template <typename U>
  void put_le(U v) {
    std::array<char, sizeof(U)> buf{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    os_.write(buf.data(), buf.size());
  }

  std::ostream& os_;
};

/// Little-endian reader; every short read raises FormatError naming `what`.
class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  /// Checks a 4-byte magic; a mismatch raises VersionError.
  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    read_raw(got.data(), got.size(), "magic");
    if (got != m) {
      throw VersionError(what_ + ": expected magic '" + std::string(m) + "', found '" +
                         printable(got) + "'");
    }
  }

  std::uint8_t u8(const char* field = "u8") { return get_le<std::uint8_t>(field); }
  std::uint16_t u16(const char* field = "u16") { return get_le<std::uint16_t>(field); }
  std::uint32_t u32(const char* field = "u32") { return get_le<std::uint32_t>(field); }
  std::uint64_t u64(const char* field = "u64") { return get_le<std::uint64_t>(field); }
  float f32(const char* field = "f32") { return std::bit_cast<float>(get_le<std::uint32_t>(field)); }
  double f64(const char* field = "f64") { return std::bit_cast<double>(get_le<std::uint64_t>(field)); }

  void f32s(std::span<float> out, const char* field = "f32 block") {
    for (float& x : out) x = f32(field);
  }

  std::string str(const char* field = "string") {
    const auto n = u32(field);
    std::string s(n, '\0');
    read_raw(s.data(), n, field);
    return s;
  }

  /// True when the stream has no bytes left.
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

  const std::string& what() const { return what_; }

 private:
  template <typename U>
  U get_le(const char* field) {
    std::array<unsigned char, sizeof(U)> buf{};
    read_raw(reinterpret_cast<char*>(buf.data()), buf.size(), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{buf[i]} << (8 * i));
    return v;
  }

  void read_raw(char* dst, std::size_t n, const char* field) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw FormatError(what_ + ": truncated file while reading " + field);
    }
  }

  static std::string printable(const std::string& s) {
    std::string out;
    for (unsigned char c : s) out += (c >= 32 && c < 127) ? static_cast<char>(c) : '?';
    return out;
  }

  std::istream& is_;
  std::string what_;
};

}  // namespace rgb2lidar::io
