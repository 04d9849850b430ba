#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitives shared by the binary file formats.
namespace skillmatch::binio {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw FormatError("unexpected end of file");
  return v;
}

inline void put_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("unexpected end of file");
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in, std::size_t limit = std::size_t{1} << 32) {
  const auto n = get<std::uint64_t>(in);
  if (n > limit) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  get_bytes(in, s.data(), n);
  return s;
}

inline void put_magic(std::ostream& out, const char (&magic)[5], std::uint32_t version) {
  put_bytes(out, magic, 4);
  put<std::uint32_t>(out, version);
}

inline void expect_magic(std::istream& in, const char (&magic)[5], std::uint32_t version,
                         const std::string& what) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) throw FormatError("not a " + what + " file");
  const auto v = get<std::uint32_t>(in);
  if (v != version) {
    throw FormatError(what + " version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(version) + ")");
  }
}

}  // namespace skillmatch::binio
