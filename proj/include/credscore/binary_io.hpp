#ifndef CREDSCORE_BINARY_IO_HPP
#define CREDSCORE_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "credscore/error.hpp"

// Little-endian primitives shared by the model and checkpoint dumps.
namespace credscore::binary {

static_assert(std::endian::native == std::endian::little,
              "binary dumps assume a little-endian host");

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void write_f64s(std::ostream& os, std::span<const double> v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size_bytes()));
}
inline void write_i32s(std::ostream& os, std::span<const std::int32_t> v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size_bytes()));
}

inline void read_exact(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw Error(Errc::format, "truncated binary dump");
  }
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  read_exact(is, &v, sizeof v);
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v;
  read_exact(is, &v, sizeof v);
  return v;
}
inline double read_f64(std::istream& is) {
  double v;
  read_exact(is, &v, sizeof v);
  return v;
}
inline std::string read_string(std::istream& is) {
  const auto n = read_u32(is);
  std::string s(n, '\0');
  read_exact(is, s.data(), n);
  return s;
}
inline std::vector<double> read_f64s(std::istream& is, std::uint64_t max_len) {
  const auto n = read_u64(is);
  if (n > max_len) throw Error(Errc::format, "tensor length out of range");
  std::vector<double> v(n);
  read_exact(is, v.data(), n * sizeof(double));
  return v;
}
inline std::vector<std::int32_t> read_i32s(std::istream& is, std::uint64_t max_len) {
  const auto n = read_u64(is);
  if (n > max_len) throw Error(Errc::format, "array length out of range");
  std::vector<std::int32_t> v(n);
  read_exact(is, v.data(), n * sizeof(std::int32_t));
  return v;
}

inline void write_magic(std::ostream& os, const char (&magic)[9], std::uint32_t version) {
  os.write(magic, 8);
  write_u32(os, version);
}
inline void expect_magic(std::istream& is, const char (&magic)[9], std::uint32_t version) {
  char got[8];
  read_exact(is, got, 8);
  if (std::memcmp(got, magic, 8) != 0) {
    throw Error(Errc::format, std::string("bad magic, expected ") + magic);
  }
  const auto v = read_u32(is);
  if (v != version) {
    throw Error(Errc::format, std::string(magic) + ": unsupported version " +
                                  std::to_string(v));
  }
}

}  // namespace credscore::binary

#endif
