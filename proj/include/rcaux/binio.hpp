#pragma once

// Little-endian primitive IO for the binary dataset / checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcaux::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("binio: truncated read");
  return v;
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_pod(os, v); }
inline void write_u16(std::ostream& os, std::uint16_t v) { write_pod(os, v); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_pod(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_pod(os, v); }
inline void write_i32(std::ostream& os, std::int32_t v) { write_pod(os, v); }
inline void write_f32(std::ostream& os, float v) { write_pod(os, v); }
inline void write_f64(std::ostream& os, double v) { write_pod(os, v); }

inline std::uint8_t read_u8(std::istream& is) { return read_pod<std::uint8_t>(is); }
inline std::uint16_t read_u16(std::istream& is) { return read_pod<std::uint16_t>(is); }
inline std::uint32_t read_u32(std::istream& is) { return read_pod<std::uint32_t>(is); }
inline std::uint64_t read_u64(std::istream& is) { return read_pod<std::uint64_t>(is); }
inline std::int32_t read_i32(std::istream& is) { return read_pod<std::int32_t>(is); }
inline float read_f32(std::istream& is) { return read_pod<float>(is); }
inline double read_f64(std::istream& is) { return read_pod<double>(is); }

inline void write_magic(std::ostream& os, const char magic[4]) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[4],
                         const std::string& what) {
  char buf[4] = {};
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw std::runtime_error(what + ": bad magic");
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("binio: truncated string");
  return s;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

}  // namespace rcaux::binio
