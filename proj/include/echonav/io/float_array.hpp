#ifndef ECHONAV_IO_FLOAT_ARRAY_HPP_
#define ECHONAV_IO_FLOAT_ARRAY_HPP_

// Flat little-endian float32 array container shared by depth maps, RGB
// images, echoes, spectrograms and checkpoints.
//
// Header layout (32 bytes):
//   0  char[4]  magic "ECNV"
//   4  u16      version
//   6  u16      rank (1..4)
//   8  u32[4]   dims (unused trailing dims are 1)
//   24 f32      scalar (max_depth_m for depth, sample_rate for audio, else 0)
//   28 u32      kind
// followed by prod(dims) little-endian f32 values.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace echonav::io {

enum class ArrayKind : std::uint32_t {
  kGeneric = 0,
  kDepth = 1,
  kRgb = 2,
  kEcho = 3,
  kSpectrogram = 4,
  kParameter = 5,
};

inline constexpr std::array<char, 4> kMagic = {'E', 'C', 'N', 'V'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;

struct FloatArray {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
  float scalar = 0.0f;
  ArrayKind kind = ArrayKind::kGeneric;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline std::vector<unsigned char> encode(const FloatArray& a) {
  if (a.dims.empty() || a.dims.size() > 4) {
    throw std::invalid_argument("float array rank must be in [1, 4]");
  }
  if (a.values.size() != a.element_count()) {
    throw std::invalid_argument("float array value count does not match dims");
  }
  std::vector<unsigned char> out;
  out.reserve(kHeaderBytes + 4 * a.values.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  detail::put_u16(out, kFormatVersion);
  detail::put_u16(out, static_cast<std::uint16_t>(a.dims.size()));
  for (std::size_t i = 0; i < 4; ++i) detail::put_u32(out, i < a.dims.size() ? a.dims[i] : 1u);
  detail::put_u32(out, std::bit_cast<std::uint32_t>(a.scalar));
  detail::put_u32(out, static_cast<std::uint32_t>(a.kind));
  for (float v : a.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline FloatArray decode(std::span<const unsigned char> bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw std::runtime_error("not an ECNV float array");
  }
  const unsigned char* p = bytes.data();
  if (detail::get_u16(p + 4) != kFormatVersion) {
    throw std::runtime_error("unsupported ECNV version");
  }
  const std::uint16_t rank = detail::get_u16(p + 6);
  if (rank == 0 || rank > 4) throw std::runtime_error("corrupt ECNV rank");
  FloatArray a;
  for (std::uint16_t i = 0; i < rank; ++i) a.dims.push_back(detail::get_u32(p + 8 + 4 * i));
  a.scalar = std::bit_cast<float>(detail::get_u32(p + 24));
  a.kind = static_cast<ArrayKind>(detail::get_u32(p + 28));
  const std::size_t n = a.element_count();
  if (bytes.size() != kHeaderBytes + 4 * n) throw std::runtime_error("truncated ECNV payload");
  a.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.values[i] = std::bit_cast<float>(detail::get_u32(p + kHeaderBytes + 4 * i));
  }
  return a;
}

inline void write_file(const std::filesystem::path& path, const FloatArray& a) {
  const auto bytes = encode(a);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline FloatArray read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace echonav::io

#endif  // ECHONAV_IO_FLOAT_ARRAY_HPP_
