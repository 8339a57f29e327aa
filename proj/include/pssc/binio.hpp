#pragma once

// Little-endian binary primitives shared by the matrix and checkpoint formats.
//
// Matrix file (".matbin"):
//   bytes 0-3   magic "PSMB"
//   bytes 4-7   u32 version (1)
//   bytes 8-15  u64 rows
//   bytes 16-23 u64 cols
//   then rows*cols f64 values, row-major
// All integers and floats are little-endian regardless of host order.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "pssc/errors.hpp"
#include "pssc/linalg.hpp"

namespace pssc::binio {

inline constexpr std::string_view kMatrixMagic = "PSMB";
inline constexpr std::uint32_t kMatrixVersion = 1;

inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 4);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

// Reader that tracks its byte offset so errors can point at the failure.
class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::size_t offset() const noexcept { return offset_; }

  void read(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw IngestionError(std::string("truncated input while reading ") + what,
                           offset_ + static_cast<std::size_t>(is_.gcount()));
    offset_ += n;
  }

  std::uint64_t u64(const char* what) {
    std::array<unsigned char, 8> b;
    read(reinterpret_cast<char*>(b.data()), 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b;
    read(reinterpret_cast<char*>(b.data()), 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  void expect_magic(std::string_view magic) {
    const std::size_t at = offset_;
    std::string got(magic.size(), '\0');
    read(got.data(), magic.size(), "magic");
    if (got != magic) throw IngestionError("bad magic, expected " + std::string(magic), at);
  }

 private:
  std::istream& is_;
  std::size_t offset_ = 0;
};

inline void write_matrix_body(std::ostream& os, const Mat& m) {
  for (double v : m.data()) put_f64(os, v);
}

inline void read_matrix_body(Reader& r, Mat& m, const char* what) {
  for (double& v : m.data()) {
    const std::size_t at = r.offset();
    v = r.f64(what);
    if (!std::isfinite(v)) throw IngestionError(std::string("non-finite value in ") + what, at);
  }
}

inline void write_matbin(std::ostream& os, const Mat& m) {
  os.write(kMatrixMagic.data(), kMatrixMagic.size());
  put_u32(os, kMatrixVersion);
  put_u64(os, m.rows());
  put_u64(os, m.cols());
  write_matrix_body(os, m);
}

inline Mat read_matbin(std::istream& is) {
  Reader r(is);
  r.expect_magic(kMatrixMagic);
  const std::size_t vat = r.offset();
  if (r.u32("version") != kMatrixVersion) throw IngestionError("unsupported matbin version", vat);
  const std::size_t sat = r.offset();
  const std::uint64_t rows = r.u64("rows");
  const std::uint64_t cols = r.u64("cols");
  if (rows != 0 && cols > (std::uint64_t{1} << 40) / rows)
    throw IngestionError("implausible matrix shape", sat);
  Mat m(rows, cols);
  read_matrix_body(r, m, "matrix data");
  return m;
}

inline void save_matbin(const std::string& path, const Mat& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_matbin(os, m);
}

inline Mat load_matbin(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open " + path, 0);
  return read_matbin(is);
}

}  // namespace pssc::binio
