#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "morphparse/tensor.hpp"

namespace morphparse {
namespace io {

// Fixed-width little-endian binary primitives. The byte order is written
// explicitly so archives transfer between hosts.

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.good(), "unexpected end of stream reading u32");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.good(), "unexpected end of stream reading u64");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline float read_f32(std::istream& in) {
  const std::uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  require(n <= (1ull << 32), "string length ", n, " is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require(in.good() || (n == 0 && !in.bad()), "unexpected end of stream reading string");
  return s;
}

template <class S>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() {
  return "f32";
}
template <>
inline const char* dtype_name<double>() {
  return "f64";
}

/// Tensor payload: dtype tag, rows, cols, then each element as its IEEE bit
/// pattern in little-endian order.
template <class S>
void write_tensor(std::ostream& out, const Tensor<S>& t) {
  write_string(out, dtype_name<S>());
  write_u64(out, t.rows());
  write_u64(out, t.cols());
  if constexpr (sizeof(S) == 4) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits;
      float f = static_cast<float>(t.at(i));
      std::memcpy(&bits, &f, 4);
      write_u32(out, bits);
    }
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t bits;
      double d = static_cast<double>(t.at(i));
      std::memcpy(&bits, &d, 8);
      write_u64(out, bits);
    }
  }
}

template <class S>
Tensor<S> read_tensor(std::istream& in) {
  const std::string dtype = read_string(in);
  const std::uint64_t rows = read_u64(in);
  const std::uint64_t cols = read_u64(in);
  Tensor<S> t(rows, cols);
  if (dtype == "f32") {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint32_t bits = read_u32(in);
      float f;
      std::memcpy(&f, &bits, 4);
      t.at(i) = static_cast<S>(f);
    }
  } else if (dtype == "f64") {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint64_t bits = read_u64(in);
      double d;
      std::memcpy(&d, &bits, 8);
      t.at(i) = static_cast<S>(d);
    }
  } else {
    fail("unknown tensor dtype: ", dtype);
  }
  return t;
}

}  // namespace io
}  // namespace morphparse
