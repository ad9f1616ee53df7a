#pragma once

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "vecsac/errors.hpp"

namespace vecsac {

// Blobs are little-endian regardless of host order.

inline void write_le_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_le_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw ConfigError("truncated binary blob");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_le_f64(std::ostream& os, double v) { write_le_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline double read_le_f64(std::istream& is) { return std::bit_cast<double>(read_le_u64(is)); }

template <typename Derived>
void write_le_block(std::ostream& os, const Derived& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) write_le_f64(os, m.data()[k]);
}

template <typename Derived>
void read_le_block(std::istream& is, Derived& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = read_le_f64(is);
}

}  // namespace vecsac
