#pragma once

// Reference encoder-frame scanning, independent of the library parser.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "prx/session/encoder.hpp"

namespace oracle {

// Bitwise CRC-8, polynomial 0x07, no table.
inline std::uint8_t naive_crc8(const std::uint8_t* p, std::size_t n) {
  std::uint8_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= p[i];
    for (int b = 0; b < 8; ++b) c = (c & 0x80) ? static_cast<std::uint8_t>((c << 1) ^ 0x07) : static_cast<std::uint8_t>(c << 1);
  }
  return c;
}

// Byte-by-byte reference scanner.
inline std::vector<prx::session::EncoderFrame> reference_scan(const std::vector<std::uint8_t>& b) {
  std::vector<prx::session::EncoderFrame> out;
  std::size_t i = 0;
  while (i + 6 <= b.size()) {
    if (b[i] == 0xAA && naive_crc8(&b[i], 5) == b[i + 5] && (b[i + 3] >> 4) == 0) {
      out.push_back({b[i + 1], static_cast<std::uint16_t>(b[i + 2] + 256 * b[i + 3]), b[i + 4]});
      i += 6;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace oracle
