#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace prx::session {

// Encoder wire frame, 6 bytes:
//   0xAA | joint id | count low byte | count high nibble (upper nibble 0) | sequence | CRC-8
// CRC-8 uses polynomial 0x07, initial value 0x00, no reflection, no final XOR,
// over the first five bytes.
inline constexpr std::uint8_t kSync = 0xAA;
inline constexpr std::size_t kEncoderFrameSize = 6;
inline constexpr int kCountsPerTurn = 4096;
inline constexpr double kLsb = 2.0 * 3.14159265358979323846 / kCountsPerTurn;

struct EncoderFrame {
  std::uint8_t joint = 0;
  std::uint16_t count = 0;  // 12-bit
  std::uint8_t sequence = 0;

  bool operator==(const EncoderFrame&) const = default;
};

std::uint8_t crc8(std::span<const std::uint8_t> bytes);

// Throws CountOutOfRange for count >= 4096.
std::array<std::uint8_t, kEncoderFrameSize> encode_frame(const EncoderFrame& frame);

struct ParseDiagnostics {
  std::size_t resyncs = 0;       // runs of skipped bytes
  std::size_t crc_failures = 0;  // sync found, CRC mismatch
  std::size_t malformed = 0;     // CRC ok but count high nibble set
  std::size_t skipped_bytes = 0;

  ParseDiagnostics& operator+=(const ParseDiagnostics& o);
};

// Incremental scanner. Bytes that might still start a frame are held back
// until more input arrives, so feeding a stream in pieces yields the same
// frames as feeding it at once.
class EncoderParser {
 public:
  std::vector<EncoderFrame> feed(std::span<const std::uint8_t> bytes);
  const ParseDiagnostics& diagnostics() const { return diag_; }
  std::size_t pending() const { return pending_.size(); }

 private:
  std::vector<std::uint8_t> pending_;
  ParseDiagnostics diag_;
  bool skipping_ = false;
};

struct ParseResult {
  std::vector<EncoderFrame> frames;
  ParseDiagnostics diagnostics;
  std::size_t trailing = 0;  // incomplete bytes left at the end
};

ParseResult parse_encoder_frames(std::span<const std::uint8_t> bytes);

// Per-joint mounting calibration.
struct EncoderCalibration {
  std::uint16_t zero_offset = 0;  // count at the joint's zero angle
  std::int8_t sign = 1;           // +1 or -1
};

// sign * ((count - offset) mod 4096) * 2pi/4096, wrapped to (-pi, pi].
// Throws CountOutOfRange.
double count_to_radians(std::uint16_t count, const EncoderCalibration& cal = {});
// Nearest count; decoding it is within half an LSB of the input on the circle.
std::uint16_t radians_to_count(double angle, const EncoderCalibration& cal = {});

}  // namespace prx::session
