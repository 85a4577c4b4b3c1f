#include "prx/session/encoder.hpp"

#include <cmath>
#include <string>

#include "prx/error.hpp"

namespace prx::session {
namespace {

constexpr std::array<std::uint8_t, 256> make_table() {
  std::array<std::uint8_t, 256> t{};
  for (int i = 0; i < 256; ++i) {
    auto c = static_cast<std::uint8_t>(i);
    for (int b = 0; b < 8; ++b) c = static_cast<std::uint8_t>((c & 0x80) ? (c << 1) ^ 0x07 : c << 1);
    t[static_cast<std::size_t>(i)] = c;
  }
  return t;
}

constexpr auto kTable = make_table();

void check_sign(const EncoderCalibration& cal) {
  if (cal.sign != 1 && cal.sign != -1) throw Error(ErrorCode::InvalidArgument, "encoder sign must be +1 or -1");
  if (cal.zero_offset >= kCountsPerTurn) {
    throw Error(ErrorCode::CountOutOfRange, "zero offset " + std::to_string(cal.zero_offset));
  }
}

}  // namespace

std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
  std::uint8_t c = 0;
  for (auto b : bytes) c = kTable[c ^ b];
  return c;
}

std::array<std::uint8_t, kEncoderFrameSize> encode_frame(const EncoderFrame& f) {
  if (f.count >= kCountsPerTurn) throw Error(ErrorCode::CountOutOfRange, "count " + std::to_string(f.count));
  std::array<std::uint8_t, kEncoderFrameSize> out{kSync, f.joint, static_cast<std::uint8_t>(f.count & 0xFF),
                                                  static_cast<std::uint8_t>(f.count >> 8), f.sequence, 0};
  out[5] = crc8(std::span(out).first(5));
  return out;
}

ParseDiagnostics& ParseDiagnostics::operator+=(const ParseDiagnostics& o) {
  resyncs += o.resyncs;
  crc_failures += o.crc_failures;
  malformed += o.malformed;
  skipped_bytes += o.skipped_bytes;
  return *this;
}

std::vector<EncoderFrame> EncoderParser::feed(std::span<const std::uint8_t> bytes) {
  pending_.insert(pending_.end(), bytes.begin(), bytes.end());
  std::vector<EncoderFrame> out;
  std::size_t i = 0;
  const std::size_t n = pending_.size();
  auto skip = [&] {
    if (!skipping_) {
      ++diag_.resyncs;
      skipping_ = true;
    }
    ++diag_.skipped_bytes;
    ++i;
  };
  while (i < n) {
    if (pending_[i] != kSync) {
      skip();
      continue;
    }
    if (n - i < kEncoderFrameSize) break;  // wait for the rest
    const std::uint8_t* p = pending_.data() + i;
    if (crc8(std::span(p, 5)) != p[5]) {
      ++diag_.crc_failures;
      skip();
      continue;
    }
    if (p[3] & 0xF0) {
      ++diag_.malformed;
      skip();
      continue;
    }
    out.push_back({p[1], static_cast<std::uint16_t>(p[2] | (p[3] << 8)), p[4]});
    skipping_ = false;
    i += kEncoderFrameSize;
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

ParseResult parse_encoder_frames(std::span<const std::uint8_t> bytes) {
  EncoderParser parser;
  ParseResult r;
  r.frames = parser.feed(bytes);
  r.diagnostics = parser.diagnostics();
  r.trailing = parser.pending();
  return r;
}

double count_to_radians(std::uint16_t count, const EncoderCalibration& cal) {
  if (count >= kCountsPerTurn) throw Error(ErrorCode::CountOutOfRange, "count " + std::to_string(count));
  check_sign(cal);
  int k = (static_cast<int>(count) - static_cast<int>(cal.zero_offset)) % kCountsPerTurn;
  if (k < 0) k += kCountsPerTurn;
  // Signed step count in (-2048, 2048].
  int s = cal.sign * (k > kCountsPerTurn / 2 ? k - kCountsPerTurn : k);
  if (s <= -kCountsPerTurn / 2) s += kCountsPerTurn;
  return s * kLsb;
}

std::uint16_t radians_to_count(double angle, const EncoderCalibration& cal) {
  check_sign(cal);
  if (!std::isfinite(angle)) throw Error(ErrorCode::InvalidArgument, "angle is not finite");
  const double wrapped = std::remainder(angle, 2.0 * 3.14159265358979323846);
  auto s = static_cast<long>(std::lround(wrapped / kLsb));
  long raw = cal.sign * s + cal.zero_offset;
  raw %= kCountsPerTurn;
  if (raw < 0) raw += kCountsPerTurn;
  return static_cast<std::uint16_t>(raw);
}

}  // namespace prx::session
