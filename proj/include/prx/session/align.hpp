#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "prx/session/container.hpp"
#include "prx/tactile/tactile.hpp"

namespace prx::session {

// Streams an aligned step draws from, in field order.
inline constexpr std::array<std::uint8_t, 5> kAlignedStreams{streams::kJointBus, streams::kWristLeft,
                                                             streams::kWristRight, streams::kTactileLeft,
                                                             streams::kTactileRight};

std::int64_t grid_period_ns(double rate_hz);

struct TickMatch {
  std::int64_t grid_ns = 0;
  std::vector<std::size_t> sample;  // per stream, index into that stream's timestamps
};

struct GridMatch {
  std::int64_t period_ns = 0;
  std::vector<TickMatch> ticks;
  std::size_t dropped = 0;
};

// Nearest-sample matching on a grid anchored at the latest first timestamp
// and ending at the earliest last timestamp. Ties go to the earlier sample. A
// tick is dropped when any stream's nearest sample is more than half a period
// away. Timestamps must be sorted per stream. Throws MissingStream for an
// empty stream, RateOutOfRange for a non-positive rate.
GridMatch match_grid(const std::vector<std::vector<std::int64_t>>& timestamps, double rate_hz);

struct AlignedStep {
  std::int64_t grid_ns = 0;
  std::vector<double> joints;  // 22: left arm 4, right arm 4, left hand 7, right hand 7
  std::array<tactile::TactileFrame, 2> wrist;  // left, right
  std::array<tactile::SuperImage, 2> tactile;  // left, right
  std::array<std::int64_t, 5> source_ns{};     // in kAlignedStreams order

  bool operator==(const AlignedStep& o) const;
};

struct AlignOptions {
  double rate_hz = 20.0;
  bool decode_images = true;  // false leaves wrist and tactile fields empty
};

struct AlignedSession {
  SessionHeader header;
  std::int64_t period_ns = 0;
  std::vector<AlignedStep> steps;
  std::size_t dropped = 0;
};

// Throws MissingStream if any of the five streams is absent or empty.
AlignedSession align(const SessionReader& reader, const AlignOptions& options = {});

// Writes the steps back as a five-stream session with every record stamped
// at its grid time. Frame payloads keep their capture timestamps.
void write_aligned(const AlignedSession& aligned, const std::filesystem::path& path);

}  // namespace prx::session
