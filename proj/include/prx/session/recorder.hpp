#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stop_token>
#include <vector>

#include "prx/session/container.hpp"

namespace prx::session {

// Number of joints on the bus: left arm 4, right arm 4, left hand 7, right hand 7.
inline constexpr std::size_t kBusJoints = 22;

// A producer of timestamped samples for one stream. next() may block; it
// should return promptly once stop is requested.
class Source {
 public:
  virtual ~Source() = default;
  virtual StreamInfo info() const = 0;
  // nullopt once the source has nothing more to deliver.
  virtual std::optional<StreamSample> next(std::stop_token stop) = 0;
};

struct SyntheticOptions {
  std::uint64_t seed = 1;
  std::int64_t jitter_ns = 10'000'000;  // uniform in [-jitter, +jitter]
  int image_height = 120;               // per sensor and per wrist camera
  int image_width = 160;
  bool realtime = false;                // pace samples against the wall clock
  std::optional<std::int64_t> stop_after_ns;  // source falls silent after this time
};

// Joint-bus payload: one encoder wire frame per joint, ids 0..21.
std::vector<std::uint8_t> encode_joint_bus(std::span<const double> angles, const SessionHeader& header,
                                           std::uint8_t sequence);
// Throws CorruptChunk unless every joint id 0..21 is present.
std::vector<double> decode_joint_bus(std::span<const std::uint8_t> payload, const SessionHeader& header);

// Header for a five-stream session with seeded per-joint calibration.
SessionHeader synthetic_header(const std::string& variant, std::uint64_t seed = 1);
// Smooth synthetic joint trajectory, 22 angles in radians.
std::vector<double> synthetic_joint_angles(double t_seconds);

// One source for a stream id of the five-stream layout.
std::unique_ptr<Source> make_synthetic_source(std::uint8_t stream, const SessionHeader& header,
                                              const SyntheticOptions& options);
std::vector<std::unique_ptr<Source>> make_synthetic_sources(const SessionHeader& header,
                                                            const SyntheticOptions& options);

// Re-emits one stream of an existing session file.
std::unique_ptr<Source> make_replay_source(const std::filesystem::path& path, std::uint8_t stream);

struct RecordOptions {
  std::int64_t duration_ns = 5'000'000'000;
  std::int64_t stall_ns = 500'000'000;  // session-clock and wall-clock stall timeout
  std::size_t queue_capacity = 32;
};

struct RecordSummary {
  std::vector<StreamStats> stats;
  StopReason stop = StopReason::Completed;
  std::uint8_t stalled_stream = kNoStream;
  std::size_t samples = 0;
};

// Runs one producer thread per source and merges their output by
// (timestamp, stream id) into a single writer. Samples at or after
// duration_ns are not persisted. A sample older than its stream's previous
// one is dropped and counted. A stream that falls behind the merge frontier
// by more than stall_ns of session time, or delivers nothing for stall_ns of
// wall time, stops the recording with StreamStalled; the file is finalized
// first and remains readable.
RecordSummary record(std::vector<std::unique_ptr<Source>>& sources, const SessionHeader& header,
                     const std::filesystem::path& path, const RecordOptions& options = {});

}  // namespace prx::session
