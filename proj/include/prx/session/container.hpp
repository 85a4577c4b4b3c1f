#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prx/session/encoder.hpp"

namespace prx::session {

// Chunked little-endian session file. Layout, all integers little-endian:
//
// header
//   0   "PRXS"
//   4   u16 version (1)
//   6   u16 header size in bytes, CRC included
//   8   section tag, "SESS" or "EPIS"
//   12  u32 nominal rate, millihertz
//   16  char[16] model variant, zero padded
//   32  8 reserved bytes
//   40  u8 stream count, 3 reserved
//   44  stream table, 8 bytes each: u8 id, u8 kind, u16 reserved, u32 rate mHz
//   ..  u8 calibration count, 3 reserved
//   ..  calibration table, 4 bytes each: u8 joint, i8 sign, u16 zero offset
//   ..  u32 CRC-32 of all preceding header bytes
// chunks, repeated
//   "CHNK", u32 sequence, u32 record bytes, u32 record count
//   records: u8 stream id, 3 reserved, i64 timestamp ns, u32 length, payload
//   u32 CRC-32 over the chunk header and records
// footer
//   "PIDX", u32 entry count
//   entries, 20 bytes each: u8 stream id, 3 reserved, i64 timestamp ns,
//     u64 absolute file offset of the record
//   u8 stats count, 3 reserved
//   stats, 20 bytes each: u8 stream id, 3 reserved, u64 samples, u64 drops
//   u8 stop reason, u8 stalled stream id (0xFF if none), 2 reserved
//   u32 CRC-32 over the footer
// tail
//   u64 footer offset, "PRXE"

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kChunkTarget = 64 * 1024;
inline constexpr std::size_t kChunkHeaderSize = 16;
inline constexpr std::size_t kRecordHeaderSize = 16;
inline constexpr std::size_t kTailSize = 12;
inline constexpr std::uint8_t kNoStream = 0xFF;

enum class StreamKind : std::uint8_t {
  JointBus = 0,
  WristCamera = 1,
  TactileSuper = 2,
  Actions = 3,
  JointState = 4,
  Meta = 5,
};

// Stream ids used by recorded sessions and exported episodes.
namespace streams {
inline constexpr std::uint8_t kJointBus = 0;
inline constexpr std::uint8_t kWristLeft = 1;
inline constexpr std::uint8_t kWristRight = 2;
inline constexpr std::uint8_t kTactileLeft = 3;
inline constexpr std::uint8_t kTactileRight = 4;
inline constexpr std::uint8_t kActions = 5;
inline constexpr std::uint8_t kJointState = 6;
inline constexpr std::uint8_t kMeta = 7;
}  // namespace streams

std::string stream_name(std::uint8_t id);

enum class StopReason : std::uint8_t { Completed = 0, Stalled = 1, Aborted = 2 };
std::string to_string(StopReason r);

struct StreamInfo {
  std::uint8_t id = 0;
  StreamKind kind = StreamKind::JointBus;
  std::uint32_t rate_millihz = 20000;

  bool operator==(const StreamInfo&) const = default;
};

struct JointCalibration {
  std::uint8_t joint = 0;
  EncoderCalibration calibration;
};

struct SessionHeader {
  std::string section = "SESS";
  std::uint32_t rate_millihz = 20000;
  std::string variant;
  std::vector<StreamInfo> streams;
  std::vector<JointCalibration> calibration;

  const StreamInfo* find(std::uint8_t id) const;
  EncoderCalibration calibration_for(std::uint8_t joint) const;
};

struct StreamSample {
  std::uint8_t stream = 0;
  std::int64_t timestamp_ns = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const StreamSample&) const = default;
};

struct IndexEntry {
  std::uint8_t stream = 0;
  std::int64_t timestamp_ns = 0;
  std::uint64_t offset = 0;
};

struct StreamStats {
  std::uint8_t stream = 0;
  std::uint64_t samples = 0;
  std::uint64_t drops = 0;
};

struct Footer {
  std::vector<IndexEntry> index;
  std::vector<StreamStats> stats;
  StopReason stop = StopReason::Completed;
  std::uint8_t stalled_stream = kNoStream;
};

std::vector<std::uint8_t> encode_header(const SessionHeader& header);

// Single-writer. Samples are buffered into chunks of about 64 KiB; a record
// larger than that gets a chunk of its own. The destructor finalizes an
// unfinished file with StopReason::Aborted.
class SessionWriter {
 public:
  SessionWriter(const std::filesystem::path& path, SessionHeader header);
  ~SessionWriter();
  SessionWriter(const SessionWriter&) = delete;
  SessionWriter& operator=(const SessionWriter&) = delete;

  // Throws InvalidArgument for an undeclared stream or a timestamp older than
  // the stream's previous sample.
  void append(const StreamSample& sample);
  void count_drop(std::uint8_t stream);
  void finish(StopReason reason = StopReason::Completed, std::uint8_t stalled_stream = kNoStream);

  bool finished() const { return finished_; }
  const SessionHeader& header() const { return header_; }
  const std::vector<StreamStats>& stats() const { return stats_; }

 private:
  void flush_chunk();
  void write(std::span<const std::uint8_t> bytes);

  std::filesystem::path path_;
  std::ofstream out_;
  SessionHeader header_;
  std::uint64_t offset_ = 0;
  std::uint32_t chunk_seq_ = 0;
  std::vector<std::uint8_t> chunk_;
  std::uint32_t chunk_records_ = 0;
  std::vector<IndexEntry> index_;
  std::vector<StreamStats> stats_;
  std::vector<std::int64_t> last_ts_;
  bool finished_ = false;
};

enum class ReadMode {
  Strict,   // header, every chunk, footer and index must verify
  Recover,  // keep every chunk that verifies before the first damage
};

struct ChunkInfo {
  std::uint32_t sequence = 0;
  std::uint64_t offset = 0;
  std::uint32_t records = 0;
  std::uint32_t bytes = 0;
};

// File-backed reader. Payloads are read on demand so large sessions do not
// have to fit in memory.
class SessionReader {
 public:
  // Throws BadMagic, VersionUnsupported, CorruptChunk, CorruptIndex, IoFailure.
  explicit SessionReader(const std::filesystem::path& path, ReadMode mode = ReadMode::Strict);

  const SessionHeader& header() const { return header_; }
  // Absent when the file was recovered without a valid footer.
  const std::optional<Footer>& footer() const { return footer_; }
  bool recovered() const { return recovered_; }
  // Recover mode: why the chunk scan stopped early, if it did.
  const std::optional<std::string>& damage() const { return damage_; }
  const std::vector<ChunkInfo>& chunks() const { return chunks_; }

  // Every record in file order.
  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::vector<IndexEntry> entries(std::uint8_t stream) const;
  std::vector<std::uint8_t> payload(const IndexEntry& entry) const;
  StreamSample sample(const IndexEntry& entry) const;
  std::vector<StreamSample> samples() const;

 private:
  std::filesystem::path path_;
  mutable std::ifstream in_;
  std::uint64_t size_ = 0;
  SessionHeader header_;
  std::optional<Footer> footer_;
  std::vector<IndexEntry> entries_;
  std::vector<ChunkInfo> chunks_;
  bool recovered_ = false;
  std::optional<std::string> damage_;
};

struct ValidationReport {
  bool ok = true;
  std::size_t chunks = 0;
  std::size_t samples = 0;
  std::vector<std::string> problems;
  std::optional<std::string> first_error_code;
};

// Never throws for file content problems; they are listed in the report.
ValidationReport validate_session(const std::filesystem::path& path);

}  // namespace prx::session
