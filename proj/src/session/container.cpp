#include "prx/session/container.hpp"

#include <algorithm>

#include "bytes.hpp"
#include "prx/error.hpp"

namespace prx::session {
namespace {

using detail::crc32_of;

constexpr std::size_t kFixedHeader = 44;

std::vector<std::uint8_t> read_at(std::ifstream& in, std::uint64_t offset, std::size_t n) {
  std::vector<std::uint8_t> buf(n);
  in.clear();
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw Error(ErrorCode::CorruptChunk, "unexpected end of file");
  return buf;
}

SessionHeader parse_header(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes, ErrorCode::CorruptChunk, "header");
  r.skip(8);
  SessionHeader h;
  h.section = r.str(4);
  h.rate_millihz = r.u32();
  std::string variant = r.str(16);
  variant.erase(std::find(variant.begin(), variant.end(), '\0'), variant.end());
  h.variant = variant;
  r.skip(8);
  const std::size_t n = r.u8();
  r.skip(3);
  for (std::size_t i = 0; i < n; ++i) {
    StreamInfo s;
    s.id = r.u8();
    s.kind = static_cast<StreamKind>(r.u8());
    r.skip(2);
    s.rate_millihz = r.u32();
    h.streams.push_back(s);
  }
  const std::size_t nc = r.u8();
  r.skip(3);
  for (std::size_t i = 0; i < nc; ++i) {
    JointCalibration c;
    c.joint = r.u8();
    c.calibration.sign = static_cast<std::int8_t>(r.u8());
    c.calibration.zero_offset = r.u16();
    h.calibration.push_back(c);
  }
  return h;
}

struct ParsedChunk {
  ChunkInfo info;
  std::vector<IndexEntry> entries;
  std::uint64_t end = 0;
};

// Reads and verifies the chunk at offset, limited to the byte range [offset, limit).
ParsedChunk read_chunk(std::ifstream& in, std::uint64_t offset, std::uint64_t limit) {
  if (limit < offset + kChunkHeaderSize + 4) {
    throw Error(ErrorCode::CorruptChunk, "chunk at offset " + std::to_string(offset) + " is truncated before its CRC");
  }
  const auto head = read_at(in, offset, kChunkHeaderSize);
  detail::Reader hr(head, ErrorCode::CorruptChunk, "chunk header");
  if (hr.str(4) != "CHNK") throw Error(ErrorCode::CorruptChunk, "missing chunk tag at " + std::to_string(offset));
  ParsedChunk c;
  c.info.offset = offset;
  c.info.sequence = hr.u32();
  c.info.bytes = hr.u32();
  c.info.records = hr.u32();
  const std::uint64_t total = kChunkHeaderSize + static_cast<std::uint64_t>(c.info.bytes) + 4;
  if (limit - offset < total) {
    throw Error(ErrorCode::CorruptChunk, "chunk " + std::to_string(c.info.sequence) + " is truncated before its CRC (" +
                                             std::to_string(limit - offset) + " of " + std::to_string(total) + " bytes)");
  }
  const auto all = read_at(in, offset, static_cast<std::size_t>(total));
  const auto body = std::span(all).first(all.size() - 4);
  detail::Reader tail{std::span(all).last(4), ErrorCode::CorruptChunk, "chunk crc"};
  if (crc32_of(body) != tail.u32()) {
    throw Error(ErrorCode::CorruptChunk, "chunk " + std::to_string(c.info.sequence) + " fails its CRC");
  }
  detail::Reader rr(body.subspan(kChunkHeaderSize), ErrorCode::CorruptChunk, "record");
  for (std::uint32_t i = 0; i < c.info.records; ++i) {
    IndexEntry e;
    e.offset = offset + kChunkHeaderSize + rr.pos();
    e.stream = rr.u8();
    rr.skip(3);
    e.timestamp_ns = rr.i64();
    rr.skip(rr.u32());
    c.entries.push_back(e);
  }
  if (rr.remaining() != 0) throw Error(ErrorCode::CorruptChunk, "chunk record count disagrees with its size");
  c.end = offset + total;
  return c;
}

Footer parse_footer(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::CorruptIndex, "footer truncated");
  detail::Reader crc(bytes.last(4), ErrorCode::CorruptIndex, "footer");
  if (crc32_of(bytes.first(bytes.size() - 4)) != crc.u32()) throw Error(ErrorCode::CorruptIndex, "footer fails its CRC");
  detail::Reader r(bytes.first(bytes.size() - 4), ErrorCode::CorruptIndex, "footer");
  if (r.str(4) != "PIDX") throw Error(ErrorCode::CorruptIndex, "missing index tag");
  Footer f;
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 20 > r.remaining()) throw Error(ErrorCode::CorruptIndex, "index truncated");
  f.index.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    IndexEntry e;
    e.stream = r.u8();
    r.skip(3);
    e.timestamp_ns = r.i64();
    e.offset = r.u64();
    f.index.push_back(e);
  }
  const std::size_t ns = r.u8();
  r.skip(3);
  for (std::size_t i = 0; i < ns; ++i) {
    StreamStats s;
    s.stream = r.u8();
    r.skip(3);
    s.samples = r.u64();
    s.drops = r.u64();
    f.stats.push_back(s);
  }
  f.stop = static_cast<StopReason>(r.u8());
  f.stalled_stream = r.u8();
  r.skip(2);
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptIndex, "trailing bytes in footer");
  return f;
}

}  // namespace

std::string stream_name(std::uint8_t id) {
  switch (id) {
    case streams::kJointBus: return "joint-bus";
    case streams::kWristLeft: return "wrist-left";
    case streams::kWristRight: return "wrist-right";
    case streams::kTactileLeft: return "tactile-left";
    case streams::kTactileRight: return "tactile-right";
    case streams::kActions: return "actions";
    case streams::kJointState: return "joint-state";
    case streams::kMeta: return "meta";
    default: return "stream-" + std::to_string(id);
  }
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Completed: return "completed";
    case StopReason::Stalled: return "stalled";
    case StopReason::Aborted: return "aborted";
  }
  return "unknown";
}

const StreamInfo* SessionHeader::find(std::uint8_t id) const {
  for (const auto& s : streams) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

EncoderCalibration SessionHeader::calibration_for(std::uint8_t joint) const {
  for (const auto& c : calibration) {
    if (c.joint == joint) return c.calibration;
  }
  return {};
}

std::vector<std::uint8_t> encode_header(const SessionHeader& h) {
  if (h.section.size() != 4) throw Error(ErrorCode::InvalidArgument, "section tag must be 4 characters");
  if (h.variant.size() > 16) throw Error(ErrorCode::InvalidArgument, "variant name longer than 16 bytes");
  if (h.streams.size() > 255 || h.calibration.size() > 255) {
    throw Error(ErrorCode::InvalidArgument, "too many streams or calibration entries");
  }
  for (std::size_t i = 0; i < h.streams.size(); ++i) {
    for (std::size_t j = i + 1; j < h.streams.size(); ++j) {
      if (h.streams[i].id == h.streams[j].id) {
        throw Error(ErrorCode::InvalidArgument, "duplicate stream id " + std::to_string(h.streams[i].id));
      }
    }
  }
  const std::size_t size = kFixedHeader + 8 * h.streams.size() + 4 + 4 * h.calibration.size() + 4;
  std::vector<std::uint8_t> out;
  out.reserve(size);
  detail::Writer w(out);
  w.tag("PRXS");
  w.u16(kFormatVersion);
  w.u16(static_cast<std::uint16_t>(size));
  w.tag(h.section);
  w.u32(h.rate_millihz);
  w.tag(h.variant);
  w.zeros(16 - h.variant.size());
  w.zeros(8);
  w.u8(static_cast<std::uint8_t>(h.streams.size()));
  w.zeros(3);
  for (const auto& s : h.streams) {
    w.u8(s.id);
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.zeros(2);
    w.u32(s.rate_millihz);
  }
  w.u8(static_cast<std::uint8_t>(h.calibration.size()));
  w.zeros(3);
  for (const auto& c : h.calibration) {
    w.u8(c.joint);
    w.u8(static_cast<std::uint8_t>(c.calibration.sign));
    w.u16(c.calibration.zero_offset);
  }
  w.u32(crc32_of(out));
  return out;
}

SessionWriter::SessionWriter(const std::filesystem::path& path, SessionHeader header)
    : path_(path), header_(std::move(header)) {
  const auto bytes = encode_header(header_);
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::IoFailure, "cannot open " + path_.string() + " for writing");
  for (const auto& s : header_.streams) stats_.push_back({s.id, 0, 0});
  last_ts_.assign(header_.streams.size(), std::numeric_limits<std::int64_t>::min());
  write(bytes);
}

SessionWriter::~SessionWriter() {
  if (!finished_) {
    try {
      finish(StopReason::Aborted);
    } catch (...) {
    }
  }
}

void SessionWriter::write(std::span<const std::uint8_t> bytes) {
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw Error(ErrorCode::IoFailure, "write to " + path_.string() + " failed");
  offset_ += bytes.size();
}

void SessionWriter::append(const StreamSample& s) {
  if (finished_) throw Error(ErrorCode::InvalidArgument, "session already finished");
  std::size_t k = 0;
  while (k < header_.streams.size() && header_.streams[k].id != s.stream) ++k;
  if (k == header_.streams.size()) throw Error(ErrorCode::InvalidArgument, "undeclared stream " + std::to_string(s.stream));
  if (s.timestamp_ns < last_ts_[k]) {
    throw Error(ErrorCode::InvalidArgument, stream_name(s.stream) + " timestamp goes backwards");
  }
  if (s.payload.size() > 0xFFFFFFFFu - kChunkHeaderSize - kRecordHeaderSize) {
    throw Error(ErrorCode::InvalidArgument, "payload too large");
  }
  const std::size_t record = kRecordHeaderSize + s.payload.size();
  if (!chunk_.empty() && chunk_.size() + record > kChunkTarget) flush_chunk();
  index_.push_back({s.stream, s.timestamp_ns, offset_ + kChunkHeaderSize + chunk_.size()});
  detail::Writer w(chunk_);
  w.u8(s.stream);
  w.zeros(3);
  w.i64(s.timestamp_ns);
  w.u32(static_cast<std::uint32_t>(s.payload.size()));
  w.bytes(s.payload);
  ++chunk_records_;
  last_ts_[k] = s.timestamp_ns;
  ++stats_[k].samples;
  if (chunk_.size() >= kChunkTarget) flush_chunk();
}

void SessionWriter::count_drop(std::uint8_t stream) {
  for (auto& s : stats_) {
    if (s.stream == stream) {
      ++s.drops;
      return;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "undeclared stream " + std::to_string(stream));
}

void SessionWriter::flush_chunk() {
  if (chunk_.empty()) return;
  std::vector<std::uint8_t> buf;
  buf.reserve(kChunkHeaderSize + chunk_.size() + 4);
  detail::Writer w(buf);
  w.tag("CHNK");
  w.u32(chunk_seq_++);
  w.u32(static_cast<std::uint32_t>(chunk_.size()));
  w.u32(chunk_records_);
  w.bytes(chunk_);
  w.u32(crc32_of(buf));
  write(buf);
  chunk_.clear();
  chunk_records_ = 0;
}

void SessionWriter::finish(StopReason reason, std::uint8_t stalled_stream) {
  if (finished_) return;
  finished_ = true;
  flush_chunk();
  const std::uint64_t footer_offset = offset_;
  std::vector<std::uint8_t> buf;
  detail::Writer w(buf);
  w.tag("PIDX");
  w.u32(static_cast<std::uint32_t>(index_.size()));
  for (const auto& e : index_) {
    w.u8(e.stream);
    w.zeros(3);
    w.i64(e.timestamp_ns);
    w.u64(e.offset);
  }
  w.u8(static_cast<std::uint8_t>(stats_.size()));
  w.zeros(3);
  for (const auto& s : stats_) {
    w.u8(s.stream);
    w.zeros(3);
    w.u64(s.samples);
    w.u64(s.drops);
  }
  w.u8(static_cast<std::uint8_t>(reason));
  w.u8(stalled_stream);
  w.zeros(2);
  w.u32(crc32_of(buf));
  w.u64(footer_offset);
  w.tag("PRXE");
  write(buf);
  out_.close();
  if (!out_) throw Error(ErrorCode::IoFailure, "closing " + path_.string() + " failed");
}

SessionReader::SessionReader(const std::filesystem::path& path, ReadMode mode) : path_(path) {
  in_.open(path_, std::ios::binary);
  if (!in_) throw Error(ErrorCode::IoFailure, "cannot open " + path_.string());
  in_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(in_.tellg());
  if (size_ < 8) throw Error(ErrorCode::BadMagic, path_.string() + " is too short to be a session");
  const auto lead = read_at(in_, 0, 8);
  if (!std::equal(lead.begin(), lead.begin() + 4, "PRXS")) throw Error(ErrorCode::BadMagic, path_.string());
  const auto version = static_cast<std::uint16_t>(lead[4] | (lead[5] << 8));
  if (version != kFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "format version " + std::to_string(version));
  }
  const std::size_t header_size = static_cast<std::size_t>(lead[6] | (lead[7] << 8));
  if (header_size < kFixedHeader + 8 || header_size > size_) throw Error(ErrorCode::CorruptChunk, "bad header size");
  const auto head = read_at(in_, 0, header_size);
  detail::Reader crc{std::span(head).last(4), ErrorCode::CorruptChunk, "header"};
  if (crc32_of(std::span(head).first(header_size - 4)) != crc.u32()) {
    throw Error(ErrorCode::CorruptChunk, "header fails its CRC");
  }
  header_ = parse_header(std::span(head).first(header_size - 4));

  // Footer via the tail pointer.
  std::optional<std::uint64_t> footer_offset;
  std::string footer_problem = "file has no tail";
  if (size_ >= header_size + kTailSize) {
    const auto tail = read_at(in_, size_ - kTailSize, kTailSize);
    detail::Reader tr(tail, ErrorCode::CorruptIndex, "tail");
    const std::uint64_t off = tr.u64();
    if (tr.str(4) != "PRXE") {
      footer_problem = "file is truncated or has no tail";
    } else if (off < header_size || off > size_ - kTailSize) {
      footer_problem = "tail points outside the file";
    } else {
      try {
        footer_ = parse_footer(read_at(in_, off, static_cast<std::size_t>(size_ - kTailSize - off)));
        footer_offset = off;
      } catch (const Error& e) {
        if (mode == ReadMode::Strict) throw;
        footer_problem = e.what();
      }
    }
  }
  if (!footer_offset && mode == ReadMode::Strict) throw Error(ErrorCode::CorruptChunk, footer_problem);

  const std::uint64_t limit = footer_offset ? *footer_offset : size_;
  std::uint64_t pos = header_size;
  while (pos < limit) {
    try {
      auto c = read_chunk(in_, pos, limit);
      if (c.info.sequence != chunks_.size()) {
        throw Error(ErrorCode::CorruptChunk, "chunk sequence " + std::to_string(c.info.sequence) + " out of order");
      }
      chunks_.push_back(c.info);
      entries_.insert(entries_.end(), c.entries.begin(), c.entries.end());
      pos = c.end;
    } catch (const Error& e) {
      if (mode == ReadMode::Strict) throw;
      damage_ = e.what();
      recovered_ = true;
      break;
    }
  }
  if (footer_) {
    const auto& idx = footer_->index;
    const bool same = idx.size() == entries_.size() &&
                      std::equal(idx.begin(), idx.end(), entries_.begin(), [](const IndexEntry& a, const IndexEntry& b) {
                        return a.stream == b.stream && a.timestamp_ns == b.timestamp_ns && a.offset == b.offset;
                      });
    if (!same) {
      if (mode == ReadMode::Strict) throw Error(ErrorCode::CorruptIndex, "index disagrees with the chunks");
      footer_.reset();
      recovered_ = true;
    }
  } else {
    recovered_ = true;
  }
}

std::vector<IndexEntry> SessionReader::entries(std::uint8_t stream) const {
  std::vector<IndexEntry> out;
  for (const auto& e : entries_) {
    if (e.stream == stream) out.push_back(e);
  }
  return out;
}

std::vector<std::uint8_t> SessionReader::payload(const IndexEntry& e) const {
  const auto head = read_at(in_, e.offset, kRecordHeaderSize);
  detail::Reader r(head, ErrorCode::CorruptChunk, "record");
  if (r.u8() != e.stream) throw Error(ErrorCode::CorruptIndex, "index entry does not point at its record");
  r.skip(3);
  if (r.i64() != e.timestamp_ns) throw Error(ErrorCode::CorruptIndex, "index entry does not point at its record");
  const std::uint32_t n = r.u32();
  if (e.offset + kRecordHeaderSize + n > size_) throw Error(ErrorCode::CorruptChunk, "record runs past end of file");
  return read_at(in_, e.offset + kRecordHeaderSize, n);
}

StreamSample SessionReader::sample(const IndexEntry& e) const { return {e.stream, e.timestamp_ns, payload(e)}; }

std::vector<StreamSample> SessionReader::samples() const {
  std::vector<StreamSample> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(sample(e));
  return out;
}

ValidationReport validate_session(const std::filesystem::path& path) {
  ValidationReport rep;
  try {
    SessionReader strict(path, ReadMode::Strict);
    rep.chunks = strict.chunks().size();
    rep.samples = strict.entries().size();
    return rep;
  } catch (const Error& e) {
    rep.ok = false;
    rep.problems.push_back(e.what());
    rep.first_error_code = std::string(to_string(e.code()));
  }
  try {
    SessionReader rec(path, ReadMode::Recover);
    rep.chunks = rec.chunks().size();
    rep.samples = rec.entries().size();
    if (rec.damage()) rep.problems.push_back("first damaged chunk: " + *rec.damage());
    rep.problems.push_back("recoverable prefix: " + std::to_string(rep.chunks) + " chunks, " +
                           std::to_string(rep.samples) + " samples");
  } catch (const Error& e) {
    rep.problems.push_back(std::string("not recoverable: ") + e.what());
  }
  return rep;
}

}  // namespace prx::session
