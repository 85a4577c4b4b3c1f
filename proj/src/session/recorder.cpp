#include "prx/session/recorder.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "prx/error.hpp"
#include "prx/tactile/tactile.hpp"

namespace prx::session {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Bounded single-producer single-consumer queue.
class SampleQueue {
 public:
  explicit SampleQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(StreamSample s, std::stop_token stop) {
    std::unique_lock lock(mu_);
    if (!cv_.wait(lock, stop, [&] { return q_.size() < capacity_; })) return false;
    q_.push_back(std::move(s));
    cv_.notify_all();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  enum class Pop { Item, Closed, Timeout };

  Pop pop(StreamSample& out, std::chrono::nanoseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !q_.empty() || closed_; })) return Pop::Timeout;
    if (q_.empty()) return Pop::Closed;
    out = std::move(q_.front());
    q_.pop_front();
    cv_.notify_all();
    return Pop::Item;
  }

 private:
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<StreamSample> q_;
  std::size_t capacity_;
  bool closed_ = false;
};

class SyntheticSource : public Source {
 public:
  SyntheticSource(StreamInfo info, SessionHeader header, SyntheticOptions opt)
      : info_(info), header_(std::move(header)), opt_(opt), rng_(opt.seed * 1000003u + info.id) {
    if (info_.rate_millihz == 0) throw Error(ErrorCode::RateOutOfRange, "stream rate is zero");
    if (opt_.jitter_ns < 0) throw Error(ErrorCode::InvalidArgument, "negative jitter");
    period_ns_ = static_cast<std::int64_t>(std::llround(1e12 / info_.rate_millihz));
    if (2 * opt_.jitter_ns >= period_ns_) throw Error(ErrorCode::InvalidArgument, "jitter exceeds half the period");
    start_ = std::chrono::steady_clock::now();
  }

  StreamInfo info() const override { return info_; }

  std::optional<StreamSample> next(std::stop_token stop) override {
    std::uniform_int_distribution<std::int64_t> jitter(-opt_.jitter_ns, opt_.jitter_ns);
    const std::int64_t ts = opt_.jitter_ns + k_ * period_ns_ + jitter(rng_);
    if (opt_.stop_after_ns && ts > *opt_.stop_after_ns) return std::nullopt;
    if (opt_.realtime) {
      const auto due = start_ + std::chrono::nanoseconds(ts);
      while (!stop.stop_requested() && std::chrono::steady_clock::now() < due) {
        std::this_thread::sleep_for(std::min<std::chrono::nanoseconds>(due - std::chrono::steady_clock::now(),
                                                                        std::chrono::milliseconds(5)));
      }
      if (stop.stop_requested()) return std::nullopt;
    }
    StreamSample s{info_.id, ts, payload(ts)};
    ++k_;
    return s;
  }

 private:
  std::vector<std::uint8_t> payload(std::int64_t ts) {
    const double t = static_cast<double>(ts) * 1e-9;
    using tactile::SensorId;
    switch (info_.kind) {
      case StreamKind::JointBus:
        return encode_joint_bus(synthetic_joint_angles(t), header_, static_cast<std::uint8_t>(k_));
      case StreamKind::WristCamera: {
        tactile::TactileFrame f{info_.id == streams::kWristLeft ? SensorId::WristLeft : SensorId::WristRight, ts,
                                tactile::Image(opt_.image_height, opt_.image_width)};
        for (int r = 0; r < f.image.height; ++r) {
          for (int c = 0; c < f.image.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
              f.image.at(r, c, ch) = static_cast<std::uint8_t>(r + 2 * c + 3 * static_cast<int>(k_) + 60 * ch);
            }
          }
        }
        return tactile::encode_frame(f);
      }
      case StreamKind::TactileSuper: {
        tactile::SynthOptions so;
        so.height = opt_.image_height;
        so.width = opt_.image_width;
        so.timestamp_ns = ts;
        std::vector<tactile::TactileFrame> parts;
        const SensorId ids[3] = {SensorId::ThumbDistal, SensorId::IndexDistal, SensorId::MiddleDistal};
        for (int i = 0; i < 3; ++i) {
          const double row = (0.5 + 0.3 * std::sin(1.3 * t + i)) * (so.height - 1);
          const double col = (0.5 + 0.3 * std::cos(0.9 * t + 2 * i)) * (so.width - 1);
          const double force = 20.0 * (1.0 + std::sin(2.0 * t + i));
          parts.push_back(tactile::synth_press(ids[i], row, col, force, rng_(), so));
        }
        const auto hand = info_.id == streams::kTactileLeft ? tactile::Hand::Left : tactile::Hand::Right;
        return tactile::encode_frame(tactile::as_frame(tactile::super_image(parts, hand)));
      }
      default:
        throw Error(ErrorCode::InvalidArgument, "no synthetic generator for " + stream_name(info_.id));
    }
  }

  StreamInfo info_;
  SessionHeader header_;
  SyntheticOptions opt_;
  std::mt19937_64 rng_;
  std::int64_t period_ns_ = 0;
  std::int64_t k_ = 0;
  std::chrono::steady_clock::time_point start_;
};

class ReplaySource : public Source {
 public:
  ReplaySource(const std::filesystem::path& path, std::uint8_t stream) : reader_(path), stream_(stream) {
    const StreamInfo* s = reader_.header().find(stream);
    if (!s) throw Error(ErrorCode::MissingStream, stream_name(stream) + " not in " + path.string());
    info_ = *s;
    entries_ = reader_.entries(stream);
  }

  StreamInfo info() const override { return info_; }

  std::optional<StreamSample> next(std::stop_token) override {
    if (pos_ >= entries_.size()) return std::nullopt;
    return reader_.sample(entries_[pos_++]);
  }

 private:
  SessionReader reader_;
  std::uint8_t stream_;
  StreamInfo info_;
  std::vector<IndexEntry> entries_;
  std::size_t pos_ = 0;
};

struct Lane {
  std::uint8_t id = 0;
  std::unique_ptr<SampleQueue> queue;
  std::optional<StreamSample> head;
  bool ended = false;
  std::int64_t last_ts = 0;
  std::exception_ptr error;
};

}  // namespace

std::vector<std::uint8_t> encode_joint_bus(std::span<const double> angles, const SessionHeader& header,
                                           std::uint8_t sequence) {
  if (angles.size() != kBusJoints) {
    throw Error(ErrorCode::DimensionMismatch, "expected 22 joint angles, got " + std::to_string(angles.size()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kBusJoints * kEncoderFrameSize);
  for (std::size_t j = 0; j < kBusJoints; ++j) {
    const auto id = static_cast<std::uint8_t>(j);
    const auto f = encode_frame({id, radians_to_count(angles[j], header.calibration_for(id)), sequence});
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

std::vector<double> decode_joint_bus(std::span<const std::uint8_t> payload, const SessionHeader& header) {
  const auto parsed = parse_encoder_frames(payload);
  std::vector<double> out(kBusJoints, 0.0);
  std::vector<bool> seen(kBusJoints, false);
  for (const auto& f : parsed.frames) {
    if (f.joint >= kBusJoints) continue;
    out[f.joint] = count_to_radians(f.count, header.calibration_for(f.joint));
    seen[f.joint] = true;
  }
  for (std::size_t j = 0; j < kBusJoints; ++j) {
    if (!seen[j]) throw Error(ErrorCode::CorruptChunk, "joint-bus sample has no frame for joint " + std::to_string(j));
  }
  return out;
}

SessionHeader synthetic_header(const std::string& variant, std::uint64_t seed) {
  SessionHeader h;
  h.section = "SESS";
  h.variant = variant;
  h.streams = {{streams::kJointBus, StreamKind::JointBus, 20000},
               {streams::kWristLeft, StreamKind::WristCamera, 20000},
               {streams::kWristRight, StreamKind::WristCamera, 20000},
               {streams::kTactileLeft, StreamKind::TactileSuper, 20000},
               {streams::kTactileRight, StreamKind::TactileSuper, 20000}};
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < kBusJoints; ++j) {
    JointCalibration c;
    c.joint = static_cast<std::uint8_t>(j);
    c.calibration.zero_offset = static_cast<std::uint16_t>(rng() % kCountsPerTurn);
    c.calibration.sign = (rng() & 1) ? 1 : -1;
    h.calibration.push_back(c);
  }
  return h;
}

std::vector<double> synthetic_joint_angles(double t) {
  std::vector<double> q(kBusJoints);
  for (std::size_t j = 0; j < kBusJoints; ++j) {
    const double amp = j < 8 ? 0.6 : 0.7;
    q[j] = amp * std::sin(2.0 * kPi * (0.2 + 0.03 * static_cast<double>(j)) * t + 0.4 * static_cast<double>(j));
    if (j >= 8) q[j] = std::abs(q[j]);  // finger joints stay in flexion
  }
  return q;
}

std::unique_ptr<Source> make_synthetic_source(std::uint8_t stream, const SessionHeader& header,
                                              const SyntheticOptions& options) {
  const StreamInfo* s = header.find(stream);
  if (!s) throw Error(ErrorCode::MissingStream, stream_name(stream) + " not declared");
  return std::make_unique<SyntheticSource>(*s, header, options);
}

std::vector<std::unique_ptr<Source>> make_synthetic_sources(const SessionHeader& header,
                                                            const SyntheticOptions& options) {
  std::vector<std::unique_ptr<Source>> out;
  for (const auto& s : header.streams) out.push_back(make_synthetic_source(s.id, header, options));
  return out;
}

std::unique_ptr<Source> make_replay_source(const std::filesystem::path& path, std::uint8_t stream) {
  return std::make_unique<ReplaySource>(path, stream);
}

RecordSummary record(std::vector<std::unique_ptr<Source>>& sources, const SessionHeader& header,
                     const std::filesystem::path& path, const RecordOptions& opt) {
  if (opt.duration_ns <= 0) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  if (opt.stall_ns <= 0 || opt.queue_capacity == 0) throw Error(ErrorCode::InvalidArgument, "bad recorder options");
  std::vector<Lane> lanes(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    lanes[i].id = sources[i]->info().id;
    lanes[i].queue = std::make_unique<SampleQueue>(opt.queue_capacity);
    if (!header.find(lanes[i].id)) throw Error(ErrorCode::InvalidArgument, stream_name(lanes[i].id) + " not declared");
    for (std::size_t k = 0; k < i; ++k) {
      if (lanes[k].id == lanes[i].id) throw Error(ErrorCode::InvalidArgument, "two sources for " + stream_name(lanes[i].id));
    }
  }
  for (const auto& s : header.streams) {
    if (std::none_of(lanes.begin(), lanes.end(), [&](const Lane& l) { return l.id == s.id; })) {
      throw Error(ErrorCode::MissingStream, "no source for " + stream_name(s.id));
    }
  }

  SessionWriter writer(path, header);
  RecordSummary summary;
  {
    std::vector<std::jthread> producers;
    producers.reserve(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      producers.emplace_back([&, i](std::stop_token stop) {
        try {
          while (!stop.stop_requested()) {
            auto s = sources[i]->next(stop);
            if (!s || !lanes[i].queue->push(std::move(*s), stop)) break;
          }
        } catch (...) {
          lanes[i].error = std::current_exception();
        }
        lanes[i].queue->close();
      });
    }
    auto stop_all = [&] {
      for (auto& p : producers) p.request_stop();
    };

    const auto wall_timeout = std::chrono::nanoseconds(opt.stall_ns);
    try {
      for (;;) {
        for (auto& l : lanes) {
          if (l.ended || l.head) continue;
          StreamSample s;
          switch (l.queue->pop(s, wall_timeout)) {
            case SampleQueue::Pop::Item: l.head = std::move(s); break;
            case SampleQueue::Pop::Closed:
              l.ended = true;
              if (l.error) std::rethrow_exception(l.error);
              break;
            case SampleQueue::Pop::Timeout:
              summary.stop = StopReason::Stalled;
              summary.stalled_stream = l.id;
              break;
          }
          if (summary.stop == StopReason::Stalled) break;
        }
        if (summary.stop == StopReason::Stalled) break;

        Lane* next = nullptr;
        for (auto& l : lanes) {
          if (!l.head) continue;
          if (!next || std::pair(l.head->timestamp_ns, l.id) < std::pair(next->head->timestamp_ns, next->id)) next = &l;
        }
        if (!next || next->head->timestamp_ns >= opt.duration_ns) break;

        const std::int64_t frontier = next->head->timestamp_ns;
        for (const auto& l : lanes) {
          if (l.ended && frontier - l.last_ts > opt.stall_ns) {
            summary.stop = StopReason::Stalled;
            summary.stalled_stream = l.id;
            break;
          }
        }
        if (summary.stop == StopReason::Stalled) break;

        StreamSample s = std::move(*next->head);
        next->head.reset();
        if (s.timestamp_ns < next->last_ts) {
          writer.count_drop(s.stream);
          continue;
        }
        next->last_ts = s.timestamp_ns;
        writer.append(s);
        ++summary.samples;
      }
    } catch (...) {
      stop_all();
      writer.finish(StopReason::Aborted);
      throw;
    }
    stop_all();
  }
  writer.finish(summary.stop, summary.stalled_stream);
  summary.stats = writer.stats();
  if (summary.stop == StopReason::Stalled) {
    throw Error(ErrorCode::StreamStalled, stream_name(summary.stalled_stream) + " (stream " +
                                              std::to_string(summary.stalled_stream) + ") silent for over " +
                                              std::to_string(opt.stall_ns / 1'000'000) + " ms; " +
                                              std::to_string(summary.samples) + " samples kept in " + path.string());
  }
  return summary;
}

}  // namespace prx::session
