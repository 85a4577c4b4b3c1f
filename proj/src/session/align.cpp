#include "prx/session/align.hpp"

#include <algorithm>
#include <cmath>

#include "prx/error.hpp"
#include "prx/session/recorder.hpp"

namespace prx::session {

std::int64_t grid_period_ns(double rate_hz) {
  if (!std::isfinite(rate_hz) || rate_hz <= 0.0 || rate_hz > 1e9) {
    throw Error(ErrorCode::RateOutOfRange, "rate " + std::to_string(rate_hz) + " Hz");
  }
  return static_cast<std::int64_t>(std::llround(1e9 / rate_hz));
}

GridMatch match_grid(const std::vector<std::vector<std::int64_t>>& timestamps, double rate_hz) {
  GridMatch out;
  out.period_ns = grid_period_ns(rate_hz);
  if (timestamps.empty()) throw Error(ErrorCode::MissingStream, "no streams");
  std::int64_t t0 = std::numeric_limits<std::int64_t>::min();
  std::int64_t t_end = std::numeric_limits<std::int64_t>::max();
  for (std::size_t s = 0; s < timestamps.size(); ++s) {
    const auto& ts = timestamps[s];
    if (ts.empty()) throw Error(ErrorCode::MissingStream, "stream " + std::to_string(s) + " has no samples");
    if (!std::is_sorted(ts.begin(), ts.end())) {
      throw Error(ErrorCode::InvalidArgument, "stream " + std::to_string(s) + " timestamps are not sorted");
    }
    t0 = std::max(t0, ts.front());
    t_end = std::min(t_end, ts.back());
  }
  const std::int64_t half = out.period_ns / 2;
  for (std::int64_t g = t0; g <= t_end; g += out.period_ns) {
    TickMatch m;
    m.grid_ns = g;
    bool ok = true;
    for (const auto& ts : timestamps) {
      const auto it = std::lower_bound(ts.begin(), ts.end(), g);
      std::size_t best;
      if (it == ts.end()) {
        best = ts.size() - 1;
      } else if (it == ts.begin()) {
        best = 0;
      } else {
        const auto after = static_cast<std::size_t>(it - ts.begin());
        // lower_bound finds the first of equal timestamps; the earlier one wins ties.
        std::size_t before = after - 1;
        while (before > 0 && ts[before - 1] == ts[before]) --before;
        best = g - ts[before] <= ts[after] - g ? before : after;
      }
      if (std::llabs(ts[best] - g) > half) ok = false;
      m.sample.push_back(best);
    }
    if (ok) {
      out.ticks.push_back(std::move(m));
    } else {
      ++out.dropped;
    }
  }
  return out;
}

bool AlignedStep::operator==(const AlignedStep& o) const {
  return grid_ns == o.grid_ns && joints == o.joints && wrist == o.wrist && source_ns == o.source_ns &&
         tactile[0].hand == o.tactile[0].hand && tactile[0].image == o.tactile[0].image &&
         tactile[0].timestamp_ns == o.tactile[0].timestamp_ns && tactile[1].hand == o.tactile[1].hand &&
         tactile[1].image == o.tactile[1].image && tactile[1].timestamp_ns == o.tactile[1].timestamp_ns;
}

AlignedSession align(const SessionReader& reader, const AlignOptions& opt) {
  AlignedSession out;
  out.header = reader.header();
  std::array<std::vector<IndexEntry>, 5> entries;
  std::vector<std::vector<std::int64_t>> ts(5);
  for (std::size_t k = 0; k < 5; ++k) {
    const std::uint8_t id = kAlignedStreams[k];
    if (!reader.header().find(id)) throw Error(ErrorCode::MissingStream, stream_name(id) + " not declared");
    entries[k] = reader.entries(id);
    if (entries[k].empty()) throw Error(ErrorCode::MissingStream, stream_name(id) + " has no samples");
    for (const auto& e : entries[k]) ts[k].push_back(e.timestamp_ns);
  }
  const auto grid = match_grid(ts, opt.rate_hz);
  out.period_ns = grid.period_ns;
  out.dropped = grid.dropped;
  out.steps.reserve(grid.ticks.size());
  for (const auto& tick : grid.ticks) {
    AlignedStep step;
    step.grid_ns = tick.grid_ns;
    for (std::size_t k = 0; k < 5; ++k) step.source_ns[k] = entries[k][tick.sample[k]].timestamp_ns;
    step.joints = decode_joint_bus(reader.payload(entries[0][tick.sample[0]]), reader.header());
    if (opt.decode_images) {
      for (std::size_t side = 0; side < 2; ++side) {
        step.wrist[side] = tactile::decode_frame(reader.payload(entries[1 + side][tick.sample[1 + side]]));
        step.tactile[side] =
            tactile::from_frame(tactile::decode_frame(reader.payload(entries[3 + side][tick.sample[3 + side]])));
      }
    }
    out.steps.push_back(std::move(step));
  }
  return out;
}

void write_aligned(const AlignedSession& aligned, const std::filesystem::path& path) {
  SessionHeader h = aligned.header;
  h.streams.erase(std::remove_if(h.streams.begin(), h.streams.end(),
                                 [](const StreamInfo& s) {
                                   return std::find(kAlignedStreams.begin(), kAlignedStreams.end(), s.id) ==
                                          kAlignedStreams.end();
                                 }),
                  h.streams.end());
  SessionWriter w(path, h);
  std::uint8_t seq = 0;
  for (const auto& step : aligned.steps) {
    const std::int64_t t = step.grid_ns;
    w.append({streams::kJointBus, t, encode_joint_bus(step.joints, h, seq++)});
    for (std::size_t side = 0; side < 2; ++side) {
      w.append({kAlignedStreams[1 + side], t, tactile::encode_frame(step.wrist[side])});
      w.append({kAlignedStreams[3 + side], t, tactile::encode_frame(tactile::as_frame(step.tactile[side]))});
    }
  }
  w.finish();
}

}  // namespace prx::session
