#include "prx/export/episode.hpp"

#include <map>

#include "../session/bytes.hpp"
#include "json.hpp"
#include "prx/error.hpp"

namespace prx::exporter {
namespace {

namespace st = session::streams;

std::vector<std::uint8_t> pack(std::span<const double> v) {
  std::vector<std::uint8_t> out;
  session::detail::Writer w(out);
  for (double x : v) w.f64(x);
  return out;
}

std::vector<double> unpack(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kActionSize * 8) throw Error(ErrorCode::CorruptChunk, "joint record is not 22 doubles");
  session::detail::Reader r(bytes, ErrorCode::CorruptChunk, "joint record");
  std::vector<double> v(kActionSize);
  for (auto& x : v) x = r.f64();
  return v;
}

tactile::SuperImage super_delta(const tactile::SuperImage& cur, const tactile::SuperImage& first) {
  const auto d = tactile::delta(tactile::as_frame(cur), tactile::as_frame(first));
  return {cur.hand, cur.timestamp_ns, d.image};
}

}  // namespace

std::string to_string(SourceTag tag) { return tag == SourceTag::Perioperation ? "perioperation" : "teleoperation"; }

std::optional<SourceTag> parse_source(const std::string& name) {
  if (name == "perioperation" || name == "periop") return SourceTag::Perioperation;
  if (name == "teleoperation" || name == "teleop") return SourceTag::Teleoperation;
  return std::nullopt;
}

bool EpisodeStep::operator==(const EpisodeStep& o) const {
  auto same = [](const tactile::SuperImage& a, const tactile::SuperImage& b) {
    return a.hand == b.hand && a.timestamp_ns == b.timestamp_ns && a.image == b.image;
  };
  return timestamp_ns == o.timestamp_ns && state == o.state && action == o.action && wrist == o.wrist &&
         same(tactile_delta[0], o.tactile_delta[0]) && same(tactile_delta[1], o.tactile_delta[1]);
}

double Episode::duration_s() const {
  if (steps.empty()) return 0.0;
  return static_cast<double>(steps.back().timestamp_ns - steps.front().timestamp_ns) * 1e-9;
}

bool Episode::operator==(const Episode& o) const {
  return source == o.source && task == o.task && horizon == o.horizon && variant == o.variant && steps == o.steps;
}

Episode export_episode(std::span<const session::AlignedStep> steps, int horizon, SourceTag source,
                       const std::string& task, const std::string& variant) {
  const std::size_t n = steps.size();
  if (n < 2) throw Error(ErrorCode::TooShort, "episode needs at least 2 steps, got " + std::to_string(n));
  if (horizon < 1 || static_cast<std::size_t>(horizon) >= n) {
    throw Error(ErrorCode::BadHorizon, "horizon " + std::to_string(horizon) + " for " + std::to_string(n) + " steps");
  }
  for (const auto& s : steps) {
    if (s.joints.size() != kActionSize) {
      throw Error(ErrorCode::DimensionMismatch, "step has " + std::to_string(s.joints.size()) + " joints");
    }
  }
  const auto k = static_cast<std::size_t>(horizon);
  Episode ep;
  ep.source = source;
  ep.task = task;
  ep.horizon = horizon;
  ep.variant = variant;
  ep.steps.reserve(n);
  const bool have_tactile = !steps[0].tactile[0].image.data.empty();
  for (std::size_t t = 0; t < n; ++t) {
    EpisodeStep e;
    e.timestamp_ns = steps[t].grid_ns;
    e.state = steps[t].joints;
    e.action.resize(kActionSize);
    for (std::size_t j = 0; j < kArmJoints; ++j) {
      e.action[j] = t + k < n ? steps[t + k].joints[j] - steps[t].joints[j] : 0.0;
    }
    const auto& next = steps[std::min(t + 1, n - 1)].joints;
    for (std::size_t j = kArmJoints; j < kActionSize; ++j) e.action[j] = next[j];
    e.wrist = steps[t].wrist;
    for (std::size_t side = 0; side < 2; ++side) {
      e.tactile_delta[side] = have_tactile ? super_delta(steps[t].tactile[side], steps[0].tactile[side])
                                           : steps[t].tactile[side];
    }
    ep.steps.push_back(std::move(e));
  }
  return ep;
}

void write_episode(const Episode& ep, const std::filesystem::path& path) {
  session::SessionHeader h;
  h.section = "EPIS";
  h.variant = ep.variant;
  h.streams = {{st::kWristLeft, session::StreamKind::WristCamera, 20000},
               {st::kWristRight, session::StreamKind::WristCamera, 20000},
               {st::kTactileLeft, session::StreamKind::TactileSuper, 20000},
               {st::kTactileRight, session::StreamKind::TactileSuper, 20000},
               {st::kActions, session::StreamKind::Actions, 20000},
               {st::kJointState, session::StreamKind::JointState, 20000},
               {st::kMeta, session::StreamKind::Meta, 0}};
  session::SessionWriter w(path, h);
  const nlohmann::json meta{{"source", to_string(ep.source)},
                            {"task", ep.task},
                            {"horizon", ep.horizon},
                            {"steps", ep.steps.size()},
                            {"duration_s", ep.duration_s()}};
  const std::string text = meta.dump();
  const std::int64_t t0 = ep.steps.empty() ? 0 : ep.steps.front().timestamp_ns;
  w.append({st::kMeta, t0, std::vector<std::uint8_t>(text.begin(), text.end())});
  for (const auto& s : ep.steps) {
    for (std::size_t side = 0; side < 2; ++side) {
      w.append({static_cast<std::uint8_t>(st::kWristLeft + side), s.timestamp_ns, tactile::encode_frame(s.wrist[side])});
      w.append({static_cast<std::uint8_t>(st::kTactileLeft + side), s.timestamp_ns,
                tactile::encode_frame(tactile::as_frame(s.tactile_delta[side]))});
    }
    w.append({st::kActions, s.timestamp_ns, pack(s.action)});
    w.append({st::kJointState, s.timestamp_ns, pack(s.state)});
  }
  w.finish();
}

Episode read_episode(const std::filesystem::path& path) {
  const session::SessionReader r(path);
  if (r.header().section != "EPIS") throw Error(ErrorCode::BadMagic, path.string() + " is not an episode file");
  Episode ep;
  ep.variant = r.header().variant;
  const auto meta_entries = r.entries(st::kMeta);
  if (meta_entries.size() != 1) throw Error(ErrorCode::CorruptChunk, "episode needs exactly one metadata record");
  const auto meta_bytes = r.payload(meta_entries[0]);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
    ep.task = meta.at("task").get<std::string>();
    ep.horizon = meta.at("horizon").get<int>();
    const auto src = parse_source(meta.at("source").get<std::string>());
    if (!src) throw Error(ErrorCode::CorruptChunk, "unknown episode source");
    ep.source = *src;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptChunk, std::string("episode metadata: ") + e.what());
  }
  const auto actions = r.entries(st::kActions);
  const auto states = r.entries(st::kJointState);
  std::array<std::vector<session::IndexEntry>, 4> images{r.entries(st::kWristLeft), r.entries(st::kWristRight),
                                                         r.entries(st::kTactileLeft), r.entries(st::kTactileRight)};
  const std::size_t n = actions.size();
  if (states.size() != n || std::any_of(images.begin(), images.end(), [&](const auto& v) { return v.size() != n; })) {
    throw Error(ErrorCode::CorruptChunk, "episode streams have different lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    EpisodeStep s;
    s.timestamp_ns = actions[i].timestamp_ns;
    s.action = unpack(r.payload(actions[i]));
    s.state = unpack(r.payload(states[i]));
    for (std::size_t side = 0; side < 2; ++side) {
      s.wrist[side] = tactile::decode_frame(r.payload(images[side][i]));
      s.tactile_delta[side] = tactile::from_frame(tactile::decode_frame(r.payload(images[2 + side][i])));
    }
    ep.steps.push_back(std::move(s));
  }
  return ep;
}

}  // namespace prx::exporter
