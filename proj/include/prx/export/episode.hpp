#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prx/session/align.hpp"
#include "prx/tactile/tactile.hpp"

namespace prx::exporter {

enum class SourceTag : std::uint8_t { Perioperation = 0, Teleoperation = 1 };
std::string to_string(SourceTag tag);
std::optional<SourceTag> parse_source(const std::string& name);

inline constexpr std::size_t kArmJoints = 8;
inline constexpr std::size_t kHandJoints = 14;
inline constexpr std::size_t kActionSize = kArmJoints + kHandJoints;

struct EpisodeStep {
  std::int64_t timestamp_ns = 0;
  std::vector<double> state;   // 22 joint angles, arm first
  std::vector<double> action;  // 8 arm deltas, then 14 absolute hand targets
  std::array<tactile::TactileFrame, 2> wrist;
  // Offset-128 difference between the current and first super-image of the episode.
  std::array<tactile::SuperImage, 2> tactile_delta;

  bool operator==(const EpisodeStep& o) const;
};

struct Episode {
  SourceTag source = SourceTag::Perioperation;
  std::string task;
  int horizon = 1;
  std::string variant;
  std::vector<EpisodeStep> steps;

  // Last minus first step timestamp.
  double duration_s() const;
  bool operator==(const Episode& o) const;
};

// Arm action at t is arm(t + k) - arm(t), zero once t + k runs past the end.
// Hand action at t is hand(t + 1), holding the final pose on the last step.
// Throws TooShort for fewer than 2 steps, BadHorizon for k < 1 or
// k >= number of steps, DimensionMismatch for a joint vector that is not 22.
Episode export_episode(std::span<const session::AlignedStep> steps, int horizon, SourceTag source,
                       const std::string& task = "", const std::string& variant = "");

// Episode files reuse the session container with the "EPIS" section tag.
// Streams: wrist images 1 and 2, tactile deltas 3 and 4, actions 5 (22 f64),
// joint state 6 (22 f64), and one JSON metadata record on stream 7.
void write_episode(const Episode& episode, const std::filesystem::path& path);
Episode read_episode(const std::filesystem::path& path);

}  // namespace prx::exporter
