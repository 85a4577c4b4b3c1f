#pragma once

#include <cstdint>

#include "prx/config.hpp"
#include "prx/export/episode.hpp"

namespace prx::exporter {

struct AugmentConfig {
  double brightness = 0.1;        // factor 1 + U[-b, b] per wrist image
  double hue = 0.1;               // HSV hue shift U[-h, h] turns per wrist image
  double joint_noise_deg = 10.0;  // U[-n, n] per arm joint when applied
  double joint_noise_prob = 0.1;  // per step
  double dropout_prob = 0.3;      // per wrist image
  std::uint64_t seed = 0;

  // Keys: brightness, hue, joint_noise_deg, joint_noise_prob, dropout_prob, seed.
  static AugmentConfig from(const KeyValueConfig& cfg);
};

struct AugmentStats {
  std::size_t steps = 0;
  std::size_t noised_steps = 0;
  std::size_t images = 0;
  std::size_t dropped_images = 0;
  double max_noise_rad = 0.0;
};

// Throws InvalidConfig for a probability outside [0, 1] or a negative or
// non-finite bound. Only arm states and wrist images change; actions,
// timestamps and tactile images are copied through. The input is not
// modified and the result depends only on the episode and the config.
Episode augment(const Episode& episode, const AugmentConfig& config, AugmentStats* stats = nullptr);

// Brightness scale then hue rotation, both skipped when zero.
void jitter_color(tactile::Image& image, double brightness_offset, double hue_turns);

}  // namespace prx::exporter
