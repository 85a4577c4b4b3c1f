#include "prx/export/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "prx/error.hpp"

namespace prx::exporter {
namespace {

constexpr double kPi = 3.14159265358979323846;

void check(const AugmentConfig& c) {
  auto bound = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be >= 0");
  };
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be in [0, 1]");
  };
  bound(c.brightness, "brightness");
  bound(c.hue, "hue");
  bound(c.joint_noise_deg, "joint_noise_deg");
  prob(c.joint_noise_prob, "joint_noise_prob");
  prob(c.dropout_prob, "dropout_prob");
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

AugmentConfig AugmentConfig::from(const KeyValueConfig& cfg) {
  AugmentConfig c;
  if (auto v = cfg.get_double("brightness")) c.brightness = *v;
  if (auto v = cfg.get_double("hue")) c.hue = *v;
  if (auto v = cfg.get_double("joint_noise_deg")) c.joint_noise_deg = *v;
  if (auto v = cfg.get_double("joint_noise_prob")) c.joint_noise_prob = *v;
  if (auto v = cfg.get_double("dropout_prob")) c.dropout_prob = *v;
  if (auto v = cfg.get_double("seed")) {
    if (*v < 0 || *v != std::floor(*v)) throw Error(ErrorCode::InvalidConfig, "seed must be a non-negative integer");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  check(c);
  return c;
}

void jitter_color(tactile::Image& im, double b, double hue) {
  const std::size_t n = im.data.size() / 3;
  if (b != 0.0) {
    for (auto& v : im.data) v = to_byte(v * (1.0 + b));
  }
  if (hue == 0.0) return;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t* p = &im.data[3 * i];
    const double r = p[0] / 255.0;
    const double g = p[1] / 255.0;
    const double bl = p[2] / 255.0;
    const double mx = std::max({r, g, bl});
    const double mn = std::min({r, g, bl});
    const double c = mx - mn;
    if (c <= 0.0) continue;  // grey has no hue
    double h;
    if (mx == r) {
      h = std::fmod((g - bl) / c, 6.0);
    } else if (mx == g) {
      h = (bl - r) / c + 2.0;
    } else {
      h = (r - g) / c + 4.0;
    }
    h = std::fmod(h / 6.0 + hue + 2.0, 1.0) * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
    double rr = 0, gg = 0, bb = 0;
    switch (static_cast<int>(h)) {
      case 0: rr = c, gg = x; break;
      case 1: rr = x, gg = c; break;
      case 2: gg = c, bb = x; break;
      case 3: gg = x, bb = c; break;
      case 4: rr = x, bb = c; break;
      default: rr = c, bb = x; break;
    }
    p[0] = to_byte((rr + mn) * 255.0);
    p[1] = to_byte((gg + mn) * 255.0);
    p[2] = to_byte((bb + mn) * 255.0);
  }
}

Episode augment(const Episode& in, const AugmentConfig& cfg, AugmentStats* stats) {
  check(cfg);
  Episode out = in;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const double noise = cfg.joint_noise_deg * kPi / 180.0;
  AugmentStats local;
  // Every step draws the same number of variates, so the stream position
  // does not depend on which augmentations fire.
  for (auto& s : out.steps) {
    ++local.steps;
    const bool apply_noise = unit(rng) < cfg.joint_noise_prob;
    std::array<double, kArmJoints> d{};
    for (auto& v : d) v = sym(rng) * noise;
    if (apply_noise) {
      ++local.noised_steps;
      for (std::size_t j = 0; j < kArmJoints && j < s.state.size(); ++j) {
        s.state[j] += d[j];
        local.max_noise_rad = std::max(local.max_noise_rad, std::abs(d[j]));
      }
    }
    for (auto& w : s.wrist) {
      ++local.images;
      const bool drop = unit(rng) < cfg.dropout_prob;
      const double b = sym(rng) * cfg.brightness;
      const double h = sym(rng) * cfg.hue;
      if (drop) {
        ++local.dropped_images;
        std::fill(w.image.data.begin(), w.image.data.end(), 0);
      } else {
        jitter_color(w.image, b, h);
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace prx::exporter
