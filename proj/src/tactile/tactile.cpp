#include "prx/tactile/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "prx/error.hpp"

namespace prx::tactile {
namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string dims(const Image& im) { return std::to_string(im.height) + "x" + std::to_string(im.width); }

}  // namespace

Image::Image(int h, int w, std::uint8_t fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {
  if (h < 0 || w < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
}

std::string_view to_string(SensorId id) {
  switch (id) {
    case SensorId::ThumbDistal: return "thumb-distal";
    case SensorId::IndexDistal: return "index-distal";
    case SensorId::MiddleDistal: return "middle-distal";
    case SensorId::ThumbProximal: return "thumb-proximal";
    case SensorId::IndexProximal: return "index-proximal";
    case SensorId::MiddleProximal: return "middle-proximal";
    case SensorId::RingProximal: return "ring-proximal";
    case SensorId::Palm: return "palm";
    case SensorId::WristLeft: return "wrist-left";
    case SensorId::WristRight: return "wrist-right";
    case SensorId::SuperLeft: return "super-left";
    case SensorId::SuperRight: return "super-right";
  }
  return "unknown";
}

bool is_known(std::uint8_t code) { return code <= 7 || code == 0x20 || code == 0x21 || code == 0x80 || code == 0x81; }

std::optional<SensorId> parse_sensor(std::string_view name) {
  for (std::uint8_t c : {0, 1, 2, 3, 4, 5, 6, 7, 0x20, 0x21, 0x80, 0x81}) {
    if (to_string(static_cast<SensorId>(c)) == name) return static_cast<SensorId>(c);
  }
  return std::nullopt;
}

std::vector<std::uint8_t> encode_frame(const TactileFrame& frame) {
  const Image& im = frame.image;
  if (im.height > 0xFFFF || im.width > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "image too large");
  const std::size_t plane = static_cast<std::size_t>(im.height) * static_cast<std::size_t>(im.width);
  std::vector<std::uint8_t> out(kFrameHeaderSize + 3 * plane, 0);
  out[0] = static_cast<std::uint8_t>(frame.sensor);
  put_u16(&out[1], static_cast<std::uint16_t>(im.height));
  put_u16(&out[3], static_cast<std::uint16_t>(im.width));
  put_u64(&out[5], static_cast<std::uint64_t>(frame.timestamp_ns));
  std::uint8_t* body = out.data() + kFrameHeaderSize;
  for (std::size_t i = 0; i < plane; ++i) {
    body[i] = im.data[3 * i];
    body[plane + i] = im.data[3 * i + 1];
    body[2 * plane + i] = im.data[3 * i + 2];
  }
  return out;
}

TactileFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw Error(ErrorCode::CorruptChunk, "frame shorter than its header");
  TactileFrame f;
  if (!is_known(bytes[0])) throw Error(ErrorCode::CorruptChunk, "unknown sensor code " + std::to_string(bytes[0]));
  f.sensor = static_cast<SensorId>(bytes[0]);
  const int h = get_u16(&bytes[1]);
  const int w = get_u16(&bytes[3]);
  f.timestamp_ns = static_cast<std::int64_t>(get_u64(&bytes[5]));
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  if (bytes.size() != kFrameHeaderSize + 3 * plane) {
    throw Error(ErrorCode::CorruptChunk, "frame size " + std::to_string(bytes.size()) + " does not match " +
                                             std::to_string(h) + "x" + std::to_string(w));
  }
  f.image = Image(h, w);
  const std::uint8_t* body = bytes.data() + kFrameHeaderSize;
  for (std::size_t i = 0; i < plane; ++i) {
    f.image.data[3 * i] = body[i];
    f.image.data[3 * i + 1] = body[plane + i];
    f.image.data[3 * i + 2] = body[2 * plane + i];
  }
  return f;
}

DeltaImage delta(const TactileFrame& current, const TactileFrame& initial) {
  if (current.sensor != initial.sensor) {
    throw Error(ErrorCode::SensorMismatch,
                std::string(to_string(current.sensor)) + " vs " + std::string(to_string(initial.sensor)));
  }
  if (current.image.height != initial.image.height || current.image.width != initial.image.width) {
    throw Error(ErrorCode::DimensionMismatch, dims(current.image) + " vs " + dims(initial.image));
  }
  DeltaImage d;
  d.sensor = current.sensor;
  d.reference_ns = initial.timestamp_ns;
  d.current_ns = current.timestamp_ns;
  d.image = Image(current.image.height, current.image.width);
  for (std::size_t i = 0; i < d.image.data.size(); ++i) {
    const int v = static_cast<int>(current.image.data[i]) - static_cast<int>(initial.image.data[i]) + 128;
    d.image.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  return d;
}

SuperImage super_image(std::span<const TactileFrame> frames, Hand hand) {
  constexpr std::array<SensorId, 3> order{SensorId::ThumbDistal, SensorId::IndexDistal, SensorId::MiddleDistal};
  if (frames.size() != 3) {
    throw Error(ErrorCode::WrongSensorSet, "expected 3 distal frames, got " + std::to_string(frames.size()));
  }
  std::array<const TactileFrame*, 3> slot{};
  for (const auto& f : frames) {
    const auto it = std::find(order.begin(), order.end(), f.sensor);
    if (it == order.end()) throw Error(ErrorCode::WrongSensorSet, std::string(to_string(f.sensor)) + " is not distal");
    auto& s = slot[static_cast<std::size_t>(it - order.begin())];
    if (s) throw Error(ErrorCode::WrongSensorSet, "duplicate " + std::string(to_string(f.sensor)));
    s = &f;
  }
  const int h = slot[0]->image.height;
  const int w = slot[0]->image.width;
  for (const auto* f : slot) {
    if (f->image.height != h || f->image.width != w) {
      throw Error(ErrorCode::DimensionMismatch, dims(f->image) + " vs " + dims(slot[0]->image));
    }
  }
  SuperImage out;
  out.hand = hand;
  out.image = Image(h, 3 * w);
  for (std::size_t k = 0; k < 3; ++k) {
    out.timestamp_ns = k == 0 ? slot[k]->timestamp_ns : std::max(out.timestamp_ns, slot[k]->timestamp_ns);
    for (int r = 0; r < h; ++r) {
      const auto* src = slot[k]->image.data.data() + static_cast<std::size_t>(r) * w * 3;
      auto* dst = out.image.data.data() + (static_cast<std::size_t>(r) * 3 * w + k * static_cast<std::size_t>(w)) * 3;
      std::copy(src, src + static_cast<std::size_t>(w) * 3, dst);
    }
  }
  return out;
}

std::array<Image, 3> split_super_image(const SuperImage& s) {
  if (s.image.width % 3 != 0) throw Error(ErrorCode::DimensionMismatch, "super-image width not divisible by 3");
  const int w = s.image.width / 3;
  std::array<Image, 3> out{Image(s.image.height, w), Image(s.image.height, w), Image(s.image.height, w)};
  for (std::size_t k = 0; k < 3; ++k) {
    for (int r = 0; r < s.image.height; ++r) {
      const auto* src =
          s.image.data.data() + (static_cast<std::size_t>(r) * s.image.width + k * static_cast<std::size_t>(w)) * 3;
      std::copy(src, src + static_cast<std::size_t>(w) * 3, out[k].data.data() + static_cast<std::size_t>(r) * w * 3);
    }
  }
  return out;
}

TactileFrame as_frame(const SuperImage& s) {
  return {s.hand == Hand::Left ? SensorId::SuperLeft : SensorId::SuperRight, s.timestamp_ns, s.image};
}

SuperImage from_frame(const TactileFrame& f) {
  if (f.sensor != SensorId::SuperLeft && f.sensor != SensorId::SuperRight) {
    throw Error(ErrorCode::WrongSensorSet, std::string(to_string(f.sensor)) + " is not a super-image");
  }
  return {f.sensor == SensorId::SuperLeft ? Hand::Left : Hand::Right, f.timestamp_ns, f.image};
}

ContactSummary contact_summary(const Image& im, int threshold) {
  ContactSummary out;
  const std::size_t n = static_cast<std::size_t>(im.height) * static_cast<std::size_t>(im.width);
  out.mask.assign(n, 0);
  double wsum = 0.0;
  double rsum = 0.0;
  double csum = 0.0;
  for (int r = 0; r < im.height; ++r) {
    for (int c = 0; c < im.width; ++c) {
      int mag = 0;
      for (int ch = 0; ch < 3; ++ch) mag = std::max(mag, std::abs(static_cast<int>(im.at(r, c, ch)) - 128));
      if (mag <= threshold) continue;
      out.mask[static_cast<std::size_t>(r) * im.width + c] = 1;
      ++out.count;
      wsum += mag;
      rsum += mag * static_cast<double>(r);
      csum += mag * static_cast<double>(c);
    }
  }
  if (out.count > 0) {
    out.centroid = std::array<double, 2>{rsum / wsum, csum / wsum};
    out.activation = wsum / static_cast<double>(out.count);
  }
  return out;
}

ContactSummary contact_summary(const DeltaImage& d, int threshold) { return contact_summary(d.image, threshold); }

TactileFrame synth_press(SensorId sensor, double row, double col, double force_n, std::uint64_t seed,
                         const SynthOptions& opt) {
  if (!(force_n >= 0.0) || !std::isfinite(force_n)) {
    throw Error(ErrorCode::InvalidArgument, "force must be finite and non-negative");
  }
  if (!(row >= 0.0 && row < opt.height && col >= 0.0 && col < opt.width)) {
    throw Error(ErrorCode::OutOfBounds, "press at (" + std::to_string(row) + ", " + std::to_string(col) +
                                            ") outside " + std::to_string(opt.height) + "x" +
                                            std::to_string(opt.width));
  }
  TactileFrame f;
  f.sensor = sensor;
  f.timestamp_ns = opt.timestamp_ns;
  f.image = Image(opt.height, opt.width);
  std::mt19937_64 rng(seed);
  const double amplitude = std::min(255.0, std::round(3.0 * force_n));
  const double sigma = 8.0 + 0.15 * force_n;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int r = 0; r < opt.height; ++r) {
    for (int c = 0; c < opt.width; ++c) {
      const double d2 = (r - row) * (r - row) + (c - col) * (c - col);
      const int blob = amplitude > 0.0 ? static_cast<int>(std::lround(amplitude * std::exp(-d2 * inv))) : 0;
      for (int ch = 0; ch < 3; ++ch) {
        const int noise = static_cast<int>(rng() % 5) - 2;
        f.image.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(opt.base[ch] + noise + blob, 0, 255));
      }
    }
  }
  return f;
}

}  // namespace prx::tactile
