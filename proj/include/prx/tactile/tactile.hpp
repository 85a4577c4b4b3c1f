#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace prx::tactile {

// Source codes shared by every image stream in a session. Tactile sensors use
// 0..7; wrist cameras and per-hand super-images reuse the same frame codec.
enum class SensorId : std::uint8_t {
  ThumbDistal = 0,
  IndexDistal = 1,
  MiddleDistal = 2,
  ThumbProximal = 3,
  IndexProximal = 4,
  MiddleProximal = 5,
  RingProximal = 6,
  Palm = 7,
  WristLeft = 0x20,
  WristRight = 0x21,
  SuperLeft = 0x80,
  SuperRight = 0x81,
};

enum class Hand : std::uint8_t { Left = 0, Right = 1 };

std::string_view to_string(SensorId id);
std::optional<SensorId> parse_sensor(std::string_view name);
bool is_known(std::uint8_t code);

// 8-bit RGB, row-major, channels interleaved.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0);

  std::uint8_t& at(int row, int col, int ch) { return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch]; }
  std::uint8_t at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  bool operator==(const Image&) const = default;
};

struct TactileFrame {
  SensorId sensor = SensorId::ThumbDistal;
  std::int64_t timestamp_ns = 0;
  Image image;

  bool operator==(const TactileFrame&) const = default;
};

// Offset-128 signed difference; 128 encodes zero.
struct DeltaImage {
  SensorId sensor = SensorId::ThumbDistal;
  std::int64_t reference_ns = 0;
  std::int64_t current_ns = 0;
  Image image;
};

struct SuperImage {
  Hand hand = Hand::Left;
  std::int64_t timestamp_ns = 0;
  Image image;  // H x 3W, thumb | index | middle
};

inline constexpr std::size_t kFrameHeaderSize = 16;
inline constexpr int kDefaultHeight = 120;
inline constexpr int kDefaultWidth = 160;

// 16-byte little-endian header (sensor u8, height u16, width u16, timestamp
// u64, 3 reserved zero bytes) followed by the R, G and B planes.
std::vector<std::uint8_t> encode_frame(const TactileFrame& frame);
// Throws CorruptChunk on a short buffer or a size that disagrees with H x W.
TactileFrame decode_frame(std::span<const std::uint8_t> bytes);

// clamp(current - initial + 128, 0, 255) per channel. Throws SensorMismatch,
// DimensionMismatch.
DeltaImage delta(const TactileFrame& current, const TactileFrame& initial);

// Exactly one thumb, index and middle distal frame, any order. Throws
// WrongSensorSet, DimensionMismatch.
SuperImage super_image(std::span<const TactileFrame> frames, Hand hand);
std::array<Image, 3> split_super_image(const SuperImage& image);
TactileFrame as_frame(const SuperImage& image);
SuperImage from_frame(const TactileFrame& frame);

struct ContactSummary {
  std::vector<std::uint8_t> mask;  // H x W, 1 = contact
  std::size_t count = 0;
  std::optional<std::array<double, 2>> centroid;  // (row, col) px
  double activation = 0.0;                        // mean magnitude over the mask
};

// Per-pixel magnitude is the largest channel deviation |v - 128|; the mask is
// magnitude > threshold, and the centroid is magnitude-weighted over the mask.
ContactSummary contact_summary(const DeltaImage& delta, int threshold = 12);
ContactSummary contact_summary(const Image& delta_image, int threshold = 12);

struct SynthOptions {
  int height = kDefaultHeight;
  int width = kDefaultWidth;
  std::array<std::uint8_t, 3> base{72, 96, 120};  // gel background
  std::int64_t timestamp_ns = 0;
};

// Gaussian press at (row, col) px: peak min(255, round(3 F)) counts,
// sigma = 8 + 0.15 F px, on a background with seeded uniform integer noise in
// [-2, 2]. Throws OutOfBounds for a point outside the image, InvalidArgument
// for a negative or non-finite force.
TactileFrame synth_press(SensorId sensor, double row, double col, double force_n, std::uint64_t seed,
                         const SynthOptions& options = {});

}  // namespace prx::tactile
