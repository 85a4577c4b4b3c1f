#include <random>

#include "doctest.h"
#include "prx/error.hpp"
#include "support/expect_error.hpp"
#include "prx/tactile/tactile.hpp"

using namespace prx;
using namespace prx::tactile;

namespace {

TactileFrame random_frame(SensorId id, std::mt19937_64& rng, int h = 12, int w = 16, std::int64_t ts = 0) {
  TactileFrame f{id, ts, Image(h, w)};
  for (auto& v : f.image.data) v = static_cast<std::uint8_t>(rng());
  return f;
}

// Magnitude-weighted mean over pixels above threshold, straight from the definition.
std::array<double, 2> weighted_mean(const Image& d, int threshold) {
  double w = 0.0;
  double r = 0.0;
  double c = 0.0;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      int m = 0;
      for (int ch = 0; ch < 3; ++ch) m = std::max(m, std::abs(d.at(y, x, ch) - 128));
      if (m > threshold) {
        w += m;
        r += m * y;
        c += m * x;
      }
    }
  }
  return {r / w, c / w};
}

}  // namespace

TEST_CASE("delta of identical and shifted frames") {
  std::mt19937_64 rng(1);
  auto a = random_frame(SensorId::IndexDistal, rng);
  for (auto& v : a.image.data) v = static_cast<std::uint8_t>(v % 200);
  auto d = delta(a, a);
  CHECK(std::all_of(d.image.data.begin(), d.image.data.end(), [](std::uint8_t v) { return v == 128; }));
  auto b = a;
  for (auto& v : b.image.data) v = static_cast<std::uint8_t>(v + 10);
  d = delta(b, a);
  CHECK(std::all_of(d.image.data.begin(), d.image.data.end(), [](std::uint8_t v) { return v == 138; }));
}

TEST_CASE("delta matches a scalar saturating difference") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cur = random_frame(SensorId::ThumbDistal, rng, 20, 30, 100);
    const auto ini = random_frame(SensorId::ThumbDistal, rng, 20, 30, 0);
    const auto d = delta(cur, ini);
    CHECK(d.current_ns == 100);
    CHECK(d.reference_ns == 0);
    for (std::size_t i = 0; i < d.image.data.size(); ++i) {
      int v = cur.image.data[i] - ini.image.data[i] + 128;
      if (v < 0) v = 0;
      if (v > 255) v = 255;
      CHECK(d.image.data[i] == v);
    }
    // Antisymmetry wherever neither direction saturates.
    const auto r = delta(ini, cur);
    for (std::size_t i = 0; i < d.image.data.size(); ++i) {
      const int diff = cur.image.data[i] - ini.image.data[i];
      if (diff > -128 && diff < 128) CHECK(d.image.data[i] + r.image.data[i] == 256);
    }
  }
}

TEST_CASE("delta rejects mismatched inputs") {
  std::mt19937_64 rng(3);
  const auto a = random_frame(SensorId::ThumbDistal, rng);
  CHECK(code_of([&] { delta(a, random_frame(SensorId::IndexDistal, rng)); }) == ErrorCode::SensorMismatch);
  CHECK(code_of([&] { delta(a, random_frame(SensorId::ThumbDistal, rng, 13, 16)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("super-image concatenates thumb, index, middle") {
  std::mt19937_64 rng(4);
  const auto t = random_frame(SensorId::ThumbDistal, rng, 120, 160, 5);
  const auto i = random_frame(SensorId::IndexDistal, rng, 120, 160, 9);
  const auto m = random_frame(SensorId::MiddleDistal, rng, 120, 160, 7);
  const std::vector<TactileFrame> shuffled{m, t, i};
  const auto s = super_image(shuffled, Hand::Right);
  CHECK(s.image.height == 120);
  CHECK(s.image.width == 480);
  CHECK(s.timestamp_ns == 9);
  CHECK(s.hand == Hand::Right);
  for (int r = 0; r < 120; ++r) {
    for (int c = 0; c < 160; ++c) {
      for (int ch = 0; ch < 3; ++ch) CHECK_EQ(s.image.at(r, c, ch), t.image.at(r, c, ch));
    }
  }
  const auto parts = split_super_image(s);
  CHECK(parts[0] == t.image);
  CHECK(parts[1] == i.image);
  CHECK(parts[2] == m.image);
}

TEST_CASE("super-image input validation") {
  std::mt19937_64 rng(5);
  const auto t = random_frame(SensorId::ThumbDistal, rng);
  const auto i = random_frame(SensorId::IndexDistal, rng);
  const auto m = random_frame(SensorId::MiddleDistal, rng);
  const auto tall = random_frame(SensorId::MiddleDistal, rng, 13, 16);
  CHECK(code_of([&] { super_image(std::vector<TactileFrame>{t, i, tall}, Hand::Left); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { super_image(std::vector<TactileFrame>{t, i}, Hand::Left); }) == ErrorCode::WrongSensorSet);
  CHECK(code_of([&] { super_image(std::vector<TactileFrame>{t, i, i}, Hand::Left); }) == ErrorCode::WrongSensorSet);
  const auto p = random_frame(SensorId::Palm, rng);
  CHECK(code_of([&] { super_image(std::vector<TactileFrame>{t, i, p}, Hand::Left); }) == ErrorCode::WrongSensorSet);
  CHECK_NOTHROW(super_image(std::vector<TactileFrame>{t, i, m}, Hand::Left));
}

TEST_CASE("frame codec round trip and corruption") {
  std::mt19937_64 rng(6);
  const auto f = random_frame(SensorId::MiddleDistal, rng, 7, 9, 123456789012345);
  const auto bytes = encode_frame(f);
  REQUIRE(bytes.size() == 16 + 7 * 9 * 3);
  CHECK(bytes[0] == 2);
  CHECK(bytes[1] == 7);
  CHECK(bytes[3] == 9);
  CHECK(bytes[13] == 0);
  // Planar layout: first plane holds the red channel.
  CHECK(bytes[16] == f.image.at(0, 0, 0));
  CHECK(bytes[16 + 63] == f.image.at(0, 0, 1));
  CHECK(decode_frame(bytes) == f);
  CHECK(code_of([&] { decode_frame(std::span(bytes).first(bytes.size() - 1)); }) == ErrorCode::CorruptChunk);
  CHECK(code_of([&] { decode_frame(std::span(bytes).first(10)); }) == ErrorCode::CorruptChunk);
  const auto sup = super_image(std::vector<TactileFrame>{random_frame(SensorId::ThumbDistal, rng),
                                                         random_frame(SensorId::IndexDistal, rng),
                                                         random_frame(SensorId::MiddleDistal, rng)},
                               Hand::Left);
  const auto back = from_frame(decode_frame(encode_frame(as_frame(sup))));
  CHECK(back.image == sup.image);
  CHECK(back.hand == Hand::Left);
}

TEST_CASE("contact summary basics") {
  const Image flat(120, 160, 128);
  const auto none = contact_summary(flat);
  CHECK(none.count == 0);
  CHECK_FALSE(none.centroid.has_value());
  CHECK(none.activation == 0.0);

  std::mt19937_64 rng(7);
  Image noisy(120, 160);
  for (auto& v : noisy.data) v = static_cast<std::uint8_t>(rng());
  CHECK(contact_summary(noisy, 255).count == 0);
}

TEST_CASE("analytic blob centroid") {
  // Symmetric blob at (60, 80) on one channel only.
  Image d(120, 160, 128);
  for (int r = 0; r < 120; ++r) {
    for (int c = 0; c < 160; ++c) {
      const double e = std::exp(-((r - 60.0) * (r - 60.0) + (c - 80.0) * (c - 80.0)) / (2.0 * 36.0));
      d.at(r, c, 1) = static_cast<std::uint8_t>(128 + std::lround(100.0 * e));
    }
  }
  const auto s = contact_summary(d);
  REQUIRE(s.centroid.has_value());
  CHECK(std::abs((*s.centroid)[0] - 60.0) < 1.0);
  CHECK(std::abs((*s.centroid)[1] - 80.0) < 1.0);
  const auto oracle = weighted_mean(d, 12);
  CHECK((*s.centroid)[0] == doctest::Approx(oracle[0]).epsilon(1e-12));
  CHECK((*s.centroid)[1] == doctest::Approx(oracle[1]).epsilon(1e-12));
  CHECK(s.activation > 12.0);
}

TEST_CASE("synthetic press is deterministic and recoverable") {
  const auto base = synth_press(SensorId::IndexDistal, 60, 80, 0.0, 42);
  const auto again = synth_press(SensorId::IndexDistal, 10, 10, 0.0, 42);
  CHECK(base == again);  // force 0 is the noise-only baseline wherever the press is
  CHECK(synth_press(SensorId::IndexDistal, 60, 80, 20.0, 9) == synth_press(SensorId::IndexDistal, 60, 80, 20.0, 9));
  CHECK_FALSE(synth_press(SensorId::IndexDistal, 60, 80, 0.0, 9) == base);
  int lo = 255;
  int hi = 0;
  for (int r = 0; r < 120; ++r) {
    for (int c = 0; c < 160; ++c) {
      lo = std::min<int>(lo, base.image.at(r, c, 0));
      hi = std::max<int>(hi, base.image.at(r, c, 0));
    }
  }
  CHECK(lo == 70);
  CHECK(hi == 74);

  int worst_count = 0;
  double worst = 0.0;
  for (double force : {5.0, 10.0, 20.0, 40.0, 70.0}) {
    // Keep the above-threshold footprint inside the image; a clipped blob
    // pulls the centroid inward.
    const double amp = std::min(255.0, std::round(3.0 * force));
    const double sigma = 8.0 + 0.15 * force;
    const double margin = std::ceil(sigma * std::sqrt(2.0 * std::log(amp / 12.0))) + 1.0;
    const double row_step = std::max(1.0, (120.0 - 1.0 - 2.0 * margin) / 5.0);
    const double col_step = std::max(1.0, (160.0 - 1.0 - 2.0 * margin) / 7.0);
    for (double row = margin; row <= 119.0 - margin; row += row_step) {
      for (double col = margin; col <= 159.0 - margin; col += col_step) {
        const auto press = synth_press(SensorId::IndexDistal, row, col, force, 42);
        const auto s = contact_summary(delta(press, base));
        REQUIRE(s.centroid.has_value());
        worst = std::max(worst, std::hypot((*s.centroid)[0] - row, (*s.centroid)[1] - col));
        ++worst_count;
      }
    }
  }
  CHECK(worst_count >= 100);
  CHECK(worst < 2.0);
}

TEST_CASE("centroid is translation-equivariant") {
  const auto base = synth_press(SensorId::ThumbDistal, 0, 0, 0.0, 3);
  const auto a = contact_summary(delta(synth_press(SensorId::ThumbDistal, 50, 60, 15.0, 3), base));
  for (auto [dr, dc] : {std::pair{7, -11}, std::pair{-13, 25}, std::pair{20, 40}}) {
    const auto b = contact_summary(delta(synth_press(SensorId::ThumbDistal, 50 + dr, 60 + dc, 15.0, 3), base));
    CHECK(std::abs((*b.centroid)[0] - (*a.centroid)[0] - dr) < 1.0);
    CHECK(std::abs((*b.centroid)[1] - (*a.centroid)[1] - dc) < 1.0);
  }
}

TEST_CASE("synthetic press validation") {
  CHECK(code_of([] { synth_press(SensorId::Palm, -1, 10, 1.0, 0); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([] { synth_press(SensorId::Palm, 10, 160, 1.0, 0); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([] { synth_press(SensorId::Palm, 10, 10, -1.0, 0); }) == ErrorCode::InvalidArgument);
  const auto big = synth_press(SensorId::Palm, 60, 80, 200.0, 0);
  // Peak saturates the 8-bit range.
  CHECK(big.image.at(60, 80, 0) == 255);
}
