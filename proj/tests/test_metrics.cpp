#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "prx/error.hpp"
#include "prx/export/metrics.hpp"
#include "support/expect_error.hpp"

using namespace prx;
using namespace prx::metrics;

TEST_CASE("throughput fixtures") {
  const std::vector<Trial> bulb{{true, 10.0}, {true, 12.0}, {true, 11.0}};
  CHECK(throughput(bulb).per_minute == doctest::Approx(60.0 / 11.0).epsilon(1e-12));
  CHECK(throughput(bulb).per_minute == doctest::Approx(5.45).epsilon(0.001));
  const std::vector<Trial> slow{{true, 80.0}, {true, 92.0}, {false, 120.0}};
  const auto s = throughput(slow);
  CHECK(s.per_minute == doctest::Approx(0.70).epsilon(0.01));
  CHECK(s.successes == 2);
  CHECK(s.failures == 1);
}

TEST_CASE("the three-minute rule") {
  const std::vector<Trial> t{{true, 190.0}, {true, 30.0}};
  const auto r = throughput(t);
  CHECK(r.successes == 1);
  CHECK(r.failures == 1);
  CHECK(r.reclassified == 1);
  CHECK(r.per_minute == doctest::Approx(2.0));
  const std::vector<Trial> only{{true, 190.0}};
  CHECK(throughput(only).per_minute == 0.0);
  CHECK_FALSE(throughput(only).mean_success_s.has_value());
  const std::vector<Trial> at_cap{{true, 180.0}};
  CHECK(throughput(at_cap).successes == 1);
}

TEST_CASE("throughput errors") {
  CHECK(code_of([] { throughput({}); }) == ErrorCode::EmptyInput);
  const std::vector<Trial> bad{{true, 0.0}};
  CHECK(code_of([&] { throughput(bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("throughput is order-invariant and monotone below the cap") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 170.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Trial> t(1 + rng() % 12);
    for (auto& x : t) x = {rng() % 4 != 0, u(rng)};
    const double base = throughput(t).per_minute;
    auto shuffled = t;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(throughput(shuffled).per_minute == doctest::Approx(base).epsilon(1e-14));
    auto slower = t;
    auto& pick = slower[rng() % slower.size()];
    pick.time_s = std::min(180.0, pick.time_s + 5.0);
    CHECK(throughput(slower).per_minute <= base * (1 + 1e-14));
  }
}

TEST_CASE("normalized success") {
  const std::vector<double> ones(6, 1.0);
  CHECK(normalized_success(ones).value == 1.0);
  const std::vector<double> first{1, 0, 0, 0, 0, 0};
  CHECK(normalized_success(first).value == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(format_with_sem(0.513, 0.032) == "0.513±0.032");
  const std::vector<double> rising{0.5, 0.6, 0.4, 0.3, 0.2, 0.1};
  CHECK_FALSE(normalized_success(rising).cumulative);
  CHECK(normalized_success(first).cumulative);
  CHECK(code_of([] { normalized_success(std::vector<double>(5, 1.0)); }) == ErrorCode::WrongStageCount);
  CHECK(code_of([] { normalized_success(std::vector<double>{1, 1, 1, 1, 1, 1.2}); }) == ErrorCode::RateOutOfRange);
  CHECK(code_of([] { normalized_success(std::vector<double>{1, 1, 1, 1, 1, std::nan("")}); }) ==
        ErrorCode::RateOutOfRange);
}

TEST_CASE("normalized success is permutation-invariant and bounded") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> s(6);
    for (auto& v : s) v = u(rng);
    const double a = normalized_success(s).value;
    std::shuffle(s.begin(), s.end(), rng);
    CHECK(normalized_success(s).value == doctest::Approx(a).epsilon(1e-15));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("manifest fixtures") {
  const auto tele = mix_manifest({0, 0.0}, {200, 85.0});
  CHECK(std::abs(tele.total_minutes - 283.3) <= 0.05);
  const auto mix = mix_manifest({160, 31.0}, {40, 85.0});
  CHECK(std::abs(mix.total_minutes - 139.3) <= 0.5);
  CHECK(mix.sources[0].count == 160);
  CHECK(mix.sources[1].minutes == doctest::Approx(40 * 85.0 / 60.0));
  CHECK(mix.sources[0].minutes + mix.sources[1].minutes == doctest::Approx(mix.total_minutes).epsilon(1e-15));
  CHECK(mix_manifest({0, 31.0}, {0, 85.0}).total_minutes == 0.0);
}

TEST_CASE("manifest totals are exact sums") {
  // Durations in whole milliseconds, so integer arithmetic is an exact oracle.
  std::mt19937_64 rng(3);
  std::vector<EpisodeRecord> recs;
  std::int64_t total_ms = 0;
  std::int64_t periop_ms = 0;
  for (int i = 0; i < 10'000; ++i) {
    const std::int64_t ms = 1000 + static_cast<std::int64_t>(rng() % 200'000);
    const bool periop = rng() % 4 != 0;
    recs.push_back({"ep" + std::to_string(i), periop ? "perioperation" : "teleoperation", static_cast<double>(ms) / 1000.0});
    total_ms += ms;
    if (periop) periop_ms += ms;
  }
  const auto m = make_manifest(recs);
  CHECK(std::abs(m.total_minutes - static_cast<double>(total_ms) / 60'000.0) < 1e-9);
  CHECK(std::abs(m.sources[0].minutes + m.sources[1].minutes - m.total_minutes) < 1e-9);
  const auto& p = m.sources[0].source == "perioperation" ? m.sources[0] : m.sources[1];
  CHECK(std::abs(p.minutes - static_cast<double>(periop_ms) / 60'000.0) < 1e-9);
  CHECK(m.sources[0].count + m.sources[1].count == 10'000);
}

TEST_CASE("manifest jsonl round trip") {
  const auto m = make_manifest({{"a.prxs", "perioperation", 31.5}, {"b.prxs", "teleoperation", 85.25}});
  const auto path = std::filesystem::temp_directory_path() / "prx_manifest_test.jsonl";
  std::ofstream(path) << to_jsonl(m);
  const auto back = read_manifest(path);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[1].path == "b.prxs");
  CHECK(back.total_minutes == doctest::Approx((31.5 + 85.25) / 60.0));
  std::ofstream(path) << "{\"path\": 1}\n";
  CHECK(code_of([&] { read_manifest(path); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("stage time statistics") {
  const auto s = stage_time_stats({{36.0, 5.0}, {38.0, 6.0}, {40.0}});
  REQUIRE(s.size() == 2);
  CHECK(s[0].mean == doctest::Approx(38.0));
  CHECK(s[0].sem == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(s[1].n == 2);
  const auto same = stage_time_stats({{6.0}, {6.0}, {6.0}});
  CHECK(same[0].sem == 0.0);
  CHECK(same[0].sem_defined);
  const auto one = stage_time_stats({{12.5}});
  CHECK(one[0].mean == 12.5);
  CHECK(one[0].sem == 0.0);
  CHECK_FALSE(one[0].sem_defined);
  CHECK(code_of([] { stage_time_stats({}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { stage_time_stats({{}, {}}); }) == ErrorCode::EmptyStage);
}
