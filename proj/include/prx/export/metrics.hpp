#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prx::metrics {

struct Trial {
  bool success = false;
  double time_s = 0.0;
};

struct Throughput {
  double per_minute = 0.0;  // 60 / mean success time, 0 without successes
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t reclassified = 0;  // successes slower than the cap
  std::optional<double> mean_success_s;
};

inline constexpr double kTrialCapSeconds = 180.0;

// Throws EmptyInput for no trials, InvalidArgument for a non-positive or
// non-finite time or cap.
Throughput throughput(std::span<const Trial> trials, double cap_s = kTrialCapSeconds);

struct NormalizedSuccess {
  double value = 0.0;
  bool cumulative = true;  // false when some S(i+1) > S(i)
};

inline constexpr std::size_t kStages = 6;

// Mean of the six stage rates. Throws WrongStageCount, RateOutOfRange.
NormalizedSuccess normalized_success(std::span<const double> stage_rates);

// "%.3f±%.3f"
std::string format_with_sem(double value, double sem);

struct StageStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sem = 0.0;          // sample standard deviation / sqrt(n)
  bool sem_defined = true;   // false for a single trial; sem is then 0
};

// trials[i][s] is the time trial i spent in stage s; a trial that ended early
// has fewer entries. Throws EmptyStage when a stage up to the longest trial
// has no samples, EmptyInput for no trials.
std::vector<StageStats> stage_time_stats(const std::vector<std::vector<double>>& trials);

struct Batch {
  std::size_t count = 0;
  double seconds_per_demo = 0.0;
};

struct EpisodeRecord {
  std::string path;
  std::string source;
  double duration_s = 0.0;
};

struct SourceTotal {
  std::string source;
  std::size_t count = 0;
  double minutes = 0.0;
};

struct Manifest {
  std::vector<EpisodeRecord> records;
  std::vector<SourceTotal> sources;  // in first-seen order
  double total_minutes = 0.0;
};

// Totals use compensated summation.
Manifest make_manifest(std::vector<EpisodeRecord> records);
Manifest mix_manifest(const Batch& periop, const Batch& teleop);

// One JSON object per line: {"path", "source", "duration_s"}.
std::string to_jsonl(const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace prx::metrics
