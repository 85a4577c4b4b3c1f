#include "prx/export/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "prx/error.hpp"

namespace prx::metrics {
namespace {

// Neumaier compensated sum.
class Sum {
 public:
  void add(double x) {
    const double t = s_ + x;
    c_ += std::abs(s_) >= std::abs(x) ? (s_ - t) + x : (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace

Throughput throughput(std::span<const Trial> trials, double cap_s) {
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "no trials");
  if (!std::isfinite(cap_s) || cap_s <= 0.0) throw Error(ErrorCode::InvalidArgument, "cap must be positive");
  Throughput out;
  Sum total;
  for (const auto& t : trials) {
    if (!std::isfinite(t.time_s) || t.time_s <= 0.0) {
      throw Error(ErrorCode::InvalidArgument, "trial time must be positive, got " + std::to_string(t.time_s));
    }
    if (t.success && t.time_s <= cap_s) {
      ++out.successes;
      total.add(t.time_s);
    } else {
      ++out.failures;
      if (t.success) ++out.reclassified;
    }
  }
  if (out.successes > 0) {
    out.mean_success_s = total.value() / static_cast<double>(out.successes);
    out.per_minute = 60.0 / *out.mean_success_s;
  }
  return out;
}

NormalizedSuccess normalized_success(std::span<const double> rates) {
  if (rates.size() != kStages) {
    throw Error(ErrorCode::WrongStageCount, "expected 6 stage rates, got " + std::to_string(rates.size()));
  }
  NormalizedSuccess out;
  double sum = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0 && rates[i] <= 1.0)) {
      throw Error(ErrorCode::RateOutOfRange, "stage " + std::to_string(i + 1) + " rate " + std::to_string(rates[i]));
    }
    if (i > 0 && rates[i] > rates[i - 1]) out.cumulative = false;
    sum += rates[i];
  }
  out.value = sum / static_cast<double>(kStages);
  return out;
}

std::string format_with_sem(double value, double sem) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f±%.3f", value, sem);
  return buf;
}

std::vector<StageStats> stage_time_stats(const std::vector<std::vector<double>>& trials) {
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "no trials");
  std::size_t stages = 0;
  for (const auto& t : trials) stages = std::max(stages, t.size());
  if (stages == 0) throw Error(ErrorCode::EmptyStage, "no stage has any samples");
  std::vector<StageStats> out(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    std::vector<double> v;
    for (const auto& t : trials) {
      if (s < t.size()) {
        if (!std::isfinite(t[s]) || t[s] < 0.0) throw Error(ErrorCode::InvalidArgument, "stage time must be >= 0");
        v.push_back(t[s]);
      }
    }
    if (v.empty()) throw Error(ErrorCode::EmptyStage, "stage " + std::to_string(s + 1) + " has no samples");
    auto& o = out[s];
    o.n = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    o.mean = sum / static_cast<double>(o.n);
    if (o.n < 2) {
      o.sem = 0.0;
      o.sem_defined = false;
      continue;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - o.mean) * (x - o.mean);
    o.sem = std::sqrt(ss / static_cast<double>(o.n - 1)) / std::sqrt(static_cast<double>(o.n));
  }
  return out;
}

Manifest make_manifest(std::vector<EpisodeRecord> records) {
  Manifest m;
  m.records = std::move(records);
  std::vector<Sum> per;
  Sum total;
  for (const auto& r : m.records) {
    if (!std::isfinite(r.duration_s) || r.duration_s < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "episode duration must be >= 0: " + r.path);
    }
    std::size_t k = 0;
    while (k < m.sources.size() && m.sources[k].source != r.source) ++k;
    if (k == m.sources.size()) {
      m.sources.push_back({r.source, 0, 0.0});
      per.emplace_back();
    }
    ++m.sources[k].count;
    per[k].add(r.duration_s);
    total.add(r.duration_s);
  }
  for (std::size_t k = 0; k < m.sources.size(); ++k) m.sources[k].minutes = per[k].value() / 60.0;
  m.total_minutes = total.value() / 60.0;
  return m;
}

Manifest mix_manifest(const Batch& periop, const Batch& teleop) {
  Manifest m;
  Sum total;
  for (const auto& [name, b] : {std::pair<std::string, Batch>{"perioperation", periop}, {"teleoperation", teleop}}) {
    if (!std::isfinite(b.seconds_per_demo) || b.seconds_per_demo < 0.0) {
      throw Error(ErrorCode::InvalidArgument, name + " seconds per demo must be >= 0");
    }
    const double seconds = static_cast<double>(b.count) * b.seconds_per_demo;
    m.sources.push_back({name, b.count, seconds / 60.0});
    total.add(seconds);
  }
  m.total_minutes = total.value() / 60.0;
  return m;
}

std::string to_jsonl(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    out += nlohmann::json{{"path", r.path}, {"source", r.source}, {"duration_s", r.duration_s}}.dump();
    out += '\n';
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<EpisodeRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back({j.at("path").get<std::string>(), j.at("source").get<std::string>(),
                         j.at("duration_s").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return make_manifest(std::move(records));
}

}  // namespace prx::metrics
