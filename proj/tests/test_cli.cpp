#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "prx/cli/cli.hpp"
#include "prx/export/episode.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result prx_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = prx::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "prx_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string small_session(const fs::path& dir, const std::string& name = "s.prxs", const std::string& seed = "1") {
  const auto p = (dir / name).string();
  const auto r = prx_run({"record", "--duration", "2", "--seed", seed, "--height", "24", "--width", "32", "--out", p});
  REQUIRE(r.code == 0);
  return p;
}

}  // namespace

TEST_CASE("model workspace reproduces the DEXOP-7 table") {
  const auto r = prx_run({"model", "workspace", "--model", "DEXOP-7"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == std::vector<std::string>{"joint_id", "kind", "min_deg", "max_deg", "range_deg", "max_speed_rad_s"});
  std::map<std::string, std::pair<std::string, std::string>> by_kind;
  for (std::size_t i = 1; i < rows.size(); ++i) by_kind[rows[i][1]] = {rows[i][4], rows[i][5]};
  CHECK(by_kind["MCP-flexion"] == std::pair<std::string, std::string>{"110", "35"});
  CHECK(by_kind["PIP"] == std::pair<std::string, std::string>{"105", "15"});
  CHECK(by_kind["TM-flexion"] == std::pair<std::string, std::string>{"75", "17"});
  CHECK(by_kind["TM-abduction"] == std::pair<std::string, std::string>{"90", "12"});
  CHECK(by_kind["IP"] == std::pair<std::string, std::string>{"65", "9"});
}

TEST_CASE("model info lists every joint") {
  const auto r = prx_run({"model", "info", "--model", "DEXOP-12", "--format", "jsonl"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("variant") == "DEXOP-12");
    ++n;
  }
  CHECK(n == 12);
}

TEST_CASE("parallelogram sweep prints phi equal to theta") {
  const auto r = prx_run({"linkage", "sweep", "--parallelogram"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() > 628);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][0] == rows[i][1]);
    // The ratio is ill-conditioned next to the folded poses.
    if (!rows[i][3].empty()) CHECK(std::abs(std::stod(rows[i][3]) - 1.0) < 1e-6);
  }
}

TEST_CASE("csv and jsonl carry the same rows") {
  const auto csv = prx_run({"linkage", "sweep", "--geometry", "100,40,100,80", "--step", "0.05"});
  const auto jl = prx_run({"--format", "jsonl", "linkage", "sweep", "--geometry", "100,40,100,80", "--step", "0.05"});
  REQUIRE(csv.code == 0);
  REQUIRE(jl.code == 0);
  const auto rows = csv_rows(csv.out);
  std::istringstream in(jl.out);
  std::string line;
  std::size_t i = 1;
  while (std::getline(in, line)) {
    REQUIRE(i < rows.size());
    const auto j = nlohmann::json::parse(line);
    CHECK(std::stod(rows[i][0]) == j.at("theta_deg").get<double>());
    CHECK(std::stod(rows[i][1]) == j.at("phi_deg").get<double>());
    ++i;
  }
  CHECK(i == rows.size());
}

TEST_CASE("usage errors exit 2 with a synopsis") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"frobnicate"},
           {"model"},
           {"model", "workspace", "--bogus"},
           {"--format", "xml", "model", "workspace"},
           {"linkage", "sweep", "--geometry", "1,2,x,4"},
           {"linkage", "sweep"},
           {"metrics", "success"},
           {"torque", "estimate", "--contact", "index:distal:0,0,0"},
       }) {
    const auto r = prx_run(args);
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage:") != std::string::npos);
    CHECK(r.out.empty());
  }
  const auto help = prx_run({"linkage", "sweep", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--parallelogram") != std::string::npos);
}

TEST_CASE("domain errors exit 1") {
  auto r = prx_run({"model", "info", "--model", "DEXOP-99"});
  CHECK(r.code == 1);
  CHECK(r.err.find("UnknownVariant") != std::string::npos);
  r = prx_run({"linkage", "solve", "--geometry", "300,20,50,50"});
  CHECK(r.code == 1);
  CHECK(r.err.find("NotAssemblable") != std::string::npos);
  r = prx_run({"metrics", "success", "--rates", "1,1,1,1,1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("WrongStageCount") != std::string::npos);
  r = prx_run({"inspect", "/nonexistent/prx/session.prxs"});
  CHECK(r.code == 1);
}

TEST_CASE("validate detects truncation at random offsets") {
  const auto dir = scratch("truncate");
  const auto src = small_session(dir);
  const auto ok = prx_run({"validate", src});
  CHECK(ok.code == 0);
  CHECK(ok.err.empty());
  const auto bytes = slurp(src);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const auto cut = 1 + rng() % (bytes.size() - 1);
    const auto p = dir / "cut.prxs";
    std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(cut));
    const auto r = prx_run({"validate", p.string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("CorruptChunk") != std::string::npos);
  }
  // A cut inside the chunk region names the chunk whose CRC cannot verify.
  const auto p = dir / "mid.prxs";
  std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  const auto r = prx_run({"validate", p.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("first damaged chunk") != std::string::npos);
  CHECK(r.err.find("CRC") != std::string::npos);
}

TEST_CASE("identical arguments give identical output and files") {
  const auto dir = scratch("determinism");
  const std::vector<std::string> base{"record", "--duration", "2", "--seed", "9", "--height", "24", "--width", "32"};
  auto a_args = base;
  a_args.insert(a_args.end(), {"--out", (dir / "a.prxs").string()});
  auto b_args = base;
  b_args.insert(b_args.end(), {"--out", (dir / "b.prxs").string()});
  const auto a = prx_run(a_args);
  const auto b = prx_run(b_args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(dir / "a.prxs") == slurp(dir / "b.prxs"));
  const auto other = small_session(dir, "c.prxs", "10");
  CHECK(slurp(other) != slurp(dir / "a.prxs"));

  const auto ia = prx_run({"align", (dir / "a.prxs").string()});
  const auto ib = prx_run({"align", (dir / "b.prxs").string()});
  CHECK(ia.out == ib.out);
  const auto ea = prx_run({"augment", "--seed", "4", "--out", (dir / "x.prxs").string(), (dir / "a.prxs").string()});
  CHECK(ea.code == 1);  // a session is not an episode
}

TEST_CASE("workflow commands leave their inputs untouched") {
  const auto dir = scratch("inputs");
  const auto src = small_session(dir);
  const auto before = slurp(src);
  REQUIRE(prx_run({"inspect", src}).code == 0);
  REQUIRE(prx_run({"align", src, "--out", (dir / "aligned.prxs").string()}).code == 0);
  const auto ex = prx_run({"export", src, "--chunks", "3", "--source", "teleop", "--task", "bulb", "--out",
                           (dir / "ep.prxs").string()});
  REQUIRE(ex.code == 0);
  const auto ep_bytes = slurp(dir / "ep.prxs");
  const auto au = prx_run({"augment", (dir / "ep.prxs").string(), "--seed", "2", "--out", (dir / "aug.prxs").string()});
  REQUIRE(au.code == 0);
  CHECK(slurp(dir / "ep.prxs") == ep_bytes);
  REQUIRE(prx_run({"replay", src, "--out", (dir / "re.prxs").string()}).code == 0);
  CHECK(slurp(src) == before);
  CHECK(slurp(dir / "re.prxs") == before);

  const auto same = prx_run({"replay", src, "--out", src});
  CHECK(same.code == 1);
  CHECK(slurp(src) == before);

  const auto ep = prx::exporter::read_episode(dir / "ep.prxs");
  CHECK(ep.horizon == 3);
  CHECK(ep.task == "bulb");
  CHECK(ep.source == prx::exporter::SourceTag::Teleoperation);
  const auto rows = csv_rows(ex.out);
  CHECK(rows[1][4] == std::to_string(ep.steps.size()));
}

TEST_CASE("relative paths resolve under PRX_DATA_DIR") {
  const auto dir = scratch("datadir");
  ::setenv("PRX_DATA_DIR", dir.c_str(), 1);
  const auto r = prx_run({"record", "--duration", "1", "--height", "8", "--width", "8"});
  const auto v = prx_run({"validate", "session.prxs"});
  ::unsetenv("PRX_DATA_DIR");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "session.prxs"));
  CHECK(v.code == 0);
}

TEST_CASE("metrics commands reproduce the fixtures") {
  auto r = prx_run({"metrics", "throughput", "--trial", "1:10", "--trial", "1:12", "--trial", "1:11", "--trial", "1:190"});
  REQUIRE(r.code == 0);
  auto rows = csv_rows(r.out);
  CHECK(rows[1][1] == "3");
  CHECK(rows[1][3] == "1");
  CHECK(std::stod(rows[1][0]) == doctest::Approx(60.0 / 11.0).epsilon(1e-11));

  r = prx_run({"metrics", "success", "--rates", "1,1,1,1,1,1"});
  CHECK(csv_rows(r.out)[1][0] == "1");
  r = prx_run({"metrics", "success", "--rates", "0.9,0.7,0.5,0.4,0.3,0.278", "--sem", "0.032"});
  CHECK(csv_rows(r.out)[1][2] == "0.513±0.032");

  r = prx_run({"metrics", "manifest", "--teleop", "200:85"});
  rows = csv_rows(r.out);
  CHECK(rows.back()[0] == "total");
  CHECK(std::abs(std::stod(rows.back()[2]) - 283.3) <= 0.05);
  r = prx_run({"metrics", "manifest", "--periop", "160:31", "--teleop", "40:85"});
  CHECK(std::abs(std::stod(csv_rows(r.out).back()[2]) - 139.3) <= 0.5);

  const auto dir = scratch("metrics");
  std::ofstream(dir / "stages.csv") << "# stage seconds\n36,5\n38,6\n40\n";
  r = prx_run({"metrics", "stages", "--trials", (dir / "stages.csv").string()});
  REQUIRE(r.code == 0);
  rows = csv_rows(r.out);
  CHECK(rows[1][2] == "38");
  CHECK(std::stod(rows[1][3]) == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-11));
  std::ofstream(dir / "bad.csv") << "1,abc\n";
  CHECK(prx_run({"metrics", "throughput", "--trials", (dir / "bad.csv").string()}).code == 1);
}

TEST_CASE("torque and tactile commands") {
  auto r = prx_run({"torque", "estimate", "--joint", "index.pip=30", "--contact", "index:distal:0.03,0,0:0,0,-5"});
  REQUIRE(r.code == 0);
  auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0].rfind("index.", 0) != 0) CHECK(std::stod(rows[i][1]) == 0.0);
  }
  // Flexed index and middle fingertips leave the thumb unobserved.
  r = prx_run({"torque", "observability", "--joint", "index.pip=30", "--joint", "middle.pip=30", "--observe", "index",
               "--observe", "middle"});
  REQUIRE(r.code == 0);
  rows = csv_rows(r.out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][1] == "4");
    CHECK(rows[i][2] == "3");
    CHECK(rows[i][3] == (rows[i][0].rfind("thumb.", 0) == 0 ? "1" : "0"));
  }

  const auto dir = scratch("tactile");
  const auto f = (dir / "f.bin").string();
  const auto f0 = (dir / "f0.bin").string();
  REQUIRE(prx_run({"tactile", "synth", "--force", "20", "--row", "40", "--col", "100", "--seed", "3", "--out", f}).code == 0);
  REQUIRE(prx_run({"tactile", "synth", "--force", "0", "--seed", "3", "--out", f0}).code == 0);
  r = prx_run({"tactile", "summarize", "--frame", f, "--initial", f0});
  REQUIRE(r.code == 0);
  rows = csv_rows(r.out);
  CHECK(std::stod(rows[1][2]) == doctest::Approx(40.0).epsilon(0.01));
  CHECK(std::stod(rows[1][3]) == doctest::Approx(100.0).epsilon(0.01));
  r = prx_run({"tactile", "synth", "--row", "500", "--out", f});
  CHECK(r.code == 1);
}
