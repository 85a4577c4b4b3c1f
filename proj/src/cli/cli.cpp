#include "prx/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "prx/config.hpp"
#include "prx/contact/contact_torque.hpp"
#include "prx/error.hpp"
#include "prx/export/augment.hpp"
#include "prx/export/episode.hpp"
#include "prx/export/metrics.hpp"
#include "prx/hand/hand_model.hpp"
#include "prx/linkage/fourbar.hpp"
#include "prx/linkage/linkage_model.hpp"
#include "prx/session/align.hpp"
#include "prx/session/container.hpp"
#include "prx/session/recorder.hpp"
#include "prx/tactile/tactile.hpp"

namespace prx::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

// Malformed argument values found after parsing; reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Rounded to 1e-9 so solver noise does not reach the report.
json fixed9(double x) {
  if (!std::isfinite(x)) return nullptr;
  return std::stod(fmt_double(std::round(x * 1e9) / 1e9));
}

json deg9(double rad) { return fixed9(hand::rad2deg(rad)); }

// Doubles go through the same 12-digit rendering in both formats.
json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return std::stod(fmt_double(x));
}

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return fmt_double(v.get<double>());
  if (v.is_number()) return v.dump();
  std::string s = v.get<std::string>();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

class Report {
 public:
  explicit Report(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void row(std::vector<json> cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("report row width");
    rows_.push_back(std::move(cells));
  }

  void emit(std::ostream& out, const std::string& format) const {
    if (format == "jsonl") {
      for (const auto& r : rows_) {
        json obj = json::object();
        for (std::size_t i = 0; i < columns_.size(); ++i) obj[columns_[i]] = r[i];
        out << obj.dump() << '\n';
      }
      return;
    }
    for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_cell(r[i]);
      out << '\n';
    }
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<json>> rows_;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(what + ": not a number: '" + s + "'");
}

std::vector<double> to_doubles(const std::string& s, std::size_t n, const std::string& what) {
  const auto parts = split(s, ',');
  if (n != 0 && parts.size() != n) {
    throw UsageError(what + ": expected " + std::to_string(n) + " comma-separated values, got '" + s + "'");
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(to_double(p, what));
  return out;
}

std::size_t to_count(const std::string& s, const std::string& what) {
  const double v = to_double(s, what);
  if (v < 0 || v != std::floor(v)) throw UsageError(what + ": not a count: '" + s + "'");
  return static_cast<std::size_t>(v);
}

// Relative paths live under PRX_DATA_DIR when it is set.
fs::path resolve(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* dir = std::getenv("PRX_DATA_DIR"); dir && *dir) return fs::path(dir) / path;
  }
  return path;
}

void guard_output(const fs::path& in, const fs::path& out) {
  std::error_code ec;
  if (fs::exists(out, ec) && fs::equivalent(in, out, ec)) {
    throw Error(ErrorCode::InvalidArgument, "refusing to overwrite the input " + in.string());
  }
}

hand::JointState parse_state(const hand::HandModel& model, const std::vector<std::string>& joints) {
  hand::JointState s{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dof())), 0};
  for (const auto& j : joints) {
    const auto eq = j.find('=');
    if (eq == std::string::npos) throw UsageError("--joint expects <id>=<deg>, got '" + j + "'");
    const auto idx = model.joint_index(j.substr(0, eq));
    if (!idx) throw Error(ErrorCode::InvalidArgument, "unknown joint " + j.substr(0, eq));
    s.angles[static_cast<Eigen::Index>(*idx)] = hand::deg2rad(to_double(j.substr(eq + 1), "--joint"));
  }
  return s;
}

hand::FingerName finger_of(const std::string& s) {
  const auto f = hand::parse_finger(s);
  if (!f) throw UsageError("unknown finger '" + s + "'");
  return *f;
}

hand::Phalanx phalanx_of(const std::string& s) {
  const auto p = hand::parse_phalanx(s);
  if (!p) throw UsageError("unknown phalanx '" + s + "'");
  return *p;
}

Eigen::Vector3d vec3(const std::string& s, const std::string& what) {
  const auto v = to_doubles(s, 3, what);
  return {v[0], v[1], v[2]};
}

// finger:phalanx:px,py,pz:fx,fy,fz
contact::ContactWrench parse_contact(const std::string& s) {
  const auto p = split(s, ':');
  if (p.size() != 4) throw UsageError("--contact expects finger:phalanx:px,py,pz:fx,fy,fz, got '" + s + "'");
  return {finger_of(p[0]), phalanx_of(p[1]), vec3(p[2], "--contact point"), vec3(p[3], "--contact force")};
}

// finger (fingertip) or finger:phalanx:px,py,pz
hand::ContactLocation parse_observed(const hand::HandModel& model, const std::string& s) {
  const auto p = split(s, ':');
  if (p.size() == 1) return contact::fingertip(model, finger_of(p[0]));
  if (p.size() != 3) throw UsageError("--observe expects finger or finger:phalanx:px,py,pz, got '" + s + "'");
  return {finger_of(p[0]), phalanx_of(p[1]), vec3(p[2], "--observe point")};
}

// Non-blank lines that are not comments.
std::vector<std::string> data_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    out.push_back(line);
  }
  return out;
}

double file_number(const std::string& s, const fs::path& path) {
  try {
    return to_double(s, path.string());
  } catch (const UsageError& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

metrics::Trial parse_trial(const std::string& s, char sep, const fs::path& origin) {
  const auto p = split(s, sep);
  auto bad = [&] { return "trial must be <success>" + std::string(1, sep) + "<seconds>, got '" + s + "'"; };
  if (p.size() != 2) {
    if (origin.empty()) throw UsageError(bad());
    throw Error(ErrorCode::InvalidConfig, origin.string() + ": " + bad());
  }
  std::string flag = p[0];
  flag.erase(0, flag.find_first_not_of(' '));
  bool ok;
  if (flag == "1" || flag == "true" || flag == "success") {
    ok = true;
  } else if (flag == "0" || flag == "false" || flag == "failure") {
    ok = false;
  } else if (origin.empty()) {
    throw UsageError(bad());
  } else {
    throw Error(ErrorCode::InvalidConfig, origin.string() + ": " + bad());
  }
  const double t = origin.empty() ? to_double(p[1], "--trial") : file_number(p[1], origin);
  return {ok, t};
}

metrics::Batch parse_batch(const std::string& s, const std::string& what) {
  const auto p = split(s, ':');
  if (p.size() != 2) throw UsageError(what + " expects <count>:<seconds per demo>, got '" + s + "'");
  return {to_count(p[0], what), to_double(p[1], what)};
}

struct FourBarArgs {
  bool parallelogram = false;
  std::string geometry;
  double in_offset_deg = 90.0;
  double out_offset_deg = 90.0;
  std::string branch = "open";
};

linkage::FourBarGeometry make_geometry(const FourBarArgs& a) {
  linkage::FourBarGeometry g;
  if (a.parallelogram) {
    g.ground = g.coupler = 0.060;
    g.input = g.output = 0.045;
  } else {
    if (a.geometry.empty()) throw UsageError("give --geometry g,a,b,c or --parallelogram");
    const auto v = to_doubles(a.geometry, 4, "--geometry");
    g.ground = v[0] / 1000.0;
    g.input = v[1] / 1000.0;
    g.coupler = v[2] / 1000.0;
    g.output = v[3] / 1000.0;
  }
  g.input_offset = hand::deg2rad(a.in_offset_deg);
  g.output_offset = hand::deg2rad(a.out_offset_deg);
  const auto br = linkage::parse_branch(a.branch);
  if (!br) throw UsageError("--branch must be open or crossed");
  g.branch = *br;
  return g;
}

json ratio_or_null(const linkage::FourBarGeometry& g, double theta, double phi) {
  try {
    return fixed9(linkage::transmission_ratio(g, theta, phi));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SingularConfiguration) return nullptr;
    throw;
  }
}

void add_stats_rows(Report& r, const session::SessionHeader& h, const std::vector<session::StreamStats>& stats,
                    session::StopReason stop, std::uint8_t stalled) {
  for (const auto& s : h.streams) {
    std::uint64_t n = 0;
    std::uint64_t drops = 0;
    for (const auto& st : stats) {
      if (st.stream == s.id) {
        n = st.samples;
        drops = st.drops;
      }
    }
    r.row({s.id, session::stream_name(s.id), n, drops, session::to_string(stop),
           stalled == session::kNoStream ? json(nullptr) : json(session::stream_name(stalled))});
  }
}

Report record_report() { return Report({"stream", "name", "samples", "drops", "stop", "stalled_stream"}); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perioperation data tools: hand model, linkage, torque, tactile, sessions, export and metrics", "prx"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string format = "csv";
  app.add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();

  std::vector<std::pair<CLI::App*, std::function<void()>>> handlers;
  auto on = [&](CLI::App* sub, std::function<void()> fn) { handlers.emplace_back(sub, std::move(fn)); };
  auto emit = [&](const Report& r) { r.emit(out, format); };
  int status = kExitOk;

  // model
  auto* model = app.add_subcommand("model", "Hand kinematic model");
  model->require_subcommand(1);
  std::string model_name = "DEXOP-7";
  auto* model_info = model->add_subcommand("info", "Joint table of a hand model");
  auto* model_ws = model->add_subcommand("workspace", "Joint ranges and peak speeds");
  for (auto* s : {model_info, model_ws}) {
    s->add_option("--model", model_name, "Variant name or model config path")->capture_default_str();
  }
  on(model_info, [&] {
    const auto m = hand::resolve_model(model_name);
    Report r({"variant", "finger", "joint_id", "kind", "min_deg", "max_deg", "max_speed_rad_s"});
    for (const auto& f : m.fingers()) {
      for (const auto& j : f.joints) {
        r.row({std::string(hand::to_string(m.variant())), std::string(hand::to_string(f.name)), j.id,
               std::string(hand::to_string(j.kind)), num(hand::rad2deg(j.limits.min)),
               num(hand::rad2deg(j.limits.max)), num(j.max_speed)});
      }
    }
    emit(r);
  });
  on(model_ws, [&] {
    const auto m = hand::resolve_model(model_name);
    Report r({"joint_id", "kind", "min_deg", "max_deg", "range_deg", "max_speed_rad_s"});
    for (const auto& w : hand::workspace_report(m)) {
      r.row({w.joint_id, std::string(hand::to_string(w.kind)), num(w.min_deg), num(w.max_deg), num(w.range_deg),
             num(w.max_speed)});
    }
    emit(r);
  });

  // linkage
  auto* link = app.add_subcommand("linkage", "Four-bar couplings");
  link->require_subcommand(1);
  FourBarArgs fb;
  double step_rad = 0.01;
  double theta_deg = 90.0;
  auto four_bar_options = [&](CLI::App* s) {
    s->add_flag("--parallelogram", fb.parallelogram, "Ground = coupler = 60 mm, input = output = 45 mm");
    s->add_option("--geometry", fb.geometry, "Link lengths g,a,b,c in mm");
    s->add_option("--in-offset-deg", fb.in_offset_deg, "Input link angle at joint angle 0")->capture_default_str();
    s->add_option("--out-offset-deg", fb.out_offset_deg, "Output link angle at joint angle 0")->capture_default_str();
    s->add_option("--branch", fb.branch, "Assembly mode")->check(CLI::IsMember({"open", "crossed"}))->capture_default_str();
  };
  auto* sweep = link->add_subcommand("sweep", "Output angle over the assemblable input range");
  four_bar_options(sweep);
  sweep->add_option("--step", step_rad, "Input step in rad")->check(CLI::PositiveNumber)->capture_default_str();
  on(sweep, [&] {
    const auto g = make_geometry(fb);
    const auto range = linkage::assemblable_range(g);
    if (range.empty()) throw Error(ErrorCode::NotAssemblable, "no input angle closes the loop");
    Report r({"theta_deg", "phi_deg", "transmission_deg", "ratio"});
    auto walk = [&](double start, double width, double reference) {
      linkage::FourBarTracker tracker(g, reference);
      const auto n = static_cast<long>(std::floor(width / step_rad + 1e-9));
      for (long k = 0; k <= n; ++k) {
        const double theta = start + static_cast<double>(k) * step_rad;
        const double phi = tracker.solve(theta);
        r.row({deg9(theta), deg9(phi), deg9(linkage::transmission_angle(g, theta, phi)), ratio_or_null(g, theta, phi)});
      }
    };
    if (range.full()) {
      walk(g.input_offset, 2.0 * kPi - 1e-12, g.input_offset);
    } else {
      for (const auto& iv : range.intervals) walk(iv.start, iv.width, iv.start + iv.width / 2.0);
    }
    emit(r);
  });
  auto* solve = link->add_subcommand("solve", "Output angle at one input angle");
  four_bar_options(solve);
  solve->add_option("--theta-deg", theta_deg, "Input link angle")->capture_default_str();
  on(solve, [&] {
    const auto g = make_geometry(fb);
    const double theta = hand::deg2rad(theta_deg);
    const double phi = linkage::solve_fourbar(g, theta, g.branch);
    Report r({"theta_deg", "phi_deg", "branch", "grashof", "transmission_deg", "ratio"});
    r.row({num(theta_deg), deg9(phi), std::string(linkage::to_string(g.branch)),
           std::string(linkage::to_string(linkage::grashof_check(g).classification)),
           deg9(linkage::transmission_angle(g, theta, phi)), ratio_or_null(g, theta, phi)});
    emit(r);
  });
  std::string map_joint = "index.mcp_flexion";
  double step_deg = 5.0;
  auto* map = link->add_subcommand("map", "Hand joint angle driven by one exoskeleton joint");
  map->add_option("--model", model_name, "Variant name or model config path")->capture_default_str();
  map->add_option("--joint", map_joint, "Joint id")->capture_default_str();
  map->add_option("--step-deg", step_deg, "Exoskeleton step in degrees")->check(CLI::PositiveNumber)->capture_default_str();
  on(map, [&] {
    const auto m = hand::resolve_model(model_name);
    const auto idx = m.joint_index(map_joint);
    if (!idx) throw Error(ErrorCode::InvalidArgument, "unknown joint " + map_joint);
    const auto lm = linkage::default_linkage(m);
    const auto& lim = m.joint(*idx).limits;
    linkage::LinkageContext ctx;
    hand::JointState exo{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.dof())), 0};
    Report r({"exo_deg", "hand_deg"});
    const double lo = hand::rad2deg(lim.min);
    const auto n = static_cast<long>(std::floor((hand::rad2deg(lim.max) - lo) / step_deg + 1e-9));
    for (long k = 0; k <= n; ++k) {
      const double deg = lo + static_cast<double>(k) * step_deg;
      exo.angles[static_cast<Eigen::Index>(*idx)] = hand::deg2rad(deg);
      const auto h = linkage::exo_to_hand(lm, exo, ctx);
      r.row({num(deg), deg9(h.angles[static_cast<Eigen::Index>(*idx)])});
    }
    emit(r);
  });

  // torque
  auto* torque = app.add_subcommand("torque", "Joint torques from contact forces");
  torque->require_subcommand(1);
  std::vector<std::string> joint_args;
  std::vector<std::string> contact_args;
  std::vector<std::string> observe_args;
  auto* estimate = torque->add_subcommand("estimate", "tau = sum J^T F over the given contacts");
  auto* observ = torque->add_subcommand("observability", "Torque directions the observed contacts cannot explain");
  for (auto* s : {estimate, observ}) {
    s->add_option("--model", model_name, "Variant name or model config path")->capture_default_str();
    s->add_option("--joint", joint_args, "Joint angle <id>=<deg>, others 0 (repeatable)");
  }
  estimate->add_option("--contact", contact_args, "finger:phalanx:px,py,pz:fx,fy,fz, m and N (repeatable)");
  observ->add_option("--observe", observe_args, "finger (fingertip) or finger:phalanx:px,py,pz (repeatable)");
  on(estimate, [&] {
    const auto m = hand::resolve_model(model_name);
    const auto state = parse_state(m, joint_args);
    std::vector<contact::ContactWrench> contacts;
    for (const auto& c : contact_args) contacts.push_back(parse_contact(c));
    const auto est = contact::joint_torques(m, state, contacts);
    Report r({"joint_id", "torque_nm", "rank", "nullspace_dim"});
    const auto ids = m.joint_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      r.row({ids[i], num(est.torques[static_cast<Eigen::Index>(i)]), est.rank, est.nullspace_dim});
    }
    emit(r);
  });
  on(observ, [&] {
    const auto m = hand::resolve_model(model_name);
    const auto state = parse_state(m, joint_args);
    std::vector<hand::ContactLocation> observed;
    for (const auto& o : observe_args) observed.push_back(parse_observed(m, o));
    const auto obs = contact::observability(m, state, observed);
    Report r({"joint_id", "rank", "nullspace_dim", "unidentifiable_weight"});
    const auto ids = m.joint_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double w = obs.unidentifiable.cols() > 0 ? obs.unidentifiable.row(static_cast<Eigen::Index>(i)).norm() : 0.0;
      r.row({ids[i], obs.rank, obs.nullspace_dim, fixed9(w)});
    }
    emit(r);
  });

  // tactile
  auto* tac = app.add_subcommand("tactile", "Tactile frames");
  tac->require_subcommand(1);
  std::string sensor_name = "index-distal";
  double press_row = 60.0;
  double press_col = 80.0;
  double force = 10.0;
  std::uint64_t seed = 1;
  int height = tactile::kDefaultHeight;
  int width = tactile::kDefaultWidth;
  std::string out_path;
  auto* synth = tac->add_subcommand("synth", "Write a synthetic press frame");
  synth->add_option("--sensor", sensor_name, "Sensor name")->capture_default_str();
  synth->add_option("--row", press_row, "Press row in px")->capture_default_str();
  synth->add_option("--col", press_col, "Press column in px")->capture_default_str();
  synth->add_option("--force", force, "Press force in N")->capture_default_str();
  synth->add_option("--seed", seed, "Noise seed")->capture_default_str();
  synth->add_option("--height", height, "Image height")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--width", width, "Image width")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--out", out_path, "Output frame file")->required();
  on(synth, [&] {
    const auto sensor = tactile::parse_sensor(sensor_name);
    if (!sensor) throw UsageError("unknown sensor '" + sensor_name + "'");
    tactile::SynthOptions opt;
    opt.height = height;
    opt.width = width;
    const auto frame = tactile::synth_press(*sensor, press_row, press_col, force, seed, opt);
    const auto bytes = tactile::encode_frame(frame);
    const auto path = resolve(out_path);
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    Report r({"sensor", "height", "width", "bytes", "path"});
    r.row({sensor_name, height, width, bytes.size(), path.string()});
    emit(r);
  });
  std::string frame_path;
  std::string initial_path;
  int threshold = 12;
  auto* summ = tac->add_subcommand("summarize", "Contact mask statistics of a frame against its initial frame");
  summ->add_option("--frame", frame_path, "Current frame file")->required();
  summ->add_option("--initial", initial_path, "Initial (no contact) frame file")->required();
  summ->add_option("--threshold", threshold, "Contact threshold in counts")->check(CLI::NonNegativeNumber)->capture_default_str();
  on(summ, [&] {
    auto load = [](const fs::path& p) {
      std::ifstream f(p, std::ios::binary);
      if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
      std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
      return tactile::decode_frame(b);
    };
    const auto d = tactile::delta(load(resolve(frame_path)), load(resolve(initial_path)));
    const auto s = tactile::contact_summary(d, threshold);
    Report r({"sensor", "contact_px", "centroid_row", "centroid_col", "activation"});
    r.row({std::string(tactile::to_string(d.sensor)), s.count, s.centroid ? num((*s.centroid)[0]) : json(nullptr),
           s.centroid ? num((*s.centroid)[1]) : json(nullptr), num(s.activation)});
    emit(r);
  });

  // record
  double duration_s = 5.0;
  double jitter_ms = 10.0;
  double stall_ms = 500.0;
  bool realtime = false;
  auto* rec = app.add_subcommand("record", "Record a synthetic five-stream session");
  rec->add_option("--model", model_name, "Hand variant")->capture_default_str();
  rec->add_option("--duration", duration_s, "Seconds")->check(CLI::PositiveNumber)->capture_default_str();
  rec->add_option("--seed", seed, "Generator seed")->capture_default_str();
  rec->add_option("--height", height, "Image height")->check(CLI::PositiveNumber)->capture_default_str();
  rec->add_option("--width", width, "Image width")->check(CLI::PositiveNumber)->capture_default_str();
  rec->add_option("--jitter-ms", jitter_ms, "Timestamp jitter bound")->check(CLI::NonNegativeNumber)->capture_default_str();
  rec->add_option("--stall-ms", stall_ms, "Stall timeout")->check(CLI::PositiveNumber)->capture_default_str();
  rec->add_flag("--realtime", realtime, "Pace sources against the wall clock");
  rec->add_option("--out", out_path, "Session file, relative to PRX_DATA_DIR when set");
  on(rec, [&] {
    const auto header = session::synthetic_header(model_name, seed);
    session::SyntheticOptions so;
    so.seed = seed;
    so.jitter_ns = std::llround(jitter_ms * 1e6);
    so.image_height = height;
    so.image_width = width;
    so.realtime = realtime;
    auto sources = session::make_synthetic_sources(header, so);
    session::RecordOptions ro;
    ro.duration_ns = std::llround(duration_s * 1e9);
    ro.stall_ns = std::llround(stall_ms * 1e6);
    const auto path = resolve(out_path.empty() ? "session.prxs" : out_path);
    try {
      const auto sum = session::record(sources, header, path, ro);
      Report r = record_report();
      add_stats_rows(r, header, sum.stats, sum.stop, sum.stalled_stream);
      emit(r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StreamStalled) throw;
      const session::SessionReader reader(path);
      Report r = record_report();
      add_stats_rows(r, header, reader.footer()->stats, reader.footer()->stop, reader.footer()->stalled_stream);
      emit(r);
      throw;
    }
  });

  // replay
  std::string in_path;
  auto* replay = app.add_subcommand("replay", "Re-record a session file through the recorder");
  replay->add_option("session", in_path, "Input session")->required();
  replay->add_option("--out", out_path, "Output session")->required();
  on(replay, [&] {
    const auto src = resolve(in_path);
    const auto dst = resolve(out_path);
    guard_output(src, dst);
    const session::SessionReader reader(src);
    std::int64_t last = 0;
    for (const auto& e : reader.entries()) last = std::max(last, e.timestamp_ns);
    std::vector<std::unique_ptr<session::Source>> sources;
    for (const auto& s : reader.header().streams) sources.push_back(session::make_replay_source(src, s.id));
    session::RecordOptions ro;
    ro.duration_ns = last + 1;
    ro.stall_ns = std::max<std::int64_t>(ro.stall_ns, last + 1);
    const auto sum = session::record(sources, reader.header(), dst, ro);
    Report r = record_report();
    add_stats_rows(r, reader.header(), sum.stats, sum.stop, sum.stalled_stream);
    emit(r);
  });

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Header, stream table and per-stream statistics");
  inspect->add_option("session", in_path, "Session or episode file")->required();
  on(inspect, [&] {
    const session::SessionReader reader(resolve(in_path));
    const auto& h = reader.header();
    const auto& f = *reader.footer();
    Report r({"section", "variant", "rate_hz", "chunks", "stop", "stream", "name", "kind", "stream_rate_hz", "samples",
              "drops", "first_ns", "last_ns"});
    for (const auto& s : h.streams) {
      std::uint64_t drops = 0;
      for (const auto& st : f.stats) {
        if (st.stream == s.id) drops = st.drops;
      }
      const auto es = reader.entries(s.id);
      r.row({h.section, h.variant, num(h.rate_millihz / 1000.0), reader.chunks().size(), session::to_string(f.stop), s.id,
             session::stream_name(s.id), static_cast<int>(s.kind), num(s.rate_millihz / 1000.0), es.size(), drops,
             es.empty() ? json(nullptr) : json(es.front().timestamp_ns),
             es.empty() ? json(nullptr) : json(es.back().timestamp_ns)});
    }
    emit(r);
  });

  // validate
  auto* validate = app.add_subcommand("validate", "Verify every CRC and the index of a session file");
  validate->add_option("session", in_path, "Session or episode file")->required();
  on(validate, [&] {
    const auto path = resolve(in_path);
    const auto rep = session::validate_session(path);
    std::string problems;
    for (const auto& p : rep.problems) {
      err << "prx: " << path.string() << ": " << p << '\n';
      problems += (problems.empty() ? "" : "; ") + p;
    }
    Report r({"path", "ok", "chunks", "samples", "error", "problems"});
    r.row({path.string(), rep.ok, rep.chunks, rep.samples, rep.first_error_code ? json(*rep.first_error_code) : json(nullptr),
           problems});
    emit(r);
    if (!rep.ok) status = kExitDomain;
  });

  // align
  double rate_hz = 20.0;
  auto* align = app.add_subcommand("align", "Resample a session onto a fixed-rate grid");
  align->add_option("session", in_path, "Input session")->required();
  align->add_option("--rate", rate_hz, "Grid rate in Hz")->capture_default_str();
  align->add_option("--out", out_path, "Write the aligned session here");
  on(align, [&] {
    const auto src = resolve(in_path);
    const session::SessionReader reader(src);
    session::AlignOptions opt;
    opt.rate_hz = rate_hz;
    opt.decode_images = !out_path.empty();
    const auto a = session::align(reader, opt);
    if (!out_path.empty()) {
      const auto dst = resolve(out_path);
      guard_output(src, dst);
      session::write_aligned(a, dst);
    }
    Report r({"stream", "name", "steps", "dropped", "max_skew_ms", "mean_skew_ms"});
    for (std::size_t i = 0; i < session::kAlignedStreams.size(); ++i) {
      double worst = 0.0;
      double total = 0.0;
      for (const auto& s : a.steps) {
        const double d = std::abs(static_cast<double>(s.source_ns[i] - s.grid_ns)) / 1e6;
        worst = std::max(worst, d);
        total += d;
      }
      const auto id = session::kAlignedStreams[i];
      r.row({id, session::stream_name(id), a.steps.size(), a.dropped, num(worst),
             a.steps.empty() ? json(nullptr) : num(total / static_cast<double>(a.steps.size()))});
    }
    emit(r);
  });

  // export
  int chunks = 1;
  std::string source_name = "perioperation";
  std::string task;
  auto* exp = app.add_subcommand("export", "Align a session and write a training episode");
  exp->add_option("session", in_path, "Input session")->required();
  exp->add_option("--chunks", chunks, "Arm action horizon k")->capture_default_str();
  exp->add_option("--source", source_name, "perioperation|teleoperation (periop|teleop)")->capture_default_str();
  exp->add_option("--task", task, "Task label");
  exp->add_option("--rate", rate_hz, "Grid rate in Hz")->capture_default_str();
  exp->add_option("--out", out_path, "Episode file")->required();
  on(exp, [&] {
    const auto tag = exporter::parse_source(source_name);
    if (!tag) throw UsageError("--source must be perioperation or teleoperation");
    const auto src = resolve(in_path);
    const auto dst = resolve(out_path);
    guard_output(src, dst);
    const session::SessionReader reader(src);
    session::AlignOptions opt;
    opt.rate_hz = rate_hz;
    const auto a = session::align(reader, opt);
    const auto ep = exporter::export_episode(a.steps, chunks, *tag, task, reader.header().variant);
    exporter::write_episode(ep, dst);
    Report r({"path", "source", "task", "horizon", "steps", "duration_s"});
    r.row({dst.string(), exporter::to_string(ep.source), ep.task, ep.horizon, ep.steps.size(), num(ep.duration_s())});
    emit(r);
  });

  // augment
  std::string config_path;
  std::optional<double> brightness, hue, noise_deg, noise_prob, dropout;
  std::optional<std::uint64_t> aug_seed;
  auto* aug = app.add_subcommand("augment", "Apply training augmentations to an episode");
  aug->add_option("episode", in_path, "Input episode")->required();
  aug->add_option("--config", config_path, "key = value file (brightness, hue, joint_noise_deg, ...)");
  aug->add_option("--seed", aug_seed, "Seed (overrides the config)");
  aug->add_option("--brightness", brightness, "Brightness bound");
  aug->add_option("--hue", hue, "Hue bound in turns");
  aug->add_option("--joint-noise-deg", noise_deg, "Arm joint noise bound");
  aug->add_option("--joint-noise-prob", noise_prob, "Per-step noise probability");
  aug->add_option("--dropout-prob", dropout, "Per-image dropout probability");
  aug->add_option("--out", out_path, "Augmented episode")->required();
  on(aug, [&] {
    const auto src = resolve(in_path);
    const auto dst = resolve(out_path);
    guard_output(src, dst);
    auto cfg = config_path.empty() ? exporter::AugmentConfig{}
                                   : exporter::AugmentConfig::from(KeyValueConfig::load(resolve(config_path)));
    if (aug_seed) cfg.seed = *aug_seed;
    if (brightness) cfg.brightness = *brightness;
    if (hue) cfg.hue = *hue;
    if (noise_deg) cfg.joint_noise_deg = *noise_deg;
    if (noise_prob) cfg.joint_noise_prob = *noise_prob;
    if (dropout) cfg.dropout_prob = *dropout;
    exporter::AugmentStats st;
    const auto outp = exporter::augment(exporter::read_episode(src), cfg, &st);
    exporter::write_episode(outp, dst);
    Report r({"path", "seed", "steps", "noised_steps", "images", "dropped_images", "max_noise_deg"});
    r.row({dst.string(), cfg.seed, st.steps, st.noised_steps, st.images, st.dropped_images,
           num(hand::rad2deg(st.max_noise_rad))});
    emit(r);
  });

  // metrics
  auto* met = app.add_subcommand("metrics", "Evaluation metrics");
  met->require_subcommand(1);
  std::string trials_path;
  std::vector<std::string> trial_args;
  double cap_s = metrics::kTrialCapSeconds;
  auto* thr = met->add_subcommand("throughput", "Successes per minute with the trial time cap");
  thr->add_option("--trials", trials_path, "File of <success>,<seconds> lines");
  thr->add_option("--trial", trial_args, "<success>:<seconds>, success is 1|0 (repeatable)");
  thr->add_option("--cap", cap_s, "Trial time cap in seconds")->capture_default_str();
  on(thr, [&] {
    std::vector<metrics::Trial> trials;
    if (!trials_path.empty()) {
      const auto p = resolve(trials_path);
      for (const auto& l : data_lines(p)) trials.push_back(parse_trial(l, ',', p));
    }
    for (const auto& t : trial_args) trials.push_back(parse_trial(t, ':', {}));
    const auto t = metrics::throughput(trials, cap_s);
    Report r({"per_minute", "successes", "failures", "reclassified", "mean_success_s"});
    r.row({num(t.per_minute), t.successes, t.failures, t.reclassified,
           t.mean_success_s ? num(*t.mean_success_s) : json(nullptr)});
    emit(r);
  });
  std::string rates;
  std::optional<double> sem;
  auto* succ = met->add_subcommand("success", "Normalized success over six stages");
  succ->add_option("--rates", rates, "Six comma-separated stage success rates")->required();
  succ->add_option("--sem", sem, "Standard error to report alongside");
  on(succ, [&] {
    const auto v = to_doubles(rates, 0, "--rates");
    const auto n = metrics::normalized_success(v);
    Report r({"normalized_success", "cumulative", "formatted"});
    r.row({num(n.value), n.cumulative, sem ? json(metrics::format_with_sem(n.value, *sem)) : json(nullptr)});
    emit(r);
  });
  auto* stages = met->add_subcommand("stages", "Mean and standard error of per-stage times");
  stages->add_option("--trials", trials_path, "File with one trial per line, comma-separated stage seconds")->required();
  on(stages, [&] {
    const auto p = resolve(trials_path);
    std::vector<std::vector<double>> trials;
    for (const auto& l : data_lines(p)) {
      std::vector<double> row;
      for (const auto& c : split(l, ',')) row.push_back(file_number(c, p));
      trials.push_back(std::move(row));
    }
    Report r({"stage", "n", "mean_s", "sem_s"});
    const auto st = metrics::stage_time_stats(trials);
    for (std::size_t i = 0; i < st.size(); ++i) {
      r.row({i + 1, st[i].n, num(st[i].mean), st[i].sem_defined ? num(st[i].sem) : json(nullptr)});
    }
    emit(r);
  });
  std::vector<std::string> episode_args;
  std::string manifest_in;
  std::string periop_batch;
  std::string teleop_batch;
  std::string manifest_out;
  auto* man = met->add_subcommand("manifest", "Demonstration counts and minutes per source");
  man->add_option("--episodes", episode_args, "Episode files");
  man->add_option("--manifest", manifest_in, "Existing manifest (jsonl)");
  man->add_option("--periop", periop_batch, "<count>:<seconds per demo>");
  man->add_option("--teleop", teleop_batch, "<count>:<seconds per demo>");
  man->add_option("--write", manifest_out, "Write the per-episode manifest (jsonl)");
  on(man, [&] {
    const bool mix = !periop_batch.empty() || !teleop_batch.empty();
    const bool files = !episode_args.empty() || !manifest_in.empty();
    if (mix == files) throw UsageError("give --periop/--teleop, or --episodes/--manifest");
    metrics::Manifest m;
    if (mix) {
      m = metrics::mix_manifest(periop_batch.empty() ? metrics::Batch{} : parse_batch(periop_batch, "--periop"),
                                teleop_batch.empty() ? metrics::Batch{} : parse_batch(teleop_batch, "--teleop"));
    } else {
      std::vector<metrics::EpisodeRecord> recs;
      if (!manifest_in.empty()) recs = metrics::read_manifest(resolve(manifest_in)).records;
      for (const auto& e : episode_args) {
        const auto p = resolve(e);
        const auto ep = exporter::read_episode(p);
        recs.push_back({p.string(), exporter::to_string(ep.source), ep.duration_s()});
      }
      m = metrics::make_manifest(std::move(recs));
    }
    if (!manifest_out.empty()) {
      const auto p = resolve(manifest_out);
      std::ofstream f(p);
      f << metrics::to_jsonl(m);
      if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
    }
    Report r({"source", "count", "minutes"});
    std::size_t total = 0;
    for (const auto& s : m.sources) {
      r.row({s.source, s.count, num(s.minutes)});
      total += s.count;
    }
    r.row({"total", total, num(m.total_minutes)});
    emit(r);
  });

  // CLI11 consumes the argument vector back to front.
  std::vector<std::string> rev(args.rbegin(), args.rend());
  CLI::App* failing = &app;
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    for (auto* s = &app; s;) {
      auto subs = s->get_subcommands();
      if (subs.empty()) {
        out << s->help();
        break;
      }
      s = subs.front();
    }
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    for (auto* s = &app; s;) {
      failing = s;
      auto subs = s->get_subcommands();
      s = subs.empty() ? nullptr : subs.front();
    }
    err << "prx: " << e.what() << "\n\n" << failing->help();
    return kExitUsage;
  }

  for (auto& [sub, fn] : handlers) {
    if (!sub->parsed()) continue;
    try {
      fn();
    } catch (const UsageError& e) {
      err << "prx: " << e.what() << "\n\n" << sub->help();
      return kExitUsage;
    } catch (const Error& e) {
      err << "prx: " << e.what() << '\n';
      return kExitDomain;
    } catch (const std::exception& e) {
      err << "prx: " << e.what() << '\n';
      return kExitDomain;
    }
    return status;
  }
  err << "prx: no command\n\n" << app.help();
  return kExitUsage;
}

}  // namespace prx::cli
