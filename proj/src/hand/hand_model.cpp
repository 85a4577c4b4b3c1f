#include "prx/hand/hand_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>

#include "prx/error.hpp"

namespace prx::hand {
namespace {

constexpr double kAxisTolerance = 1e-12;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Workspace and speed figures for the DEXOP-7 hardware. Flexion joints span
// [0, range]; abduction joints are symmetric about zero.
struct JointDefaults {
  double range_deg;
  double max_speed;
  bool symmetric;
};

JointDefaults defaults_for(JointKind kind) {
  switch (kind) {
    case JointKind::McpFlexion: return {110.0, 35.0, false};
    case JointKind::Pip: return {105.0, 15.0, false};
    case JointKind::TmFlexion: return {75.0, 17.0, false};
    case JointKind::TmAbduction: return {90.0, 12.0, true};
    case JointKind::Ip: return {65.0, 9.0, false};
    // Not characterized on hardware; modest lateral spread.
    case JointKind::McpAbduction: return {40.0, 35.0, true};
  }
  return {0.0, 1.0, false};
}

JointSpec make_joint(FingerName finger, JointKind kind, const Eigen::Vector3d& axis, const Pose& offset) {
  const JointDefaults d = defaults_for(kind);
  JointSpec j;
  j.id = std::string(to_string(finger)) + "." + std::string(slug(kind));
  j.kind = kind;
  j.axis = axis;
  j.offset = offset;
  if (d.symmetric) {
    j.limits = {-deg2rad(d.range_deg / 2.0), deg2rad(d.range_deg / 2.0)};
  } else {
    j.limits = {0.0, deg2rad(d.range_deg)};
  }
  j.max_speed = d.max_speed;
  return j;
}

FingerChain make_finger(FingerName name, const Pose& base, bool abduction, double proximal, double distal) {
  FingerChain f;
  f.name = name;
  f.proximal_length = proximal;
  f.distal_length = distal;
  if (abduction) {
    f.joints.push_back(make_joint(name, JointKind::McpAbduction, Eigen::Vector3d::UnitZ(), base));
    f.joints.push_back(make_joint(name, JointKind::McpFlexion, Eigen::Vector3d::UnitY(), Pose::identity()));
  } else {
    f.joints.push_back(make_joint(name, JointKind::McpFlexion, Eigen::Vector3d::UnitY(), base));
  }
  f.joints.push_back(make_joint(name, JointKind::Pip, Eigen::Vector3d::UnitY(),
                                Pose::from_translation({proximal, 0.0, 0.0})));
  return f;
}

FingerChain make_thumb(const Pose& base, double proximal, double distal, double tm_distance, double ip_tilt) {
  FingerChain f;
  f.name = FingerName::Thumb;
  f.proximal_length = proximal;
  f.distal_length = distal;
  // The abduction axis sits below the flexion axis (toward the wrist), so the
  // two TM axes are perpendicular with a common normal of length tm_distance.
  f.joints.push_back(make_joint(f.name, JointKind::TmAbduction, Eigen::Vector3d::UnitZ(), base));
  f.joints.push_back(make_joint(f.name, JointKind::TmFlexion, Eigen::Vector3d::UnitY(),
                                Pose::from_translation({tm_distance, 0.0, 0.0})));
  const Eigen::Vector3d ip_axis = Eigen::Vector3d(0.0, std::cos(ip_tilt), std::sin(ip_tilt)).normalized();
  f.joints.push_back(make_joint(f.name, JointKind::Ip, ip_axis, Pose::from_translation({proximal, 0.0, 0.0})));
  return f;
}

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidGeometry, what + " must be positive, got " + std::to_string(v));
  }
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Dexop12: return "DEXOP-12";
    case Variant::Dexop9: return "DEXOP-9";
    case Variant::Dexop7: return "DEXOP-7";
    case Variant::Custom: return "custom";
  }
  return "?";
}

std::string_view to_string(FingerName f) {
  switch (f) {
    case FingerName::Thumb: return "thumb";
    case FingerName::Index: return "index";
    case FingerName::Middle: return "middle";
    case FingerName::Ring: return "ring";
  }
  return "?";
}

std::string_view to_string(Phalanx p) { return p == Phalanx::Proximal ? "proximal" : "distal"; }

std::string_view to_string(JointKind k) {
  switch (k) {
    case JointKind::McpFlexion: return "MCP-flexion";
    case JointKind::McpAbduction: return "MCP-abduction";
    case JointKind::Pip: return "PIP";
    case JointKind::TmFlexion: return "TM-flexion";
    case JointKind::TmAbduction: return "TM-abduction";
    case JointKind::Ip: return "IP";
  }
  return "?";
}

std::string_view slug(JointKind k) {
  switch (k) {
    case JointKind::McpFlexion: return "mcp_flexion";
    case JointKind::McpAbduction: return "mcp_abduction";
    case JointKind::Pip: return "pip";
    case JointKind::TmFlexion: return "tm_flexion";
    case JointKind::TmAbduction: return "tm_abduction";
    case JointKind::Ip: return "ip";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  const std::string n = lower(name);
  if (n == "dexop-12" || n == "dexop12") return Variant::Dexop12;
  if (n == "dexop-9" || n == "dexop9") return Variant::Dexop9;
  if (n == "dexop-7" || n == "dexop7") return Variant::Dexop7;
  return std::nullopt;
}

std::optional<FingerName> parse_finger(std::string_view name) {
  const std::string n = lower(name);
  if (n == "thumb") return FingerName::Thumb;
  if (n == "index") return FingerName::Index;
  if (n == "middle") return FingerName::Middle;
  if (n == "ring") return FingerName::Ring;
  return std::nullopt;
}

std::optional<Phalanx> parse_phalanx(std::string_view name) {
  const std::string n = lower(name);
  if (n == "proximal") return Phalanx::Proximal;
  if (n == "distal") return Phalanx::Distal;
  return std::nullopt;
}

std::optional<std::size_t> FingerChain::distal_joint() const {
  for (std::size_t i = 0; i < joints.size(); ++i) {
    if (joints[i].kind == JointKind::Pip || joints[i].kind == JointKind::Ip) return i;
  }
  return std::nullopt;
}

std::size_t FingerChain::proximal_joint() const {
  const auto d = distal_joint();
  return d ? *d - 1 : joints.size() - 1;
}

HandModel::HandModel(Variant variant, std::vector<FingerChain> fingers, Pose palm)
    : variant_(variant), fingers_(std::move(fingers)), palm_(std::move(palm)) {
  if (!palm_.is_rigid()) throw Error(ErrorCode::InvalidGeometry, "palm frame is not a rigid transform");
  for (const auto& f : fingers_) {
    const std::string name(to_string(f.name));
    if (f.joints.empty()) throw Error(ErrorCode::InvalidGeometry, name + ": finger has no joints");
    check_positive(f.proximal_length, name + " proximal length");
    check_positive(f.distal_length, name + " distal length");
    if (const auto d = f.distal_joint(); d && *d == 0) {
      throw Error(ErrorCode::InvalidGeometry, name + ": distal joint cannot be first in the chain");
    }
    for (const auto& j : f.joints) {
      if (std::abs(j.axis.norm() - 1.0) > kAxisTolerance) {
        throw Error(ErrorCode::InvalidGeometry, j.id + ": axis is not unit length");
      }
      if (!(j.limits.min < j.limits.max)) throw Error(ErrorCode::InvalidGeometry, j.id + ": limits not ordered");
      check_positive(j.max_speed, j.id + " max speed");
      if (!j.offset.is_rigid()) throw Error(ErrorCode::InvalidGeometry, j.id + ": offset is not rigid");
    }
  }
  for (std::size_t a = 0; a < fingers_.size(); ++a) {
    for (std::size_t b = a + 1; b < fingers_.size(); ++b) {
      if (fingers_[a].name == fingers_[b].name) {
        throw Error(ErrorCode::InvalidGeometry, "duplicate finger " + std::string(to_string(fingers_[a].name)));
      }
    }
  }
  offsets_.reserve(fingers_.size());
  for (const auto& f : fingers_) {
    offsets_.push_back(dof_);
    dof_ += f.joints.size();
  }
}

std::optional<std::size_t> HandModel::finger_index(FingerName name) const {
  for (std::size_t i = 0; i < fingers_.size(); ++i) {
    if (fingers_[i].name == name) return i;
  }
  return std::nullopt;
}

const JointSpec& HandModel::joint(std::size_t canonical_index) const {
  for (std::size_t f = fingers_.size(); f-- > 0;) {
    if (canonical_index >= offsets_[f]) {
      const std::size_t local = canonical_index - offsets_[f];
      if (local < fingers_[f].joints.size()) return fingers_[f].joints[local];
      break;
    }
  }
  throw Error(ErrorCode::DimensionMismatch, "joint index " + std::to_string(canonical_index) + " out of range");
}

std::optional<std::size_t> HandModel::joint_index(std::string_view id) const {
  for (std::size_t f = 0; f < fingers_.size(); ++f) {
    for (std::size_t j = 0; j < fingers_[f].joints.size(); ++j) {
      if (fingers_[f].joints[j].id == id) return offsets_[f] + j;
    }
  }
  return std::nullopt;
}

std::vector<std::string> HandModel::joint_ids() const {
  std::vector<std::string> ids;
  ids.reserve(dof_);
  for (const auto& f : fingers_) {
    for (const auto& j : f.joints) ids.push_back(j.id);
  }
  return ids;
}

HandModel load_model(Variant variant, const KeyValueConfig* overrides) {
  if (variant == Variant::Custom) throw Error(ErrorCode::UnknownVariant, "custom models have no preset");

  HandGeometry geom;
  std::map<FingerName, std::pair<double, double>> lengths;
  const std::vector<FingerName> names =
      variant == Variant::Dexop12
          ? std::vector<FingerName>{FingerName::Thumb, FingerName::Index, FingerName::Middle, FingerName::Ring}
          : std::vector<FingerName>{FingerName::Thumb, FingerName::Index, FingerName::Middle};
  for (auto n : names) lengths[n] = {geom.proximal_length, geom.distal_length};

  if (overrides) {
    for (auto n : names) {
      const std::string f(to_string(n));
      if (auto v = overrides->get_double(f + ".proximal_mm")) lengths[n].first = *v / 1000.0;
      if (auto v = overrides->get_double(f + ".distal_mm")) lengths[n].second = *v / 1000.0;
    }
    if (auto v = overrides->get_double("palm_spacing_mm")) geom.palm_spacing = *v / 1000.0;
    if (auto v = overrides->get_double("thumb.tm_axis_distance_mm")) geom.tm_axis_distance = *v / 1000.0;
    if (auto v = overrides->get_double("thumb.ip_tilt_deg")) geom.thumb_ip_tilt = deg2rad(*v);
  }
  check_positive(geom.palm_spacing, "palm spacing");
  if (!(geom.tm_axis_distance >= 0.0)) throw Error(ErrorCode::InvalidGeometry, "TM axis distance must be >= 0");

  const bool abduction = variant != Variant::Dexop7;
  const double s = geom.palm_spacing;
  const double mcp_x = 0.085;
  std::vector<FingerChain> fingers;
  for (auto n : names) {
    const auto [prox, dist] = lengths[n];
    check_positive(prox, std::string(to_string(n)) + " proximal length");
    check_positive(dist, std::string(to_string(n)) + " distal length");
    switch (n) {
      case FingerName::Thumb: {
        Pose base = Pose::from_translation({0.025, s + 0.015, -0.012}) *
                    Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), deg2rad(40.0));
        fingers.push_back(make_thumb(base, prox, dist, geom.tm_axis_distance, geom.thumb_ip_tilt));
        break;
      }
      case FingerName::Index:
        fingers.push_back(make_finger(n, Pose::from_translation({mcp_x, s, 0.0}), abduction, prox, dist));
        break;
      case FingerName::Middle:
        fingers.push_back(make_finger(n, Pose::from_translation({mcp_x + 0.004, 0.0, 0.0}), abduction, prox, dist));
        break;
      case FingerName::Ring:
        fingers.push_back(make_finger(n, Pose::from_translation({mcp_x, -s, 0.0}), abduction, prox, dist));
        break;
    }
  }

  if (overrides) {
    for (const auto& key : overrides->keys_with_prefix("limit.")) {
      const std::string id = key.substr(6);
      auto values = overrides->get_doubles(key);
      if (!values || values->size() != 2) throw Error(ErrorCode::InvalidConfig, key + ": expected 'min_deg, max_deg'");
      bool found = false;
      for (auto& f : fingers) {
        for (auto& j : f.joints) {
          if (j.id == id) {
            j.limits = {deg2rad((*values)[0]), deg2rad((*values)[1])};
            found = true;
          }
        }
      }
      if (!found) throw Error(ErrorCode::InvalidConfig, key + ": no joint '" + id + "' in " + std::string(to_string(variant)));
    }
    for (const auto& key : overrides->keys_with_prefix("speed.")) {
      const std::string id = key.substr(6);
      bool found = false;
      for (auto& f : fingers) {
        for (auto& j : f.joints) {
          if (j.id == id) {
            j.max_speed = *overrides->get_double(key);
            found = true;
          }
        }
      }
      if (!found) throw Error(ErrorCode::InvalidConfig, key + ": no joint '" + id + "' in " + std::string(to_string(variant)));
    }
  }

  return HandModel(variant, std::move(fingers));
}

HandModel load_model(std::string_view variant_name, const KeyValueConfig* overrides) {
  auto v = parse_variant(variant_name);
  if (!v) throw Error(ErrorCode::UnknownVariant, std::string(variant_name));
  return load_model(*v, overrides);
}

HandModel load_model(const KeyValueConfig& config) {
  auto name = config.get("variant");
  if (!name) throw Error(ErrorCode::InvalidConfig, "missing 'variant' key");
  return load_model(*name, &config);
}

HandModel resolve_model(const std::string& variant_or_path) {
  if (parse_variant(variant_or_path)) return load_model(variant_or_path);
  if (std::filesystem::exists(variant_or_path)) return load_model(KeyValueConfig::load(variant_or_path));
  throw Error(ErrorCode::UnknownVariant, variant_or_path);
}

ValidationReport validate_state(const HandModel& model, const JointState& state) {
  if (static_cast<std::size_t>(state.angles.size()) != model.dof()) {
    throw Error(ErrorCode::DimensionMismatch, "state has " + std::to_string(state.angles.size()) +
                                                  " angles, model has " + std::to_string(model.dof()) + " DoF");
  }
  ValidationReport report;
  report.within_limits.resize(model.dof());
  for (std::size_t i = 0; i < model.dof(); ++i) {
    const bool ok = model.joint(i).limits.contains(state.angles[static_cast<Eigen::Index>(i)]);
    report.within_limits[i] = ok;
    if (!ok) report.flagged.push_back(i);
  }
  return report;
}

namespace {

void require_dimensions(const HandModel& model, const JointState& state) {
  if (static_cast<std::size_t>(state.angles.size()) != model.dof()) {
    throw Error(ErrorCode::DimensionMismatch, "state has " + std::to_string(state.angles.size()) +
                                                  " angles, model has " + std::to_string(model.dof()) + " DoF");
  }
}

// Palm-relative chain for one finger. joint_origin/joint_axis are expressed in
// the palm frame before the joint rotates.
struct LocalChain {
  std::vector<Pose> after;  // frame after each joint rotation
  std::vector<Eigen::Vector3d> origin;
  std::vector<Eigen::Vector3d> axis;
};

LocalChain local_chain(const FingerChain& finger, const Eigen::VectorXd& angles, std::size_t offset) {
  LocalChain c;
  c.after.reserve(finger.joints.size());
  Pose frame = Pose::identity();
  for (std::size_t j = 0; j < finger.joints.size(); ++j) {
    const JointSpec& spec = finger.joints[j];
    const Pose pre = frame * spec.offset;
    c.origin.push_back(pre.translation);
    c.axis.push_back(pre.rotation * spec.axis);
    frame = pre * Pose::from_axis_angle(spec.axis, angles[static_cast<Eigen::Index>(offset + j)]);
    c.after.push_back(frame);
  }
  return c;
}

struct ResolvedContact {
  std::size_t finger_index;
  std::size_t last_joint;  // phalanx frame is after this joint
};

ResolvedContact resolve(const HandModel& model, const ContactLocation& contact) {
  const auto fi = model.finger_index(contact.finger);
  if (!fi) {
    throw Error(ErrorCode::UnknownPhalanx, std::string(to_string(contact.finger)) + " is not part of " +
                                               std::string(to_string(model.variant())));
  }
  const FingerChain& finger = model.fingers()[*fi];
  if (contact.phalanx == Phalanx::Proximal) return {*fi, finger.proximal_joint()};
  const auto d = finger.distal_joint();
  if (!d) {
    throw Error(ErrorCode::UnknownPhalanx, std::string(to_string(contact.finger)) + " has no distal phalanx");
  }
  return {*fi, finger.joints.size() - 1};
}

}  // namespace

std::vector<FingerFrames> forward_kinematics(const HandModel& model, const JointState& state) {
  require_dimensions(model, state);
  std::vector<FingerFrames> out;
  out.reserve(model.fingers().size());
  for (std::size_t f = 0; f < model.fingers().size(); ++f) {
    const FingerChain& finger = model.fingers()[f];
    const LocalChain chain = local_chain(finger, state.angles, model.joint_offset(f));
    FingerFrames frames;
    frames.finger = finger.name;
    for (const auto& p : chain.after) frames.joint_frames.push_back(model.palm() * p);
    frames.proximal = frames.joint_frames[finger.proximal_joint()];
    if (finger.distal_joint()) {
      frames.distal = frames.joint_frames.back();
      frames.fingertip = *frames.distal * Pose::from_translation({finger.distal_length, 0.0, 0.0});
    } else {
      frames.fingertip = frames.proximal * Pose::from_translation({finger.proximal_length, 0.0, 0.0});
    }
    out.push_back(std::move(frames));
  }
  return out;
}

Eigen::Vector3d contact_position(const HandModel& model, const JointState& state, const ContactLocation& contact) {
  require_dimensions(model, state);
  const ResolvedContact rc = resolve(model, contact);
  const LocalChain chain =
      local_chain(model.fingers()[rc.finger_index], state.angles, model.joint_offset(rc.finger_index));
  return chain.after[rc.last_joint].apply(contact.point);
}

Eigen::MatrixXd contact_jacobian_6d(const HandModel& model, const JointState& state,
                                    const ContactLocation& contact) {
  require_dimensions(model, state);
  const ResolvedContact rc = resolve(model, contact);
  const std::size_t offset = model.joint_offset(rc.finger_index);
  const LocalChain chain = local_chain(model.fingers()[rc.finger_index], state.angles, offset);
  const Eigen::Vector3d p = chain.after[rc.last_joint].apply(contact.point);

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(model.dof()));
  for (std::size_t j = 0; j <= rc.last_joint; ++j) {
    const auto col = static_cast<Eigen::Index>(offset + j);
    jac.block<3, 1>(0, col) = chain.axis[j].cross(p - chain.origin[j]);
    jac.block<3, 1>(3, col) = chain.axis[j];
  }
  return jac;
}

Eigen::MatrixXd contact_jacobian(const HandModel& model, const JointState& state, const ContactLocation& contact) {
  return contact_jacobian_6d(model, state, contact).topRows(3);
}

std::vector<WorkspaceRow> workspace_report(const HandModel& model) {
  std::vector<WorkspaceRow> rows;
  rows.reserve(model.dof());
  for (const auto& f : model.fingers()) {
    for (const auto& j : f.joints) {
      WorkspaceRow r;
      r.joint_id = j.id;
      r.kind = j.kind;
      r.min_deg = rad2deg(j.limits.min);
      r.max_deg = rad2deg(j.limits.max);
      r.range_deg = rad2deg(j.limits.span());
      r.max_speed = j.max_speed;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace prx::hand
