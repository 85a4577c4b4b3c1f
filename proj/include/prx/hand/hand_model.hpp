#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prx/config.hpp"
#include "prx/hand/pose.hpp"

namespace prx::hand {

// Angle convention: radians, zero is the fully extended finger, positive
// flexion bends toward the palm (-z in the palm frame).
//
// Palm frame: x points from the wrist toward the fingertips, y points toward
// the thumb side, z is the dorsal normal.

enum class Variant { Dexop12, Dexop9, Dexop7, Custom };
enum class FingerName { Thumb, Index, Middle, Ring };
enum class Phalanx { Proximal, Distal };
enum class JointKind { McpFlexion, McpAbduction, Pip, TmFlexion, TmAbduction, Ip };

std::string_view to_string(Variant v);
std::string_view to_string(FingerName f);
std::string_view to_string(Phalanx p);
std::string_view to_string(JointKind k);
// Identifier fragment used in joint ids and config keys, e.g. "mcp_flexion".
std::string_view slug(JointKind k);

std::optional<Variant> parse_variant(std::string_view name);
std::optional<FingerName> parse_finger(std::string_view name);
std::optional<Phalanx> parse_phalanx(std::string_view name);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct JointLimits {
  double min = 0.0;
  double max = 0.0;

  double span() const { return max - min; }
  bool contains(double q) const { return q >= min && q <= max; }
};

struct JointSpec {
  std::string id;  // "<finger>.<slug>", e.g. "index.pip"
  JointKind kind = JointKind::McpFlexion;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitY();  // unit, in the parent frame
  Pose offset;                                      // from the parent joint frame
  JointLimits limits;
  double max_speed = 0.0;  // rad/s
};

struct FingerChain {
  FingerName name = FingerName::Index;
  std::vector<JointSpec> joints;  // chain order
  double proximal_length = 0.0;   // m
  double distal_length = 0.0;     // m

  // The PIP/IP joint, when present, starts the distal phalanx.
  std::optional<std::size_t> distal_joint() const;
  // Last joint before the distal phalanx; the proximal phalanx hangs off it.
  std::size_t proximal_joint() const;
};

struct JointState {
  Eigen::VectorXd angles;
  std::int64_t timestamp_ns = 0;
};

class HandModel {
 public:
  // Validates geometry: unit axes, ordered limits, positive speeds and lengths.
  HandModel(Variant variant, std::vector<FingerChain> fingers, Pose palm = Pose::identity());

  Variant variant() const { return variant_; }
  const std::vector<FingerChain>& fingers() const { return fingers_; }
  const Pose& palm() const { return palm_; }
  std::size_t dof() const { return dof_; }

  // Canonical index of the first joint of the finger at `finger_index`.
  std::size_t joint_offset(std::size_t finger_index) const { return offsets_.at(finger_index); }
  std::optional<std::size_t> finger_index(FingerName name) const;
  const JointSpec& joint(std::size_t canonical_index) const;
  std::optional<std::size_t> joint_index(std::string_view id) const;
  std::vector<std::string> joint_ids() const;

 private:
  Variant variant_;
  std::vector<FingerChain> fingers_;
  Pose palm_;
  std::vector<std::size_t> offsets_;
  std::size_t dof_ = 0;
};

// Anthropomorphic defaults; the device's true link dimensions are unpublished.
struct HandGeometry {
  double proximal_length = 0.045;
  double distal_length = 0.035;
  double palm_spacing = 0.022;      // lateral distance between MCP joints
  double tm_axis_distance = 0.015;  // perpendicular distance between TM axes
  double thumb_ip_tilt = deg2rad(20.0);
};

// Presets: DEXOP-12 (4 fingers, 12 DoF), DEXOP-9 (no ring finger, 9 DoF),
// DEXOP-7 (DEXOP-9 without MCP abduction, 7 DoF). Recognized override keys:
//   <finger>.proximal_mm, <finger>.distal_mm, palm_spacing_mm,
//   thumb.tm_axis_distance_mm, thumb.ip_tilt_deg,
//   limit.<joint-id> = min_deg, max_deg      speed.<joint-id> = rad/s
HandModel load_model(Variant variant, const KeyValueConfig* overrides = nullptr);
HandModel load_model(std::string_view variant_name, const KeyValueConfig* overrides = nullptr);
// `variant` key selects the preset, remaining keys are overrides.
HandModel load_model(const KeyValueConfig& config);
// Preset name, or a path to a config file.
HandModel resolve_model(const std::string& variant_or_path);

struct ValidationReport {
  std::vector<bool> within_limits;  // canonical joint order
  std::vector<std::size_t> flagged;

  bool ok() const { return flagged.empty(); }
};

ValidationReport validate_state(const HandModel& model, const JointState& state);

struct FingerFrames {
  FingerName finger = FingerName::Index;
  std::vector<Pose> joint_frames;  // frame after each joint's rotation
  Pose proximal;
  std::optional<Pose> distal;
  Pose fingertip;
};

// World-frame poses (palm transform applied).
std::vector<FingerFrames> forward_kinematics(const HandModel& model, const JointState& state);

struct ContactLocation {
  FingerName finger = FingerName::Index;
  Phalanx phalanx = Phalanx::Distal;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // in the phalanx frame, m
};

// Contact point position in the palm frame.
Eigen::Vector3d contact_position(const HandModel& model, const JointState& state,
                                 const ContactLocation& contact);

// 3 x dof linear-velocity Jacobian of the contact point, palm frame. Columns of
// joints on other fingers or distal to the contact's phalanx are exactly zero.
Eigen::MatrixXd contact_jacobian(const HandModel& model, const JointState& state,
                                 const ContactLocation& contact);

// Experimental: 6 x dof Jacobian with angular rows appended (for contact couples).
Eigen::MatrixXd contact_jacobian_6d(const HandModel& model, const JointState& state,
                                    const ContactLocation& contact);

struct WorkspaceRow {
  std::string joint_id;
  JointKind kind = JointKind::McpFlexion;
  double min_deg = 0.0;
  double max_deg = 0.0;
  double range_deg = 0.0;
  double max_speed = 0.0;  // rad/s
};

std::vector<WorkspaceRow> workspace_report(const HandModel& model);

}  // namespace prx::hand
