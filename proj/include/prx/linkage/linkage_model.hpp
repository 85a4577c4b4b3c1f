#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prx/config.hpp"
#include "prx/hand/hand_model.hpp"
#include "prx/linkage/fourbar.hpp"

namespace prx::linkage {

enum class StageKind { FourBar, Coaxial, ChainedStage2 };

std::string_view to_string(StageKind k);
std::optional<StageKind> parse_stage_kind(std::string_view s);

// Exoskeleton joint `source` drives hand joint `target` (canonical indices).
// FourBar: theta = q_exo + input_offset, q_hand = phi - output_offset.
// Coaxial: q_hand = q_exo.
// ChainedStage2: the stage-1 coupler (exo PIP to hand PIP) is the ground. With
// stage-1 link angles (theta1, phi1) and coupler direction gamma1,
//   theta2 = theta1 + q_exo + input_offset - gamma1,
//   q_hand = phi2 + gamma1 - output_offset - phi1.
struct CouplingStage {
  std::string id;  // target hand joint id
  StageKind kind = StageKind::Coaxial;
  std::size_t source = 0;
  std::size_t target = 0;
  FourBarGeometry geometry;               // unused for coaxial stages
  std::optional<std::size_t> ground_stage;  // chained stages: index of the stage-1 four-bar in the same finger
};

struct FingerLinkage {
  hand::FingerName finger = hand::FingerName::Index;
  std::vector<CouplingStage> stages;  // evaluation order
};

class LinkageModel {
 public:
  // Validates: positive lengths and reference assemblability of every four-bar,
  // chained ground == stage-1 coupler, bijective joint map over the hand DoF,
  // coaxial TM abduction.
  LinkageModel(const hand::HandModel& hand, std::vector<FingerLinkage> fingers, double standoff);

  const std::vector<FingerLinkage>& fingers() const { return fingers_; }
  double standoff() const { return standoff_; }
  std::size_t dof() const { return dof_; }
  std::size_t stage_count() const;

 private:
  std::vector<FingerLinkage> fingers_;
  double standoff_;
  std::size_t dof_;
};

struct LinkageDefaults {
  double standoff = 0.060;    // m
  double short_axis = 0.012;  // m, stage-2 crank on each distal phalanx
};

// Default coupling: coaxial abduction, parallelogram stage 1 (ground and
// coupler = standoff, links = proximal length) and chained parallelogram
// stage 2, with offsets centering each joint's range at a right angle.
// Recognized keys:
//   standoff_mm, short_axis_mm,
//   stage.<joint-id> = coaxial
//   stage.<joint-id> = four-bar|chained, g_mm, a_mm, b_mm, c_mm, in_off_deg, out_off_deg[, open|crossed]
LinkageModel default_linkage(const hand::HandModel& hand, const KeyValueConfig* overrides = nullptr,
                             LinkageDefaults defaults = {});

// Per-stage continuation state, owned by the caller. Reuse one context across
// consecutive calls on a trajectory to keep every stage on its branch.
class LinkageContext {
 public:
  bool initialized() const { return initialized_; }
  void reset() { initialized_ = false; }

 private:
  friend hand::JointState exo_to_hand(const LinkageModel&, const hand::JointState&, LinkageContext&);

  struct StageState {
    double theta = 0.0;
    double phi = 0.0;
    double slope = 0.0;
  };
  bool initialized_ = false;
  Eigen::VectorXd exo_;
  std::vector<StageState> stages_;
};

// Walks the exoskeleton state from the context's last state (or the zero
// reference pose on first use) in increments of at most 0.01 rad.
hand::JointState exo_to_hand(const LinkageModel& linkage, const hand::JointState& exo, LinkageContext& context);
hand::JointState exo_to_hand(const LinkageModel& linkage, const hand::JointState& exo);

// Direction of the coupler A -> B relative to the ground line.
double coupler_angle(const FourBarGeometry& geom, double theta, double phi);

}  // namespace prx::linkage
