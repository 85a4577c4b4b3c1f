#pragma once

#include <vector>

#include <Eigen/Dense>

#include "prx/hand/hand_model.hpp"

namespace prx::contact {

// Point force on a phalanx. `point` is in the phalanx frame (m), `force` in
// the palm frame (N).
struct ContactWrench {
  hand::FingerName finger = hand::FingerName::Index;
  hand::Phalanx phalanx = hand::Phalanx::Distal;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d force = Eigen::Vector3d::Zero();

  hand::ContactLocation location() const { return {finger, phalanx, point}; }
};

struct ContactLimits {
  double max_force = 70.0;  // N, thumb peak of the sensor range
};

struct TorqueEstimate {
  Eigen::VectorXd torques;  // N*m, canonical joint order
  int rank = 0;             // of the stacked contact Jacobian
  int nullspace_dim = 0;    // dof - rank
};

// tau = sum_c J_c(q)^T F_c. Throws InvalidContact for non-finite values or a
// force above the ceiling, UnknownPhalanx, DimensionMismatch.
TorqueEstimate joint_torques(const hand::HandModel& model, const hand::JointState& state,
                             const std::vector<ContactWrench>& contacts, const ContactLimits& limits = {});

struct Observability {
  int rank = 0;
  int nullspace_dim = 0;
  // dof x nullspace_dim, orthonormal columns: joint-torque directions that no
  // observed contact force can produce.
  Eigen::MatrixXd unidentifiable;
  Eigen::VectorXd singular_values;
};

// Singular values below 1e-9 * sigma_max count as zero.
Observability observability(const hand::HandModel& model, const hand::JointState& state,
                            const std::vector<hand::ContactLocation>& observed);

struct ForceEstimate {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();  // N, palm frame
  double residual = 0.0;                            // |J^T F - tau|, N*m
};

// Ridge least squares for a fingertip point force:
//   min |J_tip^T F - tau|^2 + lambda * s^2 * |F|^2,
// where s is the largest singular value of J_tip, so lambda is dimensionless
// and independent of the length scale. lambda = 0 gives the plain least-squares
// solution and throws SingularConfiguration if J_tip is rank deficient.
ForceEstimate estimate_fingertip_force(const hand::HandModel& model, const hand::JointState& state,
                                       const Eigen::VectorXd& tau, hand::FingerName finger, double lambda = 1e-12);

// Fingertip contact location of a finger (end of its last phalanx).
hand::ContactLocation fingertip(const hand::HandModel& model, hand::FingerName finger);

}  // namespace prx::contact
