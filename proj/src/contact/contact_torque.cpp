#include "prx/contact/contact_torque.hpp"

#include <cmath>

#include "prx/error.hpp"

namespace prx::contact {
namespace {

constexpr double kRankTolerance = 1e-9;

int numeric_rank(const Eigen::VectorXd& sv) {
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > kRankTolerance * sv[0]) ++r;
  }
  return r;
}

void check_contact(const ContactWrench& c, const ContactLimits& limits) {
  if (!c.point.allFinite() || !c.force.allFinite()) {
    throw Error(ErrorCode::InvalidContact, "non-finite contact on " + std::string(hand::to_string(c.finger)));
  }
  if (c.force.norm() > limits.max_force) {
    throw Error(ErrorCode::InvalidContact, "force " + std::to_string(c.force.norm()) + " N exceeds " +
                                               std::to_string(limits.max_force) + " N");
  }
}

Eigen::MatrixXd stack(const hand::HandModel& model, const hand::JointState& state,
                      const std::vector<hand::ContactLocation>& contacts) {
  Eigen::MatrixXd j(3 * static_cast<Eigen::Index>(contacts.size()), static_cast<Eigen::Index>(model.dof()));
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    j.middleRows(3 * static_cast<Eigen::Index>(i), 3) = hand::contact_jacobian(model, state, contacts[i]);
  }
  return j;
}

void require_dimensions(const hand::HandModel& model, const hand::JointState& state) {
  if (static_cast<std::size_t>(state.angles.size()) != model.dof()) {
    throw Error(ErrorCode::DimensionMismatch, "state has " + std::to_string(state.angles.size()) +
                                                  " angles, model has " + std::to_string(model.dof()) + " DoF");
  }
}

}  // namespace

hand::ContactLocation fingertip(const hand::HandModel& model, hand::FingerName finger) {
  const auto fi = model.finger_index(finger);
  if (!fi) throw Error(ErrorCode::UnknownPhalanx, std::string(hand::to_string(finger)) + " is not part of the model");
  const auto& chain = model.fingers()[*fi];
  if (chain.distal_joint()) return {finger, hand::Phalanx::Distal, {chain.distal_length, 0.0, 0.0}};
  return {finger, hand::Phalanx::Proximal, {chain.proximal_length, 0.0, 0.0}};
}

TorqueEstimate joint_torques(const hand::HandModel& model, const hand::JointState& state,
                             const std::vector<ContactWrench>& contacts, const ContactLimits& limits) {
  require_dimensions(model, state);
  TorqueEstimate out;
  out.torques = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dof()));
  std::vector<hand::ContactLocation> locations;
  locations.reserve(contacts.size());
  for (const auto& c : contacts) {
    check_contact(c, limits);
    const Eigen::MatrixXd j = hand::contact_jacobian(model, state, c.location());
    out.torques += j.transpose() * c.force;
    locations.push_back(c.location());
  }
  const auto obs = observability(model, state, locations);
  out.rank = obs.rank;
  out.nullspace_dim = obs.nullspace_dim;
  return out;
}

Observability observability(const hand::HandModel& model, const hand::JointState& state,
                            const std::vector<hand::ContactLocation>& observed) {
  require_dimensions(model, state);
  const auto dof = static_cast<Eigen::Index>(model.dof());
  Observability out;
  if (observed.empty()) {
    out.nullspace_dim = static_cast<int>(dof);
    out.unidentifiable = Eigen::MatrixXd::Identity(dof, dof);
    return out;
  }
  const Eigen::MatrixXd j = stack(model, state, observed);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullV);
  out.singular_values = svd.singularValues();
  out.rank = numeric_rank(out.singular_values);
  out.nullspace_dim = static_cast<int>(dof) - out.rank;
  out.unidentifiable = svd.matrixV().rightCols(out.nullspace_dim);
  return out;
}

ForceEstimate estimate_fingertip_force(const hand::HandModel& model, const hand::JointState& state,
                                       const Eigen::VectorXd& tau, hand::FingerName finger, double lambda) {
  require_dimensions(model, state);
  if (tau.size() != static_cast<Eigen::Index>(model.dof())) {
    throw Error(ErrorCode::DimensionMismatch, "torque vector has " + std::to_string(tau.size()) + " entries");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  const Eigen::MatrixXd j = hand::contact_jacobian(model, state, fingertip(model, finger));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  ForceEstimate out;
  if (sv.size() == 0 || sv[0] == 0.0) {
    if (lambda == 0.0) throw Error(ErrorCode::SingularConfiguration, "fingertip Jacobian is zero");
    out.residual = tau.norm();
    return out;
  }
  const int rank = numeric_rank(sv);
  if (lambda == 0.0 && rank < 3) {
    throw Error(ErrorCode::SingularConfiguration, "fingertip Jacobian has rank " + std::to_string(rank));
  }
  // F = U diag(s / (s^2 + mu)) V^T tau with mu = lambda * s_max^2.
  const double mu = lambda * sv[0] * sv[0];
  const Eigen::VectorXd vt_tau = svd.matrixV().leftCols(sv.size()).transpose() * tau;
  Eigen::VectorXd scaled(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double s = sv[i];
    scaled[i] = (lambda == 0.0 || s > 0.0) && (s * s + mu) > 0.0 ? s / (s * s + mu) * vt_tau[i] : 0.0;
  }
  out.force = svd.matrixU().leftCols(sv.size()) * scaled;
  out.residual = (j.transpose() * out.force - tau).norm();
  return out;
}

}  // namespace prx::contact
