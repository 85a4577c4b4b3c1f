#pragma once

#include <Eigen/Dense>

namespace prx::hand {

// Rigid transform: rotation (orthonormal, det +1) and translation in meters.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) {
    Pose p;
    p.translation = t;
    return p;
  }
  static Pose from_rotation(const Eigen::Matrix3d& r) {
    Pose p;
    p.rotation = r;
    return p;
  }
  // Rotation of `angle` radians about the unit `axis` (Rodrigues).
  static Pose from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    return from_rotation(Eigen::AngleAxisd(angle, axis).toRotationMatrix());
  }

  Pose operator*(const Pose& child) const {
    Pose out;
    out.rotation = rotation * child.rotation;
    out.translation = rotation * child.translation + translation;
    return out;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& point) const { return rotation * point + translation; }

  Pose inverse() const {
    Pose out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  bool is_rigid(double tol = 1e-9) const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

}  // namespace prx::hand
