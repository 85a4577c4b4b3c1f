#include <random>

#include "doctest.h"
#include "prx/error.hpp"
#include "prx/hand/hand_model.hpp"
#include "support/oracles.hpp"

using namespace prx;
using namespace prx::hand;

namespace {

JointState zeros(const HandModel& m) { return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.dof())), 0}; }

// One finger, one flexion joint, 0.04 m link.
HandModel single_joint_model(double length = 0.04) {
  FingerChain f;
  f.name = FingerName::Index;
  f.proximal_length = length;
  f.distal_length = 0.01;
  JointSpec j;
  j.id = "index.mcp_flexion";
  j.kind = JointKind::McpFlexion;
  j.axis = Eigen::Vector3d::UnitY();
  j.limits = {-1.0, 1.0};
  j.max_speed = 1.0;
  f.joints.push_back(j);
  return HandModel(Variant::Custom, {f});
}

const WorkspaceRow& row(const std::vector<WorkspaceRow>& rows, const std::string& id) {
  for (const auto& r : rows) {
    if (r.joint_id == id) return r;
  }
  FAIL("missing row " << id);
  return rows.front();
}

}  // namespace

TEST_CASE("variant presets have the expected DoF and finger counts") {
  CHECK(load_model(Variant::Dexop12).dof() == 12);
  CHECK(load_model(Variant::Dexop12).fingers().size() == 4);
  CHECK(load_model(Variant::Dexop9).dof() == 9);
  CHECK(load_model(Variant::Dexop9).fingers().size() == 3);
  CHECK(load_model("DEXOP-7").dof() == 7);
  CHECK(load_model("DEXOP-7").fingers().size() == 3);
  CHECK_THROWS_AS(load_model("DEXOP-5"), Error);
  try {
    load_model("DEXOP-5");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownVariant);
  }
}

TEST_CASE("canonical joint order") {
  const auto m = load_model(Variant::Dexop12);
  const std::vector<std::string> expected{
      "thumb.tm_abduction", "thumb.tm_flexion",    "thumb.ip",           "index.mcp_abduction",
      "index.mcp_flexion",  "index.pip",          "middle.mcp_abduction", "middle.mcp_flexion",
      "middle.pip",         "ring.mcp_abduction", "ring.mcp_flexion",   "ring.pip"};
  CHECK(m.joint_ids() == expected);
  const auto m7 = load_model(Variant::Dexop7);
  CHECK(m7.joint_ids() == std::vector<std::string>{"thumb.tm_abduction", "thumb.tm_flexion", "thumb.ip",
                                                   "index.mcp_flexion", "index.pip", "middle.mcp_flexion",
                                                   "middle.pip"});
}

TEST_CASE("default limits and speeds") {
  const auto rows = workspace_report(load_model(Variant::Dexop7));
  CHECK(row(rows, "index.mcp_flexion").range_deg == doctest::Approx(110.0).epsilon(1e-12));
  CHECK(row(rows, "index.pip").range_deg == doctest::Approx(105.0).epsilon(1e-12));
  CHECK(row(rows, "thumb.tm_flexion").range_deg == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(row(rows, "thumb.tm_abduction").range_deg == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(row(rows, "thumb.ip").range_deg == doctest::Approx(65.0).epsilon(1e-12));
  CHECK(row(rows, "index.mcp_flexion").max_speed == 35.0);
  CHECK(row(rows, "index.pip").max_speed == 15.0);
  CHECK(row(rows, "thumb.ip").max_speed == 9.0);
  CHECK(row(rows, "thumb.tm_flexion").max_speed == 17.0);
  CHECK(row(rows, "thumb.tm_abduction").max_speed == 12.0);
  CHECK(row(rows, "index.mcp_flexion").min_deg == 0.0);
  CHECK(row(rows, "thumb.tm_abduction").min_deg == doctest::Approx(-45.0));
}

TEST_CASE("symmetric limits give a range of exactly twice the bound") {
  for (double a : {0.1, 0.5, 1.25}) {
    FingerChain f;
    f.name = FingerName::Middle;
    f.proximal_length = 0.04;
    f.distal_length = 0.03;
    JointSpec j;
    j.id = "middle.mcp_abduction";
    j.kind = JointKind::McpAbduction;
    j.axis = Eigen::Vector3d::UnitZ();
    j.limits = {-a, a};
    j.max_speed = 2.0;
    f.joints.push_back(j);
    const auto rows = workspace_report(HandModel(Variant::Custom, {f}));
    CHECK(rows.at(0).range_deg == rad2deg(2.0 * a));
  }
}

TEST_CASE("overrides change geometry and reject bad values") {
  auto cfg = KeyValueConfig::parse("index.proximal_mm = 50\nlimit.index.pip = 0, 90\nspeed.index.pip = 12\n");
  const auto m = load_model(Variant::Dexop12, &cfg);
  const auto fi = *m.finger_index(FingerName::Index);
  CHECK(m.fingers()[fi].proximal_length == doctest::Approx(0.050));
  const auto pip = *m.joint_index("index.pip");
  CHECK(rad2deg(m.joint(pip).limits.max) == doctest::Approx(90.0));
  CHECK(m.joint(pip).max_speed == 12.0);

  auto bad = KeyValueConfig::parse("index.distal_mm = -3\n");
  try {
    load_model(Variant::Dexop12, &bad);
    FAIL("expected InvalidGeometry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGeometry);
  }
  auto unknown = KeyValueConfig::parse("limit.index.dip = 0, 10\n");
  CHECK_THROWS_AS(load_model(Variant::Dexop12, &unknown), Error);

  FingerChain f;
  f.name = FingerName::Index;
  f.proximal_length = 0.04;
  f.distal_length = 0.03;
  JointSpec j;
  j.id = "index.mcp_flexion";
  j.axis = Eigen::Vector3d(1.0, 1.0, 0.0);
  j.limits = {0.0, 1.0};
  j.max_speed = 1.0;
  f.joints.push_back(j);
  try {
    HandModel(Variant::Custom, {f});
    FAIL("expected InvalidGeometry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGeometry);
  }
}

TEST_CASE("validate_state flags exactly the out-of-limit joints") {
  const auto m = load_model(Variant::Dexop7);
  auto s = zeros(m);
  CHECK(validate_state(m, s).ok());
  const auto pip = *m.joint_index("index.pip");
  s.angles[static_cast<Eigen::Index>(pip)] = deg2rad(106.0);
  const auto before = s.angles;
  const auto report = validate_state(m, s);
  REQUIRE(report.flagged.size() == 1);
  CHECK(report.flagged[0] == pip);
  CHECK_FALSE(report.within_limits[pip]);
  CHECK(s.angles == before);
  s.angles[static_cast<Eigen::Index>(pip)] = deg2rad(105.0);
  CHECK(validate_state(m, s).ok());

  JointState wrong{Eigen::VectorXd::Zero(6), 0};
  try {
    validate_state(m, wrong);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("forward kinematics at the reference pose and at 90 degrees MCP flexion") {
  const auto m = load_model(Variant::Dexop7);
  const auto fi = *m.finger_index(FingerName::Index);
  const auto mcp_frame = m.fingers()[fi].joints[0].offset;
  auto s = zeros(m);
  auto fk = forward_kinematics(m, s);
  Eigen::Vector3d tip = fk[fi].fingertip.translation - mcp_frame.translation;
  CHECK(tip.norm() == doctest::Approx(0.080).epsilon(1e-12));
  CHECK(tip.x() == doctest::Approx(0.080).epsilon(1e-12));

  s.angles[static_cast<Eigen::Index>(*m.joint_index("index.mcp_flexion"))] = deg2rad(90.0);
  fk = forward_kinematics(m, s);
  tip = fk[fi].fingertip.translation - mcp_frame.translation;
  CHECK(tip.norm() == doctest::Approx(0.080).epsilon(1e-12));
  CHECK(std::abs(tip.x()) < 1e-12);
  CHECK(tip.z() == doctest::Approx(-0.080).epsilon(1e-12));  // toward the palm
  for (const auto& f : fk) {
    for (const auto& p : f.joint_frames) CHECK(p.is_rigid());
  }

  try {
    forward_kinematics(m, JointState{Eigen::VectorXd::Zero(12), 0});
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("forward kinematics matches the naive homogeneous-transform chain") {
  std::mt19937_64 rng(7);
  for (auto v : {Variant::Dexop12, Variant::Dexop9, Variant::Dexop7}) {
    auto m = load_model(v);
    // Non-trivial palm placement.
    const Pose palm = Pose::from_translation({0.1, -0.2, 0.3}) *
                      Pose::from_axis_angle(Eigen::Vector3d(1, 2, 3).normalized(), 0.7);
    m = HandModel(m.variant(), m.fingers(), palm);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::VectorXd q = oracle::random_in_limits(m, rng);
      const auto fk = forward_kinematics(m, {q, 0});
      for (std::size_t f = 0; f < m.fingers().size(); ++f) {
        const Eigen::Vector3d expected = oracle::fingertip_world(m, q, f);
        CHECK((fk[f].fingertip.translation - expected).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("forward kinematics is deterministic and chain-local") {
  const auto m = load_model(Variant::Dexop12);
  std::mt19937_64 rng(11);
  const Eigen::VectorXd q = oracle::random_in_limits(m, rng);
  const auto a = forward_kinematics(m, {q, 0});
  const auto b = forward_kinematics(m, {q, 0});
  for (std::size_t f = 0; f < a.size(); ++f) {
    CHECK(a[f].fingertip.translation == b[f].fingertip.translation);
    CHECK(a[f].fingertip.rotation == b[f].fingertip.rotation);
  }
  for (std::size_t joint = 0; joint < m.dof(); ++joint) {
    Eigen::VectorXd qp = q;
    qp[static_cast<Eigen::Index>(joint)] += 0.05;
    const auto c = forward_kinematics(m, {qp, 0});
    for (std::size_t f = 0; f < m.fingers().size(); ++f) {
      const std::size_t off = m.joint_offset(f);
      for (std::size_t j = 0; j < m.fingers()[f].joints.size(); ++j) {
        const bool same_finger = joint >= off && joint < off + m.fingers()[f].joints.size();
        const bool upstream = !same_finger || off + j < joint;
        if (upstream) {
          CHECK(c[f].joint_frames[j].translation == a[f].joint_frames[j].translation);
          CHECK(c[f].joint_frames[j].rotation == a[f].joint_frames[j].rotation);
        }
      }
    }
  }
}

TEST_CASE("single revolute joint Jacobian has norm equal to the lever arm") {
  const auto m = single_joint_model(0.04);
  const JointState s{Eigen::VectorXd::Constant(1, 0.3), 0};
  const auto j = contact_jacobian(m, s, {FingerName::Index, Phalanx::Proximal, {0.04, 0.0, 0.0}});
  REQUIRE(j.cols() == 1);
  CHECK(j.col(0).norm() == doctest::Approx(0.04).epsilon(1e-12));
  // No distal phalanx on a one-joint finger.
  CHECK_THROWS_AS(contact_jacobian(m, s, {FingerName::Index, Phalanx::Distal, {0.01, 0.0, 0.0}}), Error);
}

TEST_CASE("contact Jacobian column structure") {
  const auto m = load_model(Variant::Dexop12);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const JointState s{oracle::random_in_limits(m, rng), 0};
    for (std::size_t f = 0; f < m.fingers().size(); ++f) {
      const auto& chain = m.fingers()[f];
      const std::size_t off = m.joint_offset(f);
      for (auto ph : {Phalanx::Proximal, Phalanx::Distal}) {
        const auto j = contact_jacobian(m, s, {chain.name, ph, {0.02, 0.003, -0.004}});
        const std::size_t last = ph == Phalanx::Proximal ? chain.proximal_joint() : chain.joints.size() - 1;
        for (Eigen::Index c = 0; c < j.cols(); ++c) {
          const auto cu = static_cast<std::size_t>(c);
          const bool moves = cu >= off && cu <= off + last;
          if (!moves) CHECK(j.col(c).isZero(0.0));
        }
      }
    }
  }
  const auto m9 = load_model(Variant::Dexop9);
  try {
    contact_jacobian(m9, zeros(m9), {FingerName::Ring, Phalanx::Distal, {0.01, 0, 0}});
    FAIL("expected UnknownPhalanx");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownPhalanx);
  }
}

TEST_CASE("contact Jacobian matches central finite differences over 1000 states") {
  const auto m = load_model(Variant::Dexop12);
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::VectorXd q = oracle::random_in_limits(m, rng);
    const std::size_t f = static_cast<std::size_t>(trial) % m.fingers().size();
    const auto& chain = m.fingers()[f];
    const Phalanx ph = trial % 2 ? Phalanx::Proximal : Phalanx::Distal;
    const std::size_t last = ph == Phalanx::Proximal ? chain.proximal_joint() : chain.joints.size() - 1;
    const Eigen::Vector3d point(0.8 * (ph == Phalanx::Proximal ? chain.proximal_length : chain.distal_length),
                                0.002, -0.006);
    const auto j = contact_jacobian(m, {q, 0}, {chain.name, ph, point});
    const auto fd = oracle::finite_difference_jacobian(
        [&](const Eigen::VectorXd& x) { return oracle::point_on_chain(m, x, f, last, point); }, q);
    const double scale = fd.cwiseAbs().maxCoeff();
    worst = std::max(worst, (j - fd).cwiseAbs().maxCoeff() / scale);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("6-row Jacobian extends the linear rows with joint axes") {
  const auto m = load_model(Variant::Dexop12);
  std::mt19937_64 rng(5);
  const JointState s{oracle::random_in_limits(m, rng), 0};
  const ContactLocation c{FingerName::Thumb, Phalanx::Distal, {0.03, 0.0, 0.0}};
  const auto j6 = contact_jacobian_6d(m, s, c);
  CHECK(j6.rows() == 6);
  CHECK((j6.topRows(3) - contact_jacobian(m, s, c)).isZero(0.0));
  for (Eigen::Index col = 0; col < 3; ++col) CHECK(j6.block<3, 1>(3, col).norm() == doctest::Approx(1.0));
}
