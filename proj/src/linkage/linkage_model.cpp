#include "prx/linkage/linkage_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "prx/error.hpp"

namespace prx::linkage {
namespace {

using hand::FingerName;
using hand::JointKind;

constexpr double kMaxStep = 0.01;  // rad, continuation substep

double midrange(const hand::JointLimits& l) { return 0.5 * (l.min + l.max); }

double parse_number(const std::string& key, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidConfig, key + ": bad number '" + field + "'");
  }
  return v;
}

struct StageOverride {
  StageKind kind = StageKind::Coaxial;
  std::optional<FourBarGeometry> geometry;
};

std::optional<StageOverride> read_override(const KeyValueConfig* cfg, const std::string& joint_id) {
  if (!cfg) return std::nullopt;
  const std::string key = "stage." + joint_id;
  const auto raw = cfg->get(key);
  if (!raw) return std::nullopt;
  const auto fields = split_csv_fields(*raw);
  if (fields.empty()) throw Error(ErrorCode::InvalidConfig, key + ": empty value");
  const auto kind = parse_stage_kind(fields[0]);
  if (!kind) throw Error(ErrorCode::InvalidConfig, key + ": unknown stage kind '" + fields[0] + "'");
  StageOverride out;
  out.kind = *kind;
  if (*kind == StageKind::Coaxial) {
    if (fields.size() != 1) throw Error(ErrorCode::InvalidConfig, key + ": coaxial stage takes no geometry");
    return out;
  }
  if (fields.size() != 7 && fields.size() != 8) {
    throw Error(ErrorCode::InvalidConfig, key + ": expected kind, g, a, b, c (mm), in/out offsets (deg)[, branch]");
  }
  FourBarGeometry g;
  g.ground = parse_number(key, fields[1]) / 1000.0;
  g.input = parse_number(key, fields[2]) / 1000.0;
  g.coupler = parse_number(key, fields[3]) / 1000.0;
  g.output = parse_number(key, fields[4]) / 1000.0;
  g.input_offset = hand::deg2rad(parse_number(key, fields[5]));
  g.output_offset = hand::deg2rad(parse_number(key, fields[6]));
  if (fields.size() == 8) {
    const auto b = parse_branch(fields[7]);
    if (!b) throw Error(ErrorCode::InvalidConfig, key + ": branch must be open or crossed");
    g.branch = *b;
  }
  out.geometry = g;
  return out;
}

bool is_abduction(JointKind k) { return k == JointKind::McpAbduction || k == JointKind::TmAbduction; }
bool is_stage1(JointKind k) { return k == JointKind::McpFlexion || k == JointKind::TmFlexion; }

// Link angles of one evaluated stage, used by chained stages downstream.
struct Evaluated {
  double theta = 0.0;
  double phi = 0.0;
  double gamma = 0.0;
};

double chained_input(const Evaluated& ground, double q, const FourBarGeometry& g) {
  return ground.theta + q + g.input_offset - ground.gamma;
}

double chained_output(const Evaluated& ground, double phi2, const FourBarGeometry& g) {
  return phi2 + ground.gamma - g.output_offset - ground.phi;
}

std::string stage_error(const CouplingStage& s, const Error& e) {
  return "stage " + s.id + ": " + e.what();
}

}  // namespace

std::string_view to_string(StageKind k) {
  switch (k) {
    case StageKind::FourBar: return "four-bar";
    case StageKind::Coaxial: return "coaxial";
    case StageKind::ChainedStage2: return "chained";
  }
  return "?";
}

std::optional<StageKind> parse_stage_kind(std::string_view s) {
  if (s == "four-bar" || s == "fourbar") return StageKind::FourBar;
  if (s == "coaxial") return StageKind::Coaxial;
  if (s == "chained" || s == "chained-four-bar-stage2") return StageKind::ChainedStage2;
  return std::nullopt;
}

double coupler_angle(const FourBarGeometry& g, double theta, double phi) {
  const double ax = g.input * std::cos(theta);
  const double ay = g.input * std::sin(theta);
  const double bx = g.ground + g.output * std::cos(phi);
  const double by = g.output * std::sin(phi);
  return std::atan2(by - ay, bx - ax);
}

LinkageModel::LinkageModel(const hand::HandModel& hand, std::vector<FingerLinkage> fingers, double standoff)
    : fingers_(std::move(fingers)), standoff_(standoff), dof_(hand.dof()) {
  if (!(standoff_ > 0.0)) throw Error(ErrorCode::InvalidGeometry, "standoff must be positive");
  std::set<std::size_t> sources;
  std::set<std::size_t> targets;
  for (const auto& f : fingers_) {
    for (std::size_t i = 0; i < f.stages.size(); ++i) {
      const auto& s = f.stages[i];
      if (s.source >= dof_ || s.target >= dof_) {
        throw Error(ErrorCode::DimensionMismatch, "stage " + s.id + " references a joint outside the hand");
      }
      if (!sources.insert(s.source).second || !targets.insert(s.target).second) {
        throw Error(ErrorCode::InvalidGeometry, "stage " + s.id + " maps a joint already in use");
      }
      if (hand.joint(s.target).kind == JointKind::TmAbduction && s.kind != StageKind::Coaxial) {
        throw Error(ErrorCode::InvalidGeometry, "thumb abduction must be coaxial");
      }
      if (s.kind == StageKind::Coaxial) continue;
      const auto& g = s.geometry;
      if (!(g.ground > 0.0 && g.input > 0.0 && g.coupler > 0.0 && g.output > 0.0)) {
        throw Error(ErrorCode::InvalidGeometry, "stage " + s.id + ": link lengths must be positive");
      }
      if (s.kind == StageKind::ChainedStage2) {
        if (!s.ground_stage || *s.ground_stage >= i || f.stages[*s.ground_stage].kind != StageKind::FourBar) {
          throw Error(ErrorCode::InvalidGeometry, "stage " + s.id + ": chained stage needs a preceding four-bar");
        }
        const double b1 = f.stages[*s.ground_stage].geometry.coupler;
        if (std::abs(g.ground - b1) > 1e-12 * std::max(b1, g.ground)) {
          throw Error(ErrorCode::InvalidGeometry, "stage " + s.id + ": ground must equal the stage-1 coupler");
        }
      }
    }
  }
  if (sources.size() != dof_ || targets.size() != dof_) {
    throw Error(ErrorCode::DimensionMismatch, "linkage covers " + std::to_string(sources.size()) + " of " +
                                                  std::to_string(dof_) + " joints");
  }
  // Every four-bar must close at the reference pose.
  LinkageContext ctx;
  hand::JointState zero;
  zero.angles = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof_));
  exo_to_hand(*this, zero, ctx);
}

std::size_t LinkageModel::stage_count() const {
  std::size_t n = 0;
  for (const auto& f : fingers_) n += f.stages.size();
  return n;
}

LinkageModel default_linkage(const hand::HandModel& hand, const KeyValueConfig* overrides, LinkageDefaults d) {
  if (overrides) {
    if (auto v = overrides->get_double("standoff_mm")) d.standoff = *v / 1000.0;
    if (auto v = overrides->get_double("short_axis_mm")) d.short_axis = *v / 1000.0;
  }
  if (!(d.standoff > 0.0) || !(d.short_axis > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "standoff and short axis must be positive");
  }
  std::vector<FingerLinkage> fingers;
  for (std::size_t fi = 0; fi < hand.fingers().size(); ++fi) {
    const auto& chain = hand.fingers()[fi];
    FingerLinkage fl;
    fl.finger = chain.name;
    std::optional<std::size_t> stage1;
    for (std::size_t j = 0; j < chain.joints.size(); ++j) {
      const auto& spec = chain.joints[j];
      CouplingStage s;
      s.id = spec.id;
      s.source = hand.joint_offset(fi) + j;
      s.target = s.source;
      if (is_abduction(spec.kind)) {
        s.kind = StageKind::Coaxial;
      } else if (is_stage1(spec.kind)) {
        s.kind = StageKind::FourBar;
        const double off = hand::kPi / 2.0 - midrange(spec.limits);
        s.geometry = {d.standoff, chain.proximal_length, d.standoff, chain.proximal_length, off, off, Branch::Open};
      } else {
        s.kind = StageKind::ChainedStage2;
        const double off = -midrange(spec.limits);
        s.geometry = {d.standoff, d.short_axis, d.standoff, d.short_axis, off, off, Branch::Open};
      }
      if (auto o = read_override(overrides, spec.id)) {
        s.kind = o->kind;
        if (o->geometry) s.geometry = *o->geometry;
      }
      if (s.kind == StageKind::FourBar) {
        stage1 = fl.stages.size();
        if (!(overrides && overrides->contains("stage." + spec.id))) {
          s.geometry.branch = branch_of(s.geometry, s.geometry.input_offset, s.geometry.input_offset);
        }
      } else if (s.kind == StageKind::ChainedStage2) {
        s.ground_stage = stage1;
        if (!(overrides && overrides->contains("stage." + spec.id)) && stage1) {
          // Default stage 2: parallelogram on the stage-1 coupler, mode taken
          // from its reference pose (identity transmission).
          const auto& g1 = fl.stages[*stage1].geometry;
          s.geometry.ground = g1.coupler;
          s.geometry.coupler = g1.coupler;
          const double phi1 = solve_fourbar(g1, g1.input_offset, g1.branch);
          Evaluated e1{g1.input_offset, phi1, coupler_angle(g1, g1.input_offset, phi1)};
          const double theta2 = chained_input(e1, 0.0, s.geometry);
          s.geometry.branch = branch_of(s.geometry, theta2, theta2);
        }
      }
      fl.stages.push_back(std::move(s));
    }
    fingers.push_back(std::move(fl));
  }
  return LinkageModel(hand, std::move(fingers), d.standoff);
}

hand::JointState exo_to_hand(const LinkageModel& linkage, const hand::JointState& exo, LinkageContext& ctx) {
  const auto dof = static_cast<Eigen::Index>(linkage.dof());
  if (exo.angles.size() != dof) {
    throw Error(ErrorCode::DimensionMismatch, "exoskeleton state has " + std::to_string(exo.angles.size()) +
                                                  " joints, linkage expects " + std::to_string(dof));
  }
  if (!exo.angles.allFinite()) throw Error(ErrorCode::InvalidArgument, "exoskeleton state is not finite");

  hand::JointState out;
  out.timestamp_ns = exo.timestamp_ns;
  out.angles = Eigen::VectorXd::Zero(dof);

  // One pass over all stages at exoskeleton state q. `fresh` selects the
  // declared branches (reference pose) instead of continuation.
  auto evaluate = [&](const Eigen::VectorXd& q, bool fresh) {
    std::size_t flat = 0;
    for (const auto& f : linkage.fingers()) {
      std::vector<Evaluated> done(f.stages.size());
      for (std::size_t i = 0; i < f.stages.size(); ++i, ++flat) {
        const auto& s = f.stages[i];
        auto& st = ctx.stages_[flat];
        const double qs = q[static_cast<Eigen::Index>(s.source)];
        if (s.kind == StageKind::Coaxial) {
          out.angles[static_cast<Eigen::Index>(s.target)] = qs;
          continue;
        }
        const double theta = s.kind == StageKind::FourBar ? qs + s.geometry.input_offset
                                                          : chained_input(done[*s.ground_stage], qs, s.geometry);
        double phi = 0.0;
        try {
          phi = fresh ? solve_fourbar(s.geometry, theta, s.geometry.branch)
                      : continue_root(s.geometry, st.theta, st.phi, st.slope, theta, 0.5);
        } catch (const Error& e) {
          throw Error(e.code(), stage_error(s, e));
        }
        try {
          st.slope = transmission_ratio(s.geometry, theta, phi);
        } catch (const Error&) {
          if (fresh) st.slope = 0.0;
        }
        st.theta = theta;
        st.phi = phi;
        done[i] = {theta, phi, coupler_angle(s.geometry, theta, phi)};
        out.angles[static_cast<Eigen::Index>(s.target)] =
            s.kind == StageKind::FourBar ? phi - s.geometry.output_offset
                                         : chained_output(done[*s.ground_stage], phi, s.geometry);
      }
    }
  };

  if (!ctx.initialized_) {
    ctx.stages_.assign(linkage.stage_count(), {});
    ctx.exo_ = Eigen::VectorXd::Zero(dof);
    evaluate(ctx.exo_, true);
    ctx.initialized_ = true;
  } else if (ctx.exo_.size() != dof || ctx.stages_.size() != linkage.stage_count()) {
    throw Error(ErrorCode::DimensionMismatch, "linkage context belongs to a different linkage");
  }

  const Eigen::VectorXd start = ctx.exo_;
  const Eigen::VectorXd delta = exo.angles - start;
  const double largest = delta.size() ? delta.cwiseAbs().maxCoeff() : 0.0;
  const auto steps = std::max<long>(1, static_cast<long>(std::ceil(largest / kMaxStep)));
  for (long k = 1; k <= steps; ++k) {
    const Eigen::VectorXd q =
        k == steps ? exo.angles : Eigen::VectorXd(start + delta * (static_cast<double>(k) / static_cast<double>(steps)));
    evaluate(q, false);
  }
  ctx.exo_ = exo.angles;
  return out;
}

hand::JointState exo_to_hand(const LinkageModel& linkage, const hand::JointState& exo) {
  LinkageContext ctx;
  return exo_to_hand(linkage, exo, ctx);
}

}  // namespace prx::linkage
