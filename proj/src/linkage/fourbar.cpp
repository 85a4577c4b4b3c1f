#include "prx/linkage/fourbar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "prx/error.hpp"

namespace prx::linkage {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSingularSin = 1e-6;

// Wrap to (-pi, pi].
double wrap(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

// Wrap to [0, 2pi).
double wrap_positive(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

void require_positive(const FourBarGeometry& g) {
  if (!(g.ground > 0.0 && g.input > 0.0 && g.coupler > 0.0 && g.output > 0.0)) {
    throw Error(ErrorCode::InvalidGeometry, "four-bar link lengths must be positive");
  }
}

struct Vec2 {
  double x;
  double y;
};

Vec2 input_tip(const FourBarGeometry& g, double theta) { return {g.input * std::cos(theta), g.input * std::sin(theta)}; }
Vec2 output_tip(const FourBarGeometry& g, double phi) {
  return {g.ground + g.output * std::cos(phi), g.output * std::sin(phi)};
}

std::string describe(const FourBarGeometry& g, double theta) {
  std::ostringstream os;
  os << "g=" << g.ground << " a=" << g.input << " b=" << g.coupler << " c=" << g.output << " theta=" << theta;
  return os.str();
}

// Unwrap `angle` to the representative nearest `reference`.
double unwrap_near(double angle, double reference) { return reference + wrap(angle - reference); }

}  // namespace

std::string_view to_string(Branch b) { return b == Branch::Open ? "open" : "crossed"; }

std::optional<Branch> parse_branch(std::string_view s) {
  if (s == "open") return Branch::Open;
  if (s == "crossed") return Branch::Crossed;
  return std::nullopt;
}

std::string_view to_string(GrashofClass c) {
  switch (c) {
    case GrashofClass::CrankRocker: return "crank-rocker";
    case GrashofClass::RockerCrank: return "rocker-crank";
    case GrashofClass::DoubleCrank: return "double-crank";
    case GrashofClass::DoubleRocker: return "double-rocker";
    case GrashofClass::ChangePoint: return "change-point";
    case GrashofClass::NonGrashof: return "non-Grashof";
  }
  return "?";
}

bool AngleInterval::contains(double theta) const {
  return wrap_positive(theta - start) <= width + 1e-12;
}

bool AngleRange::full() const {
  return intervals.size() == 1 && intervals.front().width >= kTwoPi;
}

bool AngleRange::contains(double theta) const {
  return std::any_of(intervals.begin(), intervals.end(), [&](const AngleInterval& i) { return i.contains(theta); });
}

AngleRange assemblable_range(const FourBarGeometry& g) {
  AngleRange range;
  if (!(g.ground > 0.0 && g.input > 0.0 && g.coupler > 0.0 && g.output > 0.0)) return range;
  // |O4 - A|^2 = g^2 + a^2 - 2 g a cos(theta) must lie in [(b - c)^2, (b + c)^2].
  const double denom = 2.0 * g.ground * g.input;
  const double base = g.ground * g.ground + g.input * g.input;
  const double lo_raw = (base - (g.coupler + g.output) * (g.coupler + g.output)) / denom;
  const double hi_raw = (base - (g.coupler - g.output) * (g.coupler - g.output)) / denom;
  // Change-point linkages close exactly at the folded poses; keep rounding
  // in the lengths from cutting those poses out of the range.
  double lo = lo_raw <= -1.0 + 1e-12 ? -1.0 : lo_raw;
  double hi = hi_raw >= 1.0 - 1e-12 ? 1.0 : hi_raw;
  if (lo > 1.0 || hi < -1.0 || lo > hi) return range;
  if (lo <= -1.0 && hi >= 1.0) {
    range.intervals.push_back({-kPi, kTwoPi});
  } else if (hi >= 1.0) {
    const double t = std::acos(lo);  // cos(theta) >= lo
    range.intervals.push_back({-t, 2.0 * t});
  } else if (lo <= -1.0) {
    const double t = std::acos(hi);  // cos(theta) <= hi
    range.intervals.push_back({t, kTwoPi - 2.0 * t});
  } else {
    const double t_hi = std::acos(hi);
    const double t_lo = std::acos(lo);
    range.intervals.push_back({t_hi, t_lo - t_hi});
    range.intervals.push_back({-t_lo, t_lo - t_hi});
  }
  return range;
}

GrashofReport grashof_check(const FourBarGeometry& g) {
  GrashofReport report;
  report.assemblable = assemblable_range(g);
  if (!(g.ground > 0.0 && g.input > 0.0 && g.coupler > 0.0 && g.output > 0.0)) return report;

  std::array<double, 4> sorted{g.ground, g.input, g.coupler, g.output};
  std::sort(sorted.begin(), sorted.end());
  const double s = sorted[0];
  const double p = sorted[1];
  const double q = sorted[2];
  const double l = sorted[3];
  const double tol = 1e-12 * l;
  if (l >= s + p + q || report.assemblable.empty()) {
    report.classification = GrashofClass::NonGrashof;
    report.assemblable.intervals.clear();
    return report;
  }
  const double lhs = s + l;
  const double rhs = p + q;
  if (std::abs(lhs - rhs) <= tol) {
    report.classification = GrashofClass::ChangePoint;
  } else if (lhs > rhs) {
    report.classification = GrashofClass::NonGrashof;
  } else if (g.ground == s) {
    report.classification = GrashofClass::DoubleCrank;
  } else if (g.input == s) {
    report.classification = GrashofClass::CrankRocker;
  } else if (g.output == s) {
    report.classification = GrashofClass::RockerCrank;
  } else {
    report.classification = GrashofClass::DoubleRocker;
  }
  return report;
}

double closure_residual(const FourBarGeometry& g, double theta, double phi) {
  const Vec2 a = input_tip(g, theta);
  const Vec2 b = output_tip(g, phi);
  return std::hypot(b.x - a.x, b.y - a.y) - g.coupler;
}

Branch branch_of(const FourBarGeometry& g, double theta, double phi) {
  const Vec2 a = input_tip(g, theta);
  const Vec2 b = output_tip(g, phi);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double ox = b.x - g.ground;
  const double oy = b.y;
  return dx * oy - dy * ox >= 0.0 ? Branch::Open : Branch::Crossed;
}

ClosureRoots closure_roots(const FourBarGeometry& g, double theta) {
  require_positive(g);
  // Closure written as K1 cos(phi) + K2 sin(phi) = K3.
  const double k1 = 2.0 * g.output * (g.ground - g.input * std::cos(theta));
  const double k2 = -2.0 * g.input * g.output * std::sin(theta);
  const double k3 = g.coupler * g.coupler - g.ground * g.ground - g.output * g.output - g.input * g.input +
                    2.0 * g.ground * g.input * std::cos(theta);
  const double r = std::hypot(k1, k2);
  if (r == 0.0) throw Error(ErrorCode::NotAssemblable, "degenerate closure at " + describe(g, theta));
  double ratio = k3 / r;
  if (std::abs(ratio) > 1.0 + 1e-12) throw Error(ErrorCode::NotAssemblable, describe(g, theta));

  ClosureRoots roots;
  const double psi = std::atan2(k2, k1);
  // At a branch point the double root is ill-conditioned; snap rounding noise.
  constexpr double kSnap = 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
  if (ratio >= kSnap || ratio <= -kSnap) {
    const double delta = ratio > 0.0 ? 0.0 : kPi;
    roots.phi[0] = wrap(psi + delta);
    roots.count = 1;
    return roots;
  }
  const double delta = std::acos(ratio);
  roots.phi[0] = wrap(psi + delta);
  roots.phi[1] = wrap(psi - delta);
  roots.count = 2;
  return roots;
}

double solve_fourbar(const FourBarGeometry& g, double theta, const BranchHint& hint, const SolveOptions& options) {
  const ClosureRoots roots = closure_roots(g, theta);
  if (const auto* declared = std::get_if<Branch>(&hint)) {
    if (roots.count == 1) return roots.phi[0];
    return branch_of(g, theta, roots.phi[0]) == *declared ? roots.phi[0] : roots.phi[1];
  }
  const double previous = std::get<PreviousOutput>(hint).phi;
  double best = unwrap_near(roots.phi[0], previous);
  for (int i = 1; i < roots.count; ++i) {
    const double candidate = unwrap_near(roots.phi[i], previous);
    if (std::abs(candidate - previous) < std::abs(best - previous)) best = candidate;
  }
  if (std::abs(best - previous) > options.continuity_threshold) {
    throw Error(ErrorCode::BranchJump, describe(g, theta) + ": nearest root is " +
                                           std::to_string(std::abs(best - previous)) + " rad from the hint");
  }
  return best;
}

double transmission_angle(const FourBarGeometry& g, double theta, double phi) {
  const Vec2 a = input_tip(g, theta);
  const Vec2 b = output_tip(g, phi);
  // Angle at B between the coupler (toward A) and the output link (toward O4).
  const double ux = a.x - b.x;
  const double uy = a.y - b.y;
  const double vx = g.ground - b.x;
  const double vy = -b.y;
  return std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy);
}

double transmission_ratio(const FourBarGeometry& g, double theta, double phi) {
  require_positive(g);
  const Vec2 a = input_tip(g, theta);
  const Vec2 b = output_tip(g, phi);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  // F = |B - A|^2 - b^2; dphi/dtheta = -F_theta / F_phi.
  const double f_theta_half = -(dx * (-g.input * std::sin(theta)) + dy * (g.input * std::cos(theta)));
  const double f_phi_half = dx * (-g.output * std::sin(phi)) + dy * (g.output * std::cos(phi));
  const double len = std::hypot(dx, dy);
  if (std::abs(f_phi_half) <= kSingularSin * len * g.output) {
    throw Error(ErrorCode::SingularConfiguration,
                describe(g, theta) + ": transmission angle degenerate (coupler aligned with output link)");
  }
  return -f_theta_half / f_phi_half;
}

double mechanical_advantage(const FourBarGeometry& g, double theta) {
  const double phi = solve_fourbar(g, theta, g.branch);
  return transmission_ratio(g, theta, phi);
}

FourBarGeometry inverted(const FourBarGeometry& g) {
  FourBarGeometry inv = g;
  inv.input = g.output;
  inv.output = g.input;
  // Carry the reference pose and its assembly mode across the mirror.
  const double theta_ref = g.input_offset;
  try {
    const double phi_ref = solve_fourbar(g, theta_ref, g.branch);
    inv.input_offset = kPi - phi_ref;
    inv.output_offset = kPi - theta_ref;
    inv.branch = branch_of(inv, inv.input_offset, inv.output_offset);
  } catch (const Error&) {
    inv.input_offset = g.output_offset;
    inv.output_offset = g.input_offset;
  }
  return inv;
}

double continue_root(const FourBarGeometry& g, double theta_prev, double phi_prev, double slope, double theta,
                     double continuity_threshold) {
  const double predicted = phi_prev + slope * (theta - theta_prev);
  const ClosureRoots roots = closure_roots(g, theta);
  double best = unwrap_near(roots.phi[0], predicted);
  for (int i = 1; i < roots.count; ++i) {
    const double candidate = unwrap_near(roots.phi[i], predicted);
    if (std::abs(candidate - predicted) < std::abs(best - predicted)) best = candidate;
  }
  if (std::abs(best - predicted) > continuity_threshold) {
    throw Error(ErrorCode::BranchJump, describe(g, theta) + ": no root within " +
                                           std::to_string(continuity_threshold) + " rad of the continuation");
  }
  return best;
}

FourBarTracker::FourBarTracker(FourBarGeometry geom, double reference_input, SolveOptions options, double max_step)
    : geom_(geom), options_(options), max_step_(max_step), theta_(reference_input) {
  if (!(max_step_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "tracker step must be positive");
  phi_ = solve_fourbar(geom_, theta_, geom_.branch, options_);
  try {
    slope_ = transmission_ratio(geom_, theta_, phi_);
  } catch (const Error&) {
    slope_ = 0.0;
  }
}

void FourBarTracker::step_to(double theta) {
  const double phi = continue_root(geom_, theta_, phi_, slope_, theta, options_.continuity_threshold);
  try {
    slope_ = transmission_ratio(geom_, theta, phi);
  } catch (const Error&) {
    // Keep the last finite slope through a branch point.
  }
  theta_ = theta;
  phi_ = phi;
}

double FourBarTracker::solve(double theta) {
  const double start = theta_;
  const double span = theta - start;
  const auto steps = std::max<long>(1, static_cast<long>(std::ceil(std::abs(span) / max_step_)));
  for (long i = 1; i <= steps; ++i) {
    step_to(i == steps ? theta : start + span * static_cast<double>(i) / static_cast<double>(steps));
  }
  return phi_;
}

}  // namespace prx::linkage
