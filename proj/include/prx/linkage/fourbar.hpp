#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace prx::linkage {

// Planar four-bar. Ground pivots at O2 = (0, 0) (input side) and
// O4 = (ground, 0) (output side). The input link tip is at
// A = input * (cos theta, sin theta); the output link tip at
// B = O4 + output * (cos phi, sin phi); the coupler joins A and B.
// theta and phi are link angles measured from the ground line.
//
// Assembly mode: a configuration is Open when the signed transmission term
// (B - A) x (B - O4) is non-negative, Crossed otherwise. The mode can only
// change where the two closure roots coincide.
enum class Branch { Open, Crossed };

std::string_view to_string(Branch b);
std::optional<Branch> parse_branch(std::string_view s);

struct FourBarGeometry {
  double ground = 0.0;   // m, the standoff-defined virtual ground
  double input = 0.0;    // m
  double coupler = 0.0;  // m
  double output = 0.0;   // m
  // Link angle = joint angle + offset. The reference pose is joint angle 0,
  // i.e. link angle == input_offset.
  double input_offset = 1.5707963267948966;
  double output_offset = 1.5707963267948966;
  Branch branch = Branch::Open;
};

enum class GrashofClass { CrankRocker, RockerCrank, DoubleCrank, DoubleRocker, ChangePoint, NonGrashof };

std::string_view to_string(GrashofClass c);

// Arc of input angles [start, start + width] on the circle.
struct AngleInterval {
  double start = 0.0;
  double width = 0.0;

  bool contains(double theta) const;
};

struct AngleRange {
  std::vector<AngleInterval> intervals;

  bool empty() const { return intervals.empty(); }
  bool full() const;
  bool contains(double theta) const;
};

struct GrashofReport {
  GrashofClass classification = GrashofClass::NonGrashof;
  AngleRange assemblable;
};

GrashofReport grashof_check(const FourBarGeometry& geom);
AngleRange assemblable_range(const FourBarGeometry& geom);

// Loop closure |B - A| - coupler, in meters.
double closure_residual(const FourBarGeometry& geom, double theta, double phi);

// Assembly mode of the configuration (theta, phi).
Branch branch_of(const FourBarGeometry& geom, double theta, double phi);

// Output angles closing the loop at theta, each in (-pi, pi]. One root when
// the mechanism sits at a branch point, two otherwise.
struct ClosureRoots {
  std::array<double, 2> phi{};
  int count = 0;
};

// Throws NotAssemblable when no real root exists.
ClosureRoots closure_roots(const FourBarGeometry& geom, double theta);

struct PreviousOutput {
  double phi = 0.0;
};

// Either the declared assembly mode or the previous output angle.
using BranchHint = std::variant<Branch, PreviousOutput>;

struct SolveOptions {
  double continuity_threshold = 0.5;  // rad
};

// Output angle at theta. With a declared branch the root of that mode is
// returned in (-pi, pi]; with a previous output the nearest root is returned
// unwrapped next to it, or BranchJump is thrown if both roots are farther
// than the continuity threshold.
double solve_fourbar(const FourBarGeometry& geom, double theta, const BranchHint& hint,
                     const SolveOptions& options = {});

// Transmission angle between coupler and output link, in [0, pi].
double transmission_angle(const FourBarGeometry& geom, double theta, double phi);

// dphi/dtheta at a closed configuration, from implicit differentiation of the
// loop constraint. Output torque follows tau_out = tau_in / ratio. Throws
// SingularConfiguration when the transmission angle is within 1e-6 of 0 or pi.
double transmission_ratio(const FourBarGeometry& geom, double theta, double phi);

// Solves with the declared branch, then returns transmission_ratio.
double mechanical_advantage(const FourBarGeometry& geom, double theta);

// Same mechanism driven from the output side: mirror x -> ground - x, so the
// configuration (theta, phi) maps to (pi - phi, pi - theta) with input and
// output lengths swapped.
FourBarGeometry inverted(const FourBarGeometry& geom);

// Caller-owned continuation context. Starting from the declared branch at a
// reference input angle, each solve walks toward the requested angle in steps
// of at most `max_step`, predicting the next output from the last
// transmission ratio and taking the nearest root. This carries the solution
// through change points where a nearest-previous rule would switch branches.
class FourBarTracker {
 public:
  FourBarTracker(FourBarGeometry geom, double reference_input, SolveOptions options = {},
                 double max_step = 0.01);

  double solve(double theta);

  double input() const { return theta_; }
  double output() const { return phi_; }
  const FourBarGeometry& geometry() const { return geom_; }

 private:
  void step_to(double theta);

  FourBarGeometry geom_;
  SolveOptions options_;
  double max_step_;
  double theta_;
  double phi_;
  double slope_ = 0.0;
};

// One continuation step shared by FourBarTracker and the chained linkage
// solver: given the previous configuration and slope, return the root at
// theta nearest the first-order prediction (unwrapped next to it).
double continue_root(const FourBarGeometry& geom, double theta_prev, double phi_prev, double slope,
                     double theta, double continuity_threshold);

}  // namespace prx::linkage
