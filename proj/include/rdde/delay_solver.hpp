#pragma once

// Forward solver for
//   dy = A(y_t, int_{-r}^0 y_{t+theta} pi(dtheta)) dt + G(y_t, y_{t-r}) dX_t,  y = xi on [-r, 0].
//
// One step over the cell [t, t+h]:
//   rough  = G(y_t, y_{t-r}) X_{t,t+h} + zeta0_t XX_{t,t+h} + zeta1_t XX_{t,t+h}(-r)
//   pred   = y_t + h a_t + rough
//   y_{t+h}= y_t + h/2 (a_t + a(pred)) + rough
// with a_t = A0 y_t + A1 I_t and I_t the pi-integral of the history. zeta0/1
// follow the chain rule with y'_t = G(y_t, y_{t-r}) for t >= 0 and the
// initial datum's derivative for t < 0.

#include <Eigen/Dense>

#include <vector>

#include "rdde/controlled_paths.hpp"
#include "rdde/delayed_rough_lift.hpp"

namespace rdde {

struct DelayAtom {
  double theta = 0.0;       // location in [-r, 0]
  Eigen::MatrixXd weight;   // n x n
};

/// Finite signed matrix-valued measure on [-r, 0]: atoms plus a density that is
/// constant on each of `density_cells.size()` equal cells of [-r, 0].
struct SignedDelayMeasure {
  std::vector<DelayAtom> atoms;
  std::vector<Eigen::MatrixXd> density_cells;

  double total_variation(double delay) const;
  bool empty() const noexcept { return atoms.empty() && density_cells.empty(); }
  /// Density value at theta (right-continuous, last cell closed).
  const Eigen::MatrixXd& density_at(double theta, double delay) const;
};

struct EquationSpec {
  int n = 1;
  int d = 1;
  double delay = 1.0;
  Eigen::MatrixXd drift_state;   // A0, acts on y_t
  Eigen::MatrixXd drift_delay;   // A1, acts on the pi-integral
  SignedDelayMeasure measure;
  SmoothMapG diffusion = SmoothMapG::zero(1, 1);

  void validate() const;
  double drift_norm() const;  // ||A0|| + ||A1|| (operator 2-norms)
};

/// int_{-r}^0 y_{t+theta} pi(dtheta) from node values covering [t-r, t]
/// (history.col(0) is t-r, history.col(M) is t). Atoms are read at their
/// nodes; the density part uses the trapezoid rule with the density taken at
/// each panel midpoint.
Eigen::VectorXd measure_integral(const Eigen::Ref<const Eigen::MatrixXd>& history, const SignedDelayMeasure& pi,
                                 double delay, double step);

struct SegmentNormRecord {
  int segment = 0;             // covers [(segment-1) r, segment r]
  double t_begin = 0.0;
  double t_end = 0.0;
  double solution_norm = 0.0;  // controlled norm of (y, y') on the segment
  double driver_norm = 0.0;    // ||X||_{gamma} on the segment
  double sup_norm = 0.0;       // max |y| on the segment
};

struct SolutionPath {
  ControlledSegment initial;     // [-r, 0]
  ControlledSegment trajectory;  // [0, T], derivs = G(y_t, y_{t-r})
  std::vector<SegmentNormRecord> norm_log;
  bool single_step_delay = false;  // r == h
};

struct SolveOptions {
  bool log_norms = true;
  double beta = 0.35;
  double gamma = 0.35;
  double overflow_threshold = 1e150;
};

SolutionPath solve(const EquationSpec& spec, const ControlledSegment& xi, const DelayedRoughPath& drp,
                   double horizon, const SolveOptions& options = {});

/// Derivative of the discrete solution map along `direction` (values and
/// Gubinelli derivatives on [-r, 0]). Uses the exact tangent of the step.
SolutionPath directional_derivative(const EquationSpec& spec, const ControlledSegment& xi,
                                    const DelayedRoughPath& drp, double horizon, const ControlledSegment& direction,
                                    const SolveOptions& options = {});

/// Tangent solve along an already computed base solution.
SolutionPath tangent_solve(const EquationSpec& spec, const SolutionPath& base, const DelayedRoughPath& drp,
                           const ControlledSegment& direction);

/// Per-segment table of solution and driver norms recorded during solve().
std::vector<SegmentNormRecord> apriori_norm_report(const SolutionPath& solution);

}  // namespace rdde
