#pragma once

// Segment-space cocycle of the delay equation and its linearisation.
// A state is the solution segment on an r-window sampled at M+1 nodes with
// its Gubinelli derivatives, flattened as [vec(values); vec(derivs)].

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rdde/delay_solver.hpp"

namespace rdde {

struct SegmentState {
  double step = 0.0;
  Eigen::MatrixXd values;  // n x (M+1)
  Eigen::MatrixXd derivs;  // (n*d) x (M+1)

  int dim() const noexcept { return static_cast<int>(values.rows()); }
  int lag() const noexcept { return static_cast<int>(values.cols()) - 1; }
  int noise_dim() const noexcept { return dim() == 0 ? 0 : static_cast<int>(derivs.rows()) / dim(); }
  Eigen::Index flat_size() const noexcept { return values.size() + derivs.size(); }

  Eigen::VectorXd flatten() const;
  static SegmentState unflatten(const Eigen::VectorXd& flat, int n, int d, int lag, double step);
  /// The state as initial datum on [-r, 0].
  ControlledSegment to_segment() const;
  static SegmentState from_segment(const ControlledSegment& seg);
  static SegmentState zero(int n, int d, int lag, double step);
};

/// phi^m: solve over [0, m r] with the driver `drp` and return the segment
/// on [(m-1) r, m r]. m = 0 returns the state unchanged.
SegmentState cocycle_apply(const EquationSpec& spec, const SegmentState& state, const DelayedRoughPath& drp, int m);

/// Matrix of the derivative of phi^1 over the driver shifted by m r, taken at
/// `base` (the zero state when omitted, which needs G(0,0) = 0). Column j is
/// the tangent solve along the j-th flattened basis direction.
Eigen::MatrixXd linear_cocycle_matrix(const EquationSpec& spec, const DelayedRoughPath& drp, int m,
                                      const std::optional<SegmentState>& base = std::nullopt);

/// True when G(0, 0) = 0, so that the zero path is stationary.
bool zero_is_stationary(const EquationSpec& spec, double tol = 0.0);

struct LyapunovOptions {
  int k = 1;                 // number of exponents
  int iterations = 200;      // r-steps per driver path, burn-in included
  int burn_in = -1;          // negative: iterations / 10
  int blocks = 10;           // block averaging for standard errors
  int lag = 0;               // M; 0 takes r / h from the driver
  std::optional<SegmentState> base;           // base state at t = 0 for non-stationary specs
  std::uint64_t frame_seed = 7;
  std::optional<Eigen::MatrixXd> initial_frame;  // flat_size x k
};

struct LyapunovReport {
  std::vector<double> exponents;  // non-increasing, per unit time
  std::vector<double> stderrs;
  int iterations = 0;             // QR steps entering the averages
  int requested_k = 0;
  bool frame_collapsed = false;   // k was reduced
  std::vector<Eigen::VectorXd> diag_logs;  // log |R_ii| per QR step (burn-in included)
};

/// Iterated QR on a k-frame pushed through the tangent cocycle one r-step at
/// a time. Each driver path in `ensemble` must cover [-r, iterations r].
LyapunovReport lyapunov_spectrum(const EquationSpec& spec, std::span<const DelayedRoughPath> ensemble,
                                 const LyapunovOptions& options = {});

enum class PathOutcome { kCompleted, kAborted, kDegenerate };

struct DecayReport {
  std::vector<double> slopes;  // NaN unless completed
  std::vector<PathOutcome> outcomes;
  double median = 0.0;         // over completed paths, NaN if none
  int completed = 0;
  int aborted = 0;
  int degenerate = 0;
  double abort_fraction() const noexcept {
    return outcomes.empty() ? 0.0 : static_cast<double>(aborted) / static_cast<double>(outcomes.size());
  }
};

/// Least-squares slope of log sup_{[t-r,t]} |y| on [T/2, T] per driver path.
/// Overflowing paths are aborted; identically zero solutions are degenerate.
DecayReport pathwise_decay_estimate(const EquationSpec& spec, const ControlledSegment& xi,
                                    std::span<const DelayedRoughPath> ensemble, double horizon);

double median_of(std::vector<double> values);

}  // namespace rdde
