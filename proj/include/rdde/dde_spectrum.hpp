#pragma once

// Deterministic linear delay equations
//   y' = A0 y_t + A1 int_{-r}^0 y_{t+theta} pi(dtheta)
// : characteristic matrix, root enumeration, spectral abscissa and the
// method-of-steps solution semigroup.

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "rdde/delay_solver.hpp"

namespace rdde {

using Complex = std::complex<double>;

struct LinearDelaySystem {
  Eigen::MatrixXd drift_state;
  Eigen::MatrixXd drift_delay;
  SignedDelayMeasure measure;
  double delay = 1.0;

  int dim() const noexcept { return static_cast<int>(drift_state.rows()); }
  static LinearDelaySystem from(const EquationSpec& spec);
  /// Scalar y' = a y + b y(t - r).
  static LinearDelaySystem scalar(double a, double b, double r);
};

/// Delta(z) C = z C - A0 C - A1 int C e^{z theta} pi(dtheta).
/// Atoms contribute exactly; each density cell is integrated with 64-panel
/// composite Simpson.
class CharacteristicMatrix {
 public:
  explicit CharacteristicMatrix(LinearDelaySystem sys, int panels = 64);

  Eigen::MatrixXcd operator()(Complex z) const;
  /// d/dz Delta(z).
  Eigen::MatrixXcd derivative(Complex z) const;
  Complex det(Complex z) const;
  /// det'(z) / det(z) = tr(Delta^{-1} Delta').
  Complex log_derivative(Complex z) const;
  /// Relative difference between the 64- and 128-panel density quadrature at z.
  double quadrature_check(Complex z) const;

  const LinearDelaySystem& system() const noexcept { return sys_; }

 private:
  Eigen::MatrixXcd laplace(Complex z, bool moment, int panels) const;

  LinearDelaySystem sys_;
  int panels_;
};

Complex char_det(Complex z, const LinearDelaySystem& sys);

struct Region {
  double re_min, re_max, im_min, im_max;
};

struct CharacteristicRoot {
  Complex z;
  double residual = 0.0;  // |det Delta(z)|
  int multiplicity = 1;
};

struct SpectralReport {
  std::vector<CharacteristicRoot> roots;  // sorted by decreasing real part
  double abscissa = -std::numeric_limits<double>::infinity();
  Region region{};
  int winding_count = 0;  // argument-principle count over the region
};

struct RootSearchOptions {
  double newton_tol = 1e-13;
  int newton_iters = 60;
  int max_depth = 24;
  double dedup_radius = 1e-6;
};

/// Argument-principle count on the region boundary, recursive subdivision
/// until each cell holds one root (or a cluster in a tiny cell), Newton
/// polish from the cell centre. Throws kBoundaryRoot if the boundary passes
/// through a root.
SpectralReport find_roots(const LinearDelaySystem& sys, const Region& region, const RootSearchOptions& opt = {});

/// Winding number of det Delta along the boundary of `region`.
int argument_principle_count(const CharacteristicMatrix& delta, const Region& region);

/// Rightmost real part of the characteristic roots. The search box grows to
/// the left until it contains a root; Re z is capped at -50/r.
SpectralReport spectral_report(const LinearDelaySystem& sys);
double spectral_abscissa(const LinearDelaySystem& sys);

/// T_t xi by the method of steps with the solver's Heun drift quadrature.
/// `xi` holds M+1 node values on [-r, 0] (step r/M); returns the segment on
/// [t - r, t].
Eigen::MatrixXd semigroup_apply(const LinearDelaySystem& sys, const Eigen::MatrixXd& xi, double t);

/// Full trajectory of the method of steps on [-r, t] (M + t/h + 1 columns).
Eigen::MatrixXd semigroup_trajectory(const LinearDelaySystem& sys, const Eigen::MatrixXd& xi, double t);

/// Least-squares slope of log sup|T_t xi| (sup over [t - r, t]) on [T/2, T],
/// maximised over a basis of initial segments (constant, ramp and cosine
/// profiles along each coordinate).
double decay_rate_estimate(const LinearDelaySystem& sys, double horizon, int segments = 64);

/// Least-squares slope of log s(t) against t for t in [t0, t1] from node samples.
double log_slope(const std::vector<double>& times, const std::vector<double>& sup_norms, double t0, double t1);

/// Sliding max over [t - r, t] of |y| for every node t >= 0 of a trajectory
/// that starts at -r (column 0).
std::vector<double> window_sup_norms(const Eigen::MatrixXd& trajectory, int lag);

}  // namespace rdde
