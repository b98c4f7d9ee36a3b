#include "rdde/rough_integral.hpp"

#include "rdde/error.hpp"

namespace rdde {

namespace {

Eigen::VectorXd one_step(const DelayedControlledSegment& zeta, int node, const Eigen::VectorXd& dx,
                         const Eigen::MatrixXd& area, const Eigen::MatrixXd& delayed) {
  const int dd = zeta.d * zeta.d;
  return zeta.value(node) * dx + zeta.d0(node) * Eigen::Map<const Eigen::VectorXd>(area.data(), dd) +
         zeta.d1(node) * Eigen::Map<const Eigen::VectorXd>(delayed.data(), dd);
}

void check_bounds(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp, int a, int b) {
  if (a > b) throw Error(ErrorCode::kInvalidArgument, "integration bounds must satisfy a <= b");
  if (std::abs(zeta.step - drp.step()) > 1e-14 * drp.step() || zeta.d != drp.dim()) {
    throw Error(ErrorCode::kInvalidArgument, "integrand and driver disagree on step or dimension");
  }
  if (a < zeta.begin || b > zeta.end()) {
    throw Error(ErrorCode::kWindowOutOfRange, "bounds outside the integrand window");
  }
  if (a < drp.window_begin() || b > drp.max_index()) {
    throw Error(ErrorCode::kWindowOutOfRange, "bounds outside the lift window");
  }
}

}  // namespace

ControlledSegment delayed_rough_integral_steps(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp,
                                               int a, int b) {
  check_bounds(zeta, drp, a, b);
  ControlledSegment out;
  out.begin = a;
  out.step = zeta.step;
  const int nodes = b - a + 1;
  out.values = Eigen::MatrixXd::Zero(zeta.n, nodes);
  out.derivs.resize(zeta.n * zeta.d, nodes);
  for (int k = 0; k < nodes; ++k) out.derivs.col(k) = zeta.zeta.col(a + k - zeta.begin);
  for (int j = a; j < b; ++j) {
    const int node = j - zeta.begin;
    out.values.col(j - a + 1) = out.values.col(j - a) + one_step(zeta, node, drp.increment(j, j + 1),
                                                                 drp.cell_area(j), drp.cell_delayed_area(j));
  }
  return out;
}

ControlledSegment delayed_rough_integral(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp,
                                         double a, double b) {
  return delayed_rough_integral_steps(zeta, drp, grid_index(a, drp.step(), "lower bound"),
                                      grid_index(b, drp.step(), "upper bound"));
}

double local_expansion_residual_steps(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp, int s,
                                      int t) {
  const ControlledSegment integral = delayed_rough_integral_steps(zeta, drp, s, t);
  const Eigen::VectorXd germ =
      one_step(zeta, s - zeta.begin, drp.increment(s, t), drp.area(s, t), drp.delayed_area(s, t));
  return (integral.values.col(t - s) - germ).norm();
}

double local_expansion_residual(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp, double s,
                                double t) {
  return local_expansion_residual_steps(zeta, drp, grid_index(s, drp.step(), "s"), grid_index(t, drp.step(), "t"));
}

}  // namespace rdde
