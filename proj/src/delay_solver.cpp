#include "rdde/delay_solver.hpp"

#include <algorithm>
#include <cmath>

#include "rdde/error.hpp"

namespace rdde {

double SignedDelayMeasure::total_variation(double delay) const {
  double tv = 0.0;
  for (const auto& a : atoms) tv += a.weight.norm();
  if (!density_cells.empty()) {
    const double width = delay / static_cast<double>(density_cells.size());
    for (const auto& c : density_cells) tv += c.norm() * width;
  }
  return tv;
}

const Eigen::MatrixXd& SignedDelayMeasure::density_at(double theta, double delay) const {
  if (density_cells.empty()) throw Error(ErrorCode::kInvalidArgument, "measure has no density part");
  const int cells = static_cast<int>(density_cells.size());
  int c = static_cast<int>(std::floor((theta + delay) / delay * cells));
  c = std::clamp(c, 0, cells - 1);
  return density_cells[static_cast<std::size_t>(c)];
}

void EquationSpec::validate() const {
  if (n < 1 || d < 1) throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");
  if (!(delay > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delay must be positive");
  if (drift_state.rows() != n || drift_state.cols() != n || drift_delay.rows() != n || drift_delay.cols() != n) {
    throw Error(ErrorCode::kInvalidArgument, "drift blocks must be n x n");
  }
  if (diffusion.state_dim() != n || diffusion.noise_dim() != d) {
    throw Error(ErrorCode::kInvalidArgument, "diffusion map dimensions disagree with the equation");
  }
  for (const auto& a : measure.atoms) {
    if (a.theta < -delay * (1.0 + 1e-12) || a.theta > 1e-12 * delay) {
      throw Error(ErrorCode::kInvalidArgument, "atom location outside [-r, 0]");
    }
    if (a.weight.rows() != n || a.weight.cols() != n) throw Error(ErrorCode::kInvalidArgument, "atom weight must be n x n");
  }
  for (const auto& c : measure.density_cells) {
    if (c.rows() != n || c.cols() != n) throw Error(ErrorCode::kInvalidArgument, "density cells must be n x n");
  }
  if (!drift_state.allFinite() || !drift_delay.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "drift blocks must be finite");
  }
}

double EquationSpec::drift_norm() const {
  const auto op = [](const Eigen::MatrixXd& m) {
    return m.size() == 0 ? 0.0 : Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  };
  return op(drift_state) + op(drift_delay);
}

Eigen::VectorXd measure_integral(const Eigen::Ref<const Eigen::MatrixXd>& history, const SignedDelayMeasure& pi,
                                 double delay, double step) {
  const int last = static_cast<int>(history.cols()) - 1;
  if (last < 1 || std::abs(last * step - delay) > 1e-9 * delay) {
    throw Error(ErrorCode::kCoverageGap, "history does not cover [t - r, t] on the grid");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(history.rows());
  for (const auto& a : pi.atoms) {
    const int idx = last + grid_index(a.theta, step, "atom location");
    if (idx < 0 || idx > last) throw Error(ErrorCode::kCoverageGap, "atom outside the history window");
    out.noalias() += a.weight * history.col(idx);
  }
  if (!pi.density_cells.empty()) {
    for (int p = 0; p < last; ++p) {
      const double mid = -delay + (p + 0.5) * step;
      out.noalias() += (0.5 * step) * (pi.density_at(mid, delay) * (history.col(p) + history.col(p + 1)));
    }
  }
  return out;
}

namespace {

struct Layout {
  int lag = 0;    // M
  int steps = 0;  // N
  double h = 0.0;
};

Layout check_inputs(const EquationSpec& spec, const ControlledSegment& xi, const DelayedRoughPath& drp,
                    double horizon) {
  spec.validate();
  Layout lay;
  lay.h = drp.step();
  lay.lag = grid_index(spec.delay, lay.h, "delay");
  if (lay.lag < 1) throw Error(ErrorCode::kMisaligned, "delay shorter than the grid step");
  lay.steps = grid_index(horizon, lay.h, "horizon");
  if (lay.steps < 0) throw Error(ErrorCode::kInvalidArgument, "horizon must be non-negative");
  if (drp.delay_steps() != lay.lag) {
    throw Error(ErrorCode::kMisaligned, "driver lift uses a different delay than the equation");
  }
  if (drp.dim() != spec.d) throw Error(ErrorCode::kInvalidArgument, "driver dimension differs from d");
  if (xi.begin != -lay.lag || xi.num_nodes() != lay.lag + 1 || xi.dim() != spec.n ||
      xi.noise_dim() != spec.d || std::abs(xi.step - lay.h) > 1e-14 * lay.h) {
    throw Error(ErrorCode::kMisaligned, "initial segment must live on [-r, 0] with the driver's step");
  }
  if (drp.min_index() > -lay.lag || drp.window_begin() > 0 || drp.max_index() < lay.steps) {
    throw Error(ErrorCode::kCoverageGap, "driver does not span [-r, T]");
  }
  for (const auto& a : spec.measure.atoms) (void)grid_index(a.theta, lay.h, "atom location");
  return lay;
}

// Drift contribution of one Heun step; `work` holds nodes [j-M, j+1] in
// columns j..j+M+1 of the full array, with column j+M+1 used as scratch.
class DriftStepper {
 public:
  DriftStepper(const EquationSpec& spec, double h, int lag)
      : spec_(spec), h_(h), lag_(lag), use_measure_(!spec.measure.empty() && spec.drift_delay.norm() > 0.0) {}

  // Returns y_{j+1} - y_j - rough given y_j, rough and the history array.
  template <class Array>
  Eigen::VectorXd advance(Array& y, int col, const Eigen::VectorXd& rough) const {
    const Eigen::VectorXd x = y.col(col);
    Eigen::VectorXd a_now = spec_.drift_state * x;
    if (use_measure_) a_now.noalias() += spec_.drift_delay * integral(y, col);
    y.col(col + 1) = x + h_ * a_now + rough;
    Eigen::VectorXd a_next = spec_.drift_state * y.col(col + 1);
    if (use_measure_) a_next.noalias() += spec_.drift_delay * integral(y, col + 1);
    return 0.5 * h_ * (a_now + a_next);
  }

 private:
  template <class Array>
  Eigen::VectorXd integral(const Array& y, int col) const {
    return measure_integral(y.middleCols(col - lag_, lag_ + 1), spec_.measure, spec_.delay, h_);
  }

  const EquationSpec& spec_;
  double h_;
  int lag_;
  bool use_measure_;
};

void check_finite(const Eigen::VectorXd& y, double threshold, int cell, int lag) {
  if (!y.allFinite() || y.norm() > threshold) {
    throw OverflowError(cell / lag + 1, "solution left the representable range at cell " + std::to_string(cell));
  }
}

void fill_norm_log(SolutionPath& sol, const DelayedRoughPath& drp, const SolveOptions& options, int lag) {
  const int steps = sol.trajectory.num_nodes() - 1;
  const double h = sol.trajectory.step;
  for (int m = 1; (m - 1) * lag < steps; ++m) {
    const int b = (m - 1) * lag;
    const int e = std::min(m * lag, steps);
    ControlledSegment seg;
    seg.begin = b;
    seg.step = h;
    seg.values = sol.trajectory.values.middleCols(b, e - b + 1);
    seg.derivs = sol.trajectory.derivs.middleCols(b, e - b + 1);
    SegmentNormRecord rec;
    rec.segment = m;
    rec.t_begin = b * h;
    rec.t_end = e * h;
    rec.solution_norm = controlled_norm(seg, options.beta, drp);
    rec.driver_norm = holder_norms(drp, options.gamma, b, e).total;
    rec.sup_norm = seg.values.colwise().norm().maxCoeff();
    sol.norm_log.push_back(rec);
  }
}

Eigen::VectorXd area_term(const SmoothMapG& g, const Eigen::VectorXd& x, const Eigen::VectorXd& yd,
                          const Eigen::MatrixXd& slot_now, const Eigen::MatrixXd& slot_delay,
                          const Eigen::Map<const Eigen::MatrixXd>& area,
                          const Eigen::Map<const Eigen::MatrixXd>& delayed) {
  const int n = static_cast<int>(x.size());
  const int d = static_cast<int>(area.rows());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < d; ++i) {
    out.noalias() += g.first(x, yd, slot_now.col(i), zero) * area.row(i).transpose();
    out.noalias() += g.first(x, yd, zero, slot_delay.col(i)) * delayed.row(i).transpose();
  }
  return out;
}

}  // namespace

SolutionPath solve(const EquationSpec& spec, const ControlledSegment& xi, const DelayedRoughPath& drp,
                   double horizon, const SolveOptions& options) {
  const Layout lay = check_inputs(spec, xi, drp, horizon);
  const int lag = lay.lag;
  const int steps = lay.steps;
  const int n = spec.n;
  const int d = spec.d;
  const SmoothMapG& g = spec.diffusion;

  Eigen::MatrixXd y(n, lag + steps + 1);
  Eigen::MatrixXd dy(n * d, lag + steps + 1);
  y.leftCols(lag + 1) = xi.values;
  dy.leftCols(lag + 1) = xi.derivs;

  const DriftStepper drift(spec, lay.h, lag);
  for (int j = 0; j < steps; ++j) {
    const int col = j + lag;
    const Eigen::VectorXd x = y.col(col);
    const Eigen::VectorXd yd = y.col(col - lag);
    Eigen::VectorXd rough = Eigen::VectorXd::Zero(n);
    if (!g.is_zero()) {
      const Eigen::MatrixXd gv = g(x, yd);
      Eigen::Map<Eigen::MatrixXd>(dy.col(col).data(), n, d) = gv;
      const Eigen::Map<const Eigen::MatrixXd> slot_delay(dy.col(col - lag).data(), n, d);
      rough = gv * drp.increment(j, j + 1) +
              area_term(g, x, yd, gv, slot_delay, drp.cell_area(j), drp.cell_delayed_area(j));
    } else {
      dy.col(col).setZero();
    }
    const Eigen::VectorXd drift_incr = drift.advance(y, col, rough);
    y.col(col + 1) = x + drift_incr + rough;
    check_finite(y.col(col + 1), options.overflow_threshold, j, lag);
  }
  {
    const int col = steps + lag;
    Eigen::Map<Eigen::MatrixXd>(dy.col(col).data(), n, d) = g(y.col(col), y.col(col - lag));
  }

  SolutionPath sol;
  sol.single_step_delay = (lag == 1);
  sol.initial = xi;
  sol.trajectory.begin = 0;
  sol.trajectory.step = lay.h;
  sol.trajectory.values = y.rightCols(steps + 1);
  sol.trajectory.derivs = dy.rightCols(steps + 1);
  if (options.log_norms) fill_norm_log(sol, drp, options, lag);
  return sol;
}

SolutionPath tangent_solve(const EquationSpec& spec, const SolutionPath& base, const DelayedRoughPath& drp,
                           const ControlledSegment& direction) {
  const int steps = base.trajectory.num_nodes() - 1;
  const Layout lay = check_inputs(spec, direction, drp, steps * drp.step());
  const int lag = lay.lag;
  const int n = spec.n;
  const int d = spec.d;
  const SmoothMapG& g = spec.diffusion;

  Eigen::MatrixXd y(n, lag + steps + 1), dy(n * d, lag + steps + 1);
  y.leftCols(lag) = base.initial.values.leftCols(lag);
  dy.leftCols(lag) = base.initial.derivs.leftCols(lag);
  y.rightCols(steps + 1) = base.trajectory.values;
  dy.rightCols(steps + 1) = base.trajectory.derivs;

  Eigen::MatrixXd v(n, lag + steps + 1), dv(n * d, lag + steps + 1);
  v.leftCols(lag + 1) = direction.values;
  dv.leftCols(lag + 1) = direction.derivs;

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const DriftStepper drift(spec, lay.h, lag);
  for (int j = 0; j < steps; ++j) {
    const int col = j + lag;
    const Eigen::VectorXd x = y.col(col);
    const Eigen::VectorXd yd = y.col(col - lag);
    const Eigen::VectorXd vx = v.col(col);
    const Eigen::VectorXd vd = v.col(col - lag);
    Eigen::VectorXd rough = Eigen::VectorXd::Zero(n);
    if (!g.is_zero()) {
      const Eigen::MatrixXd dg = g.first(x, yd, vx, vd);
      Eigen::Map<Eigen::MatrixXd>(dv.col(col).data(), n, d) = dg;
      const Eigen::Map<const Eigen::MatrixXd> slot_now(dy.col(col).data(), n, d);
      const Eigen::Map<const Eigen::MatrixXd> slot_delay(dy.col(col - lag).data(), n, d);
      const Eigen::Map<const Eigen::MatrixXd> dslot_delay(dv.col(col - lag).data(), n, d);
      const auto area = drp.cell_area(j);
      const auto delayed = drp.cell_delayed_area(j);
      rough = dg * drp.increment(j, j + 1);
      for (int i = 0; i < d; ++i) {
        const Eigen::MatrixXd dnow =
            g.second(x, yd, slot_now.col(i), zero, vx, vd) + g.first(x, yd, dg.col(i), zero);
        const Eigen::MatrixXd ddel =
            g.second(x, yd, zero, slot_delay.col(i), vx, vd) + g.first(x, yd, zero, dslot_delay.col(i));
        rough.noalias() += dnow * area.row(i).transpose();
        rough.noalias() += ddel * delayed.row(i).transpose();
      }
    } else {
      dv.col(col).setZero();
    }
    const Eigen::VectorXd drift_incr = drift.advance(v, col, rough);
    v.col(col + 1) = vx + drift_incr + rough;
  }
  {
    const int col = steps + lag;
    Eigen::Map<Eigen::MatrixXd>(dv.col(col).data(), n, d) =
        g.first(y.col(col), y.col(col - lag), v.col(col), v.col(col - lag));
  }

  SolutionPath out;
  out.single_step_delay = (lag == 1);
  out.initial = direction;
  out.trajectory.begin = 0;
  out.trajectory.step = lay.h;
  out.trajectory.values = v.rightCols(steps + 1);
  out.trajectory.derivs = dv.rightCols(steps + 1);
  return out;
}

SolutionPath directional_derivative(const EquationSpec& spec, const ControlledSegment& xi,
                                    const DelayedRoughPath& drp, double horizon, const ControlledSegment& direction,
                                    const SolveOptions& options) {
  SolveOptions base_opts = options;
  base_opts.log_norms = false;
  const SolutionPath base = solve(spec, xi, drp, horizon, base_opts);
  return tangent_solve(spec, base, drp, direction);
}

std::vector<SegmentNormRecord> apriori_norm_report(const SolutionPath& solution) { return solution.norm_log; }

}  // namespace rdde
