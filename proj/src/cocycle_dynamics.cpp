#include "rdde/cocycle_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rdde/dde_spectrum.hpp"
#include "rdde/error.hpp"
#include "rdde/fbm_sampler.hpp"

namespace rdde {

Eigen::VectorXd SegmentState::flatten() const {
  Eigen::VectorXd out(flat_size());
  out.head(values.size()) = values.reshaped();
  out.tail(derivs.size()) = derivs.reshaped();
  return out;
}

SegmentState SegmentState::unflatten(const Eigen::VectorXd& flat, int n, int d, int lag, double step) {
  const Eigen::Index nv = static_cast<Eigen::Index>(n) * (lag + 1);
  const Eigen::Index nd = nv * d;
  if (flat.size() != nv + nd) throw Error(ErrorCode::kInvalidArgument, "flat state has the wrong length");
  SegmentState s;
  s.step = step;
  s.values = flat.head(nv).reshaped(n, lag + 1);
  s.derivs = flat.tail(nd).reshaped(static_cast<Eigen::Index>(n) * d, lag + 1);
  return s;
}

ControlledSegment SegmentState::to_segment() const {
  ControlledSegment seg;
  seg.begin = -lag();
  seg.step = step;
  seg.values = values;
  seg.derivs = derivs;
  return seg;
}

SegmentState SegmentState::from_segment(const ControlledSegment& seg) {
  return SegmentState{seg.step, seg.values, seg.derivs};
}

SegmentState SegmentState::zero(int n, int d, int lag, double step) {
  return SegmentState{step, Eigen::MatrixXd::Zero(n, lag + 1), Eigen::MatrixXd::Zero(n * d, lag + 1)};
}

namespace {

SegmentState tail_state(const ControlledSegment& traj, int lag) {
  return SegmentState{traj.step, traj.values.rightCols(lag + 1), traj.derivs.rightCols(lag + 1)};
}

SolveOptions quiet() {
  SolveOptions o;
  o.log_norms = false;
  return o;
}

int lag_of(const EquationSpec& spec, double step) { return grid_index(spec.delay, step, "delay"); }

}  // namespace

SegmentState cocycle_apply(const EquationSpec& spec, const SegmentState& state, const DelayedRoughPath& drp, int m) {
  if (m < 0) throw Error(ErrorCode::kInvalidArgument, "cocycle power must be non-negative");
  if (m == 0) return state;
  const SolutionPath sol = solve(spec, state.to_segment(), drp, m * spec.delay, quiet());
  return tail_state(sol.trajectory, state.lag());
}

bool zero_is_stationary(const EquationSpec& spec, double tol) {
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(spec.n);
  if (spec.diffusion.is_zero()) return true;
  return spec.diffusion(z, z).cwiseAbs().maxCoeff() <= tol;
}

Eigen::MatrixXd linear_cocycle_matrix(const EquationSpec& spec, const DelayedRoughPath& drp, int m,
                                      const std::optional<SegmentState>& base) {
  const int lag = lag_of(spec, drp.step());
  if (!base && !zero_is_stationary(spec)) {
    throw Error(ErrorCode::kMissingBaseTrajectory, "G(0,0) != 0: supply a base state to linearise at");
  }
  const SegmentState at = base ? *base : SegmentState::zero(spec.n, spec.d, lag, drp.step());
  const DelayedRoughPath window = drp.shift(m * lag);
  const SolutionPath path = solve(spec, at.to_segment(), window, spec.delay, quiet());
  const Eigen::Index size = at.flat_size();
  Eigen::MatrixXd out(size, size);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(size);
  for (Eigen::Index j = 0; j < size; ++j) {
    e(j) = 1.0;
    const SegmentState dir = SegmentState::unflatten(e, spec.n, spec.d, lag, drp.step());
    const SolutionPath t = tangent_solve(spec, path, window, dir.to_segment());
    out.col(j) = tail_state(t.trajectory, lag).flatten();
    e(j) = 0.0;
  }
  return out;
}

LyapunovReport lyapunov_spectrum(const EquationSpec& spec, std::span<const DelayedRoughPath> ensemble,
                                 const LyapunovOptions& options) {
  if (ensemble.empty()) throw Error(ErrorCode::kInvalidArgument, "lyapunov_spectrum needs at least one driver path");
  if (options.iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be positive");
  const double h = ensemble.front().step();
  const int lag = lag_of(spec, h);
  if (options.lag != 0 && options.lag != lag) {
    throw Error(ErrorCode::kMisaligned, "segment resolution does not match r / h of the driver");
  }
  if (!options.base && !zero_is_stationary(spec)) {
    throw Error(ErrorCode::kMissingBaseTrajectory, "G(0,0) != 0: supply a base state to linearise at");
  }
  const int burn_in = options.burn_in < 0 ? options.iterations / 10 : options.burn_in;
  if (burn_in >= options.iterations) throw Error(ErrorCode::kInvalidArgument, "burn-in must be below the iteration count");
  const Eigen::Index size = SegmentState::zero(spec.n, spec.d, lag, h).flat_size();
  int k = options.k;
  if (k < 1 || k > 15 || k > size) throw Error(ErrorCode::kInvalidArgument, "k must lie in [1, min(15, state size)]");

  Eigen::MatrixXd start;
  if (options.initial_frame) {
    start = *options.initial_frame;
    if (start.rows() != size || start.cols() != k) {
      throw Error(ErrorCode::kInvalidArgument, "initial frame must be state size x k");
    }
  } else {
    std::mt19937_64 rng(stream_seed(options.frame_seed, 0));
    std::normal_distribution<double> normal;
    start.resize(size, k);
    for (Eigen::Index i = 0; i < start.size(); ++i) start.data()[i] = normal(rng);
  }

  LyapunovReport rep;
  rep.requested_k = k;
  std::vector<Eigen::VectorXd> kept;  // post burn-in logs, truncated to the final k later
  const SolveOptions opts = quiet();

  for (const DelayedRoughPath& drp : ensemble) {
    if (std::abs(drp.step() - h) > 1e-15 * h) throw Error(ErrorCode::kMisaligned, "ensemble paths use different steps");
    // orthonormalise first so that the frame's scale never enters the logs
    Eigen::HouseholderQR<Eigen::MatrixXd> qr0(start.leftCols(k));
    Eigen::MatrixXd frame = qr0.householderQ() * Eigen::MatrixXd::Identity(size, k);
    SegmentState base = options.base ? *options.base : SegmentState::zero(spec.n, spec.d, lag, h);
    for (int it = 0; it < options.iterations; ++it) {
      const DelayedRoughPath window = drp.shift(it * lag);
      const SolutionPath path = solve(spec, base.to_segment(), window, spec.delay, opts);
      Eigen::MatrixXd pushed(size, k);
      for (int c = 0; c < k; ++c) {
        const SegmentState dir = SegmentState::unflatten(frame.col(c), spec.n, spec.d, lag, h);
        pushed.col(c) = tail_state(tangent_solve(spec, path, window, dir.to_segment()).trajectory, lag).flatten();
      }
      base = tail_state(path.trajectory, lag);

      Eigen::HouseholderQR<Eigen::MatrixXd> qr(pushed);
      const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
      Eigen::VectorXd logs(k);
      int good = k;
      // directions at roundoff level relative to the pushed frame count as collapsed
      const double floor = 1e-12 * std::max(pushed.norm(), 1e-290);
      for (int i = 0; i < k; ++i) {
        const double v = std::abs(r(i, i));
        if (!(v > floor) || !std::isfinite(v)) {
          good = i;
          break;
        }
        logs(i) = std::log(v);
      }
      if (good == 0) throw Error(ErrorCode::kFrameCollapse, "the leading frame direction collapsed");
      if (good < k) {
        rep.frame_collapsed = true;
        k = good;
        logs.conservativeResize(k);
      }
      frame = qr.householderQ() * Eigen::MatrixXd::Identity(size, k);
      rep.diag_logs.push_back(logs);
      if (it >= burn_in) kept.push_back(logs);
    }
  }

  const int count = static_cast<int>(kept.size());
  rep.iterations = count;
  const double r = spec.delay;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  for (const auto& l : kept) sum += l.head(k);
  const Eigen::VectorXd mean = sum / (count * r);

  const int blocks = std::clamp(options.blocks, 1, count);
  const int per = count / blocks;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(k);
  if (blocks > 1 && per > 0) {
    for (int b = 0; b < blocks; ++b) {
      Eigen::VectorXd bm = Eigen::VectorXd::Zero(k);
      for (int i = b * per; i < (b + 1) * per; ++i) bm += kept[static_cast<std::size_t>(i)].head(k);
      bm /= per * r;
      var += (bm - mean).cwiseAbs2();
    }
    var /= (blocks - 1);
  }
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < k; ++i) pairs.emplace_back(mean(i), std::sqrt(var(i) / blocks));
  // exponents from QR are ordered only asymptotically; report them sorted
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [e, s] : pairs) {
    rep.exponents.push_back(e);
    rep.stderrs.push_back(s);
  }
  return rep;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

DecayReport pathwise_decay_estimate(const EquationSpec& spec, const ControlledSegment& xi,
                                    std::span<const DelayedRoughPath> ensemble, double horizon) {
  if (horizon < 20.0 * spec.delay * (1.0 - 1e-12)) {
    throw Error(ErrorCode::kInvalidArgument, "decay estimate needs T >= 20 r");
  }
  if (ensemble.empty()) throw Error(ErrorCode::kInvalidArgument, "empty ensemble");
  DecayReport rep;
  std::vector<double> good;
  for (const DelayedRoughPath& drp : ensemble) {
    double slope = std::numeric_limits<double>::quiet_NaN();
    PathOutcome outcome = PathOutcome::kCompleted;
    try {
      const SolutionPath sol = solve(spec, xi, drp, horizon, quiet());
      const int lag = xi.num_nodes() - 1;
      Eigen::MatrixXd traj(spec.n, lag + sol.trajectory.num_nodes());
      traj.leftCols(lag) = xi.values.leftCols(lag);
      traj.rightCols(sol.trajectory.num_nodes()) = sol.trajectory.values;
      const std::vector<double> sup = window_sup_norms(traj, lag);
      std::vector<double> times(sup.size());
      for (std::size_t i = 0; i < sup.size(); ++i) times[i] = static_cast<double>(i) * xi.step;
      const bool zero = std::all_of(sup.begin() + static_cast<std::ptrdiff_t>(sup.size() / 2), sup.end(),
                                    [](double s) { return s == 0.0; });
      if (zero) {
        outcome = PathOutcome::kDegenerate;
      } else {
        slope = log_slope(times, sup, 0.5 * horizon, horizon);
        if (!std::isfinite(slope)) outcome = PathOutcome::kDegenerate;
      }
    } catch (const OverflowError&) {
      outcome = PathOutcome::kAborted;
    }
    rep.outcomes.push_back(outcome);
    rep.slopes.push_back(outcome == PathOutcome::kCompleted ? slope : std::numeric_limits<double>::quiet_NaN());
    switch (outcome) {
      case PathOutcome::kCompleted:
        ++rep.completed;
        good.push_back(slope);
        break;
      case PathOutcome::kAborted:
        ++rep.aborted;
        break;
      case PathOutcome::kDegenerate:
        ++rep.degenerate;
        break;
    }
  }
  if (rep.aborted == static_cast<int>(ensemble.size())) {
    throw Error(ErrorCode::kAllPathsAborted, "every path in the ensemble overflowed");
  }
  rep.median = median_of(std::move(good));
  return rep;
}

}  // namespace rdde
