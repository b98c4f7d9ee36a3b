#include "rdde/dde_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>

#include "rdde/error.hpp"

namespace rdde {

LinearDelaySystem LinearDelaySystem::from(const EquationSpec& spec) {
  return LinearDelaySystem{spec.drift_state, spec.drift_delay, spec.measure, spec.delay};
}

LinearDelaySystem LinearDelaySystem::scalar(double a, double b, double r) {
  LinearDelaySystem sys;
  sys.drift_state = Eigen::MatrixXd::Constant(1, 1, a);
  sys.drift_delay = Eigen::MatrixXd::Constant(1, 1, b);
  sys.measure.atoms.push_back(DelayAtom{-r, Eigen::MatrixXd::Identity(1, 1)});
  sys.delay = r;
  return sys;
}

CharacteristicMatrix::CharacteristicMatrix(LinearDelaySystem sys, int panels) : sys_(std::move(sys)), panels_(panels) {
  if (panels_ < 2 || panels_ % 2) throw Error(ErrorCode::kInvalidArgument, "Simpson needs an even panel count");
  const int n = sys_.dim();
  if (n < 1 || sys_.drift_state.cols() != n || sys_.drift_delay.rows() != n || sys_.drift_delay.cols() != n) {
    throw Error(ErrorCode::kInvalidArgument, "drift blocks must be square and of equal size");
  }
  if (!(sys_.delay > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delay must be positive");
}

Eigen::MatrixXcd CharacteristicMatrix::laplace(Complex z, bool moment, int panels) const {
  const int n = sys_.dim();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& a : sys_.measure.atoms) {
    Complex w = std::exp(z * a.theta);
    if (moment) w *= a.theta;
    out += w * a.weight.cast<Complex>();
  }
  const auto& cells = sys_.measure.density_cells;
  if (!cells.empty()) {
    const double r = sys_.delay;
    const double width = r / static_cast<double>(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double lo = -r + static_cast<double>(c) * width;
      const double step = width / panels;
      Complex acc = 0.0;
      for (int k = 0; k <= panels; ++k) {
        const double theta = lo + k * step;
        const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        Complex f = std::exp(z * theta);
        if (moment) f *= theta;
        acc += w * f;
      }
      acc *= step / 3.0;
      out += acc * cells[c].cast<Complex>();
    }
  }
  return out;
}

Eigen::MatrixXcd CharacteristicMatrix::operator()(Complex z) const {
  const int n = sys_.dim();
  Eigen::MatrixXcd m = z * Eigen::MatrixXcd::Identity(n, n) - sys_.drift_state.cast<Complex>();
  m.noalias() -= sys_.drift_delay.cast<Complex>() * laplace(z, false, panels_);
  return m;
}

Eigen::MatrixXcd CharacteristicMatrix::derivative(Complex z) const {
  const int n = sys_.dim();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n);
  m.noalias() -= sys_.drift_delay.cast<Complex>() * laplace(z, true, panels_);
  return m;
}

Complex CharacteristicMatrix::det(Complex z) const {
  const Eigen::MatrixXcd m = (*this)(z);
  if (m.rows() == 1) return m(0, 0);
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(m).determinant();
}

Complex CharacteristicMatrix::log_derivative(Complex z) const {
  const Eigen::MatrixXcd m = (*this)(z);
  const Eigen::MatrixXcd dm = derivative(z);
  if (m.rows() == 1) return dm(0, 0) / m(0, 0);
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(m).solve(dm).trace();
}

double CharacteristicMatrix::quadrature_check(Complex z) const {
  const Eigen::MatrixXcd coarse = laplace(z, false, panels_);
  const Eigen::MatrixXcd fine = laplace(z, false, 2 * panels_);
  return (coarse - fine).norm() / std::max(1e-300, fine.norm());
}

Complex char_det(Complex z, const LinearDelaySystem& sys) { return CharacteristicMatrix(sys).det(z); }

// ---------------------------------------------------------------------------
// Argument principle

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct EdgeWalker {
  const CharacteristicMatrix& delta;
  double scale;  // characteristic length of the region
  int depth_limit = 40;

  // Accumulated change of arg det along the straight segment [a, b].
  double walk(Complex a, Complex fa, Complex b, Complex fb, int depth) const {
    const double jump = std::arg(fb / fa);
    const Complex mid = 0.5 * (a + b);
    // consistency with the log-derivative prediction guards against missed wraps
    const double predicted = std::imag(delta.log_derivative(mid) * (b - a));
    const bool smooth = std::abs(jump) < 0.3 && std::abs(jump - predicted) < 0.1;
    if (smooth) return jump;
    if (depth >= depth_limit) {
      throw Error(ErrorCode::kBoundaryRoot, "argument of det Delta varies too fast near the boundary");
    }
    const Complex fm = delta.det(mid);
    if (std::abs(fm) == 0.0 || !std::isfinite(std::abs(fm))) {
      throw Error(ErrorCode::kBoundaryRoot, "det Delta vanishes on the region boundary");
    }
    return walk(a, fa, mid, fm, depth + 1) + walk(mid, fm, b, fb, depth + 1);
  }

  double edge(Complex a, Complex b) const {
    const int pieces = std::max(4, static_cast<int>(std::ceil(std::abs(b - a) / (0.05 * scale))));
    double total = 0.0;
    Complex za = a;
    Complex fa = delta.det(za);
    if (std::abs(fa) == 0.0) throw Error(ErrorCode::kBoundaryRoot, "det Delta vanishes at a region corner");
    for (int k = 1; k <= pieces; ++k) {
      const Complex zb = a + (b - a) * (static_cast<double>(k) / pieces);
      const Complex fb = delta.det(zb);
      if (std::abs(fb) == 0.0) throw Error(ErrorCode::kBoundaryRoot, "det Delta vanishes on the region boundary");
      total += walk(za, fa, zb, fb, 0);
      za = zb;
      fa = fb;
    }
    return total;
  }
};

double span_scale(const Region& r) {
  return std::max({r.re_max - r.re_min, r.im_max - r.im_min, 1e-12}) ;
}

struct CellSearch {
  const CharacteristicMatrix& delta;
  const RootSearchOptions& opt;
  std::vector<CharacteristicRoot>& found;

  bool inside(const Region& r, Complex z, double slack) const {
    return z.real() >= r.re_min - slack && z.real() <= r.re_max + slack && z.imag() >= r.im_min - slack &&
           z.imag() <= r.im_max + slack;
  }

  bool newton(Complex& z, int multiplicity) const {
    for (int it = 0; it < opt.newton_iters; ++it) {
      const Complex ld = delta.log_derivative(z);
      if (!std::isfinite(ld.real()) || !std::isfinite(ld.imag())) return std::isfinite(z.real());
      if (std::abs(ld) == 0.0) return false;
      const Complex step = static_cast<double>(multiplicity) / ld;
      z -= step;
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
      if (std::abs(step) < opt.newton_tol * (1.0 + std::abs(z))) return true;
    }
    return false;
  }

  void process(const Region& cell, int count, int depth) {
    if (count == 0) return;
    const Complex centre(0.5 * (cell.re_min + cell.re_max), 0.5 * (cell.im_min + cell.im_max));
    const double size = span_scale(cell);
    if (count == 1) {
      Complex z = centre;
      if (newton(z, 1) && inside(cell, z, 1e-9 * size)) {
        found.push_back({z, std::abs(delta.det(z)), 1});
        return;
      }
    } else if (size < 1e-7 * (1.0 + std::abs(centre)) || depth >= opt.max_depth) {
      Complex z = centre;
      if (newton(z, count) && inside(cell, z, 1e-6 * (1.0 + std::abs(centre)))) {
        found.push_back({z, std::abs(delta.det(z)), count});
        return;
      }
    }
    if (depth >= opt.max_depth) throw Error(ErrorCode::kNoConvergence, "root polish failed in a minimal cell");
    subdivide(cell, count, depth);
  }

  void subdivide(const Region& cell, int count, int depth) {
    static constexpr double kSplits[] = {0.5123, 0.4671, 0.5477, 0.4319, 0.5831};
    for (double alpha : kSplits) {
      const double xs = cell.re_min + alpha * (cell.re_max - cell.re_min);
      const double ys = cell.im_min + (1.0 - alpha) * (cell.im_max - cell.im_min);
      const Region quads[4] = {{cell.re_min, xs, cell.im_min, ys},
                               {xs, cell.re_max, cell.im_min, ys},
                               {cell.re_min, xs, ys, cell.im_max},
                               {xs, cell.re_max, ys, cell.im_max}};
      int counts[4];
      try {
        int total = 0;
        for (int q = 0; q < 4; ++q) {
          counts[q] = argument_principle_count(delta, quads[q]);
          total += counts[q];
        }
        if (total != count) continue;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kBoundaryRoot) continue;
        throw;
      }
      for (int q = 0; q < 4; ++q) process(quads[q], counts[q], depth + 1);
      return;
    }
    throw Error(ErrorCode::kNoConvergence, "could not split a cell without hitting a root");
  }
};

}  // namespace

int argument_principle_count(const CharacteristicMatrix& delta, const Region& region) {
  const EdgeWalker walker{delta, span_scale(region)};
  const Complex c0(region.re_min, region.im_min);
  const Complex c1(region.re_max, region.im_min);
  const Complex c2(region.re_max, region.im_max);
  const Complex c3(region.re_min, region.im_max);
  const double total = walker.edge(c0, c1) + walker.edge(c1, c2) + walker.edge(c2, c3) + walker.edge(c3, c0);
  const double winding = total / kTwoPi;
  const double rounded = std::round(winding);
  if (std::abs(winding - rounded) > 0.2) {
    throw Error(ErrorCode::kBoundaryRoot, "non-integral winding number; a root lies on or near the boundary");
  }
  return static_cast<int>(rounded);
}

SpectralReport find_roots(const LinearDelaySystem& sys, const Region& region, const RootSearchOptions& opt) {
  if (!(region.re_max > region.re_min && region.im_max > region.im_min) || !std::isfinite(region.re_min) ||
      !std::isfinite(region.re_max) || !std::isfinite(region.im_min) || !std::isfinite(region.im_max)) {
    throw Error(ErrorCode::kInvalidArgument, "region must be a bounded non-empty rectangle");
  }
  const CharacteristicMatrix delta(sys);
  SpectralReport rep;
  rep.region = region;
  rep.winding_count = argument_principle_count(delta, region);
  std::vector<CharacteristicRoot> raw;
  CellSearch search{delta, opt, raw};
  search.process(region, rep.winding_count, 0);

  for (const auto& r : raw) {
    const bool dup = std::any_of(rep.roots.begin(), rep.roots.end(), [&](const CharacteristicRoot& q) {
      return std::abs(q.z - r.z) < opt.dedup_radius;
    });
    if (!dup) rep.roots.push_back(r);
  }
  // real coefficients: roots pair up with their conjugates
  const std::size_t count = rep.roots.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Complex c = std::conj(rep.roots[i].z);
    if (std::abs(c.imag()) < opt.dedup_radius) continue;
    if (!search.inside(region, c, 0.0)) continue;
    const bool present = std::any_of(rep.roots.begin(), rep.roots.end(),
                                     [&](const CharacteristicRoot& q) { return std::abs(q.z - c) < opt.dedup_radius; });
    if (!present) {
      Complex z = c;
      search.newton(z, rep.roots[i].multiplicity);
      rep.roots.push_back({z, std::abs(delta.det(z)), rep.roots[i].multiplicity});
    }
  }
  std::sort(rep.roots.begin(), rep.roots.end(), [](const CharacteristicRoot& a, const CharacteristicRoot& b) {
    if (a.z.real() != b.z.real()) return a.z.real() > b.z.real();
    return a.z.imag() > b.z.imag();
  });
  for (const auto& r : rep.roots) rep.abscissa = std::max(rep.abscissa, r.z.real());
  return rep;
}

SpectralReport spectral_report(const LinearDelaySystem& sys) {
  const double r = sys.delay;
  const auto op = [](const Eigen::MatrixXd& m) { return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0); };
  const double a0 = op(sys.drift_state);
  const double a1 = op(sys.drift_delay);
  const double tv = sys.measure.total_variation(r);
  // roots with Re z >= 0 satisfy |z| <= a0 + a1 tv
  const double upper = a0 + a1 * tv;
  const double limit = -50.0 / r;
  Region region{upper - 1.0, upper + 1.0, 0.0, 0.0};
  double width = 2.0;
  for (;;) {
    const double decay = std::max(0.0, -region.re_min) * r;
    const double im_bound = a0 + a1 * tv * std::exp(decay) + 1.0;
    region.im_min = -im_bound;
    region.im_max = im_bound;
    SpectralReport rep;
    bool ok = false;
    for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
      try {
        rep = find_roots(sys, region);
        ok = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kBoundaryRoot) throw;
        region.re_min -= 0.0173 * width;  // nudge the left edge off the root
      }
    }
    if (!ok) throw Error(ErrorCode::kBoundaryRoot, "could not place the search box off the roots");
    if (!rep.roots.empty() && rep.abscissa > region.re_min + 1e-3 * width) return rep;
    width *= 2.0;
    region.re_min = region.re_max - width;
    if (region.re_min < limit) {
      throw Error(ErrorCode::kRegionLimit, "no characteristic root found with Re z >= -50/r");
    }
  }
}

double spectral_abscissa(const LinearDelaySystem& sys) { return spectral_report(sys).abscissa; }

// ---------------------------------------------------------------------------
// Method of steps

Eigen::MatrixXd semigroup_trajectory(const LinearDelaySystem& sys, const Eigen::MatrixXd& xi, double t) {
  const int lag = static_cast<int>(xi.cols()) - 1;
  const int n = sys.dim();
  if (lag < 1 || xi.rows() != n) throw Error(ErrorCode::kInvalidArgument, "initial segment must be n x (M+1)");
  if (t < 0.0) throw Error(ErrorCode::kInvalidArgument, "semigroup time must be non-negative");
  const double h = sys.delay / lag;
  const int steps = grid_index(t, h, "semigroup time");
  const bool use_measure = !sys.measure.empty();
  Eigen::MatrixXd y(n, lag + steps + 1);
  y.leftCols(lag + 1) = xi;
  const auto drift = [&](int col) {
    Eigen::VectorXd a = sys.drift_state * y.col(col);
    if (use_measure) {
      a.noalias() += sys.drift_delay * measure_integral(y.middleCols(col - lag, lag + 1), sys.measure, sys.delay, h);
    }
    return a;
  };
  for (int j = 0; j < steps; ++j) {
    const int col = lag + j;
    const Eigen::VectorXd now = y.col(col);
    const Eigen::VectorXd a_now = drift(col);
    y.col(col + 1) = now + h * a_now;
    const Eigen::VectorXd a_pred = drift(col + 1);
    y.col(col + 1) = now + 0.5 * h * (a_now + a_pred);
  }
  return y;
}

Eigen::MatrixXd semigroup_apply(const LinearDelaySystem& sys, const Eigen::MatrixXd& xi, double t) {
  const Eigen::MatrixXd y = semigroup_trajectory(sys, xi, t);
  return y.rightCols(xi.cols());
}

std::vector<double> window_sup_norms(const Eigen::MatrixXd& trajectory, int lag) {
  const int cols = static_cast<int>(trajectory.cols());
  std::vector<double> norms(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) norms[static_cast<std::size_t>(c)] = trajectory.col(c).norm();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(0, cols - lag)));
  std::deque<int> window;  // indices with decreasing norms
  for (int c = 0; c < cols; ++c) {
    while (!window.empty() && norms[static_cast<std::size_t>(window.back())] <= norms[static_cast<std::size_t>(c)]) {
      window.pop_back();
    }
    window.push_back(c);
    while (window.front() < c - lag) window.pop_front();
    if (c >= lag) out.push_back(norms[static_cast<std::size_t>(window.front())]);
  }
  return out;
}

double log_slope(const std::vector<double>& times, const std::vector<double>& sup_norms, double t0, double t1) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < times.size() && k < sup_norms.size(); ++k) {
    const double t = times[k];
    if (t < t0 - 1e-12 || t > t1 + 1e-12 || !(sup_norms[k] > 0.0)) continue;
    const double ly = std::log(sup_norms[k]);
    sx += t;
    sy += ly;
    sxx += t * t;
    sxy += t * ly;
    ++count;
  }
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = count * sxx - sx * sx;
  if (denom <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (count * sxy - sx * sy) / denom;
}

double decay_rate_estimate(const LinearDelaySystem& sys, double horizon, int segments) {
  if (horizon < 20.0 * sys.delay * (1.0 - 1e-12)) {
    throw Error(ErrorCode::kInvalidArgument, "decay estimate needs T >= 20 r");
  }
  const int n = sys.dim();
  const int lag = segments;
  const double h = sys.delay / lag;
  std::vector<double> times;
  double worst = -std::numeric_limits<double>::infinity();
  for (int coord = 0; coord < n; ++coord) {
    for (int profile = 0; profile < 3; ++profile) {
      Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, lag + 1);
      for (int k = 0; k <= lag; ++k) {
        const double theta = -sys.delay + k * h;
        const double s = theta / sys.delay;  // in [-1, 0]
        xi(coord, k) = profile == 0 ? 1.0 : profile == 1 ? 1.0 + s : std::cos(std::numbers::pi * s);
      }
      const Eigen::MatrixXd traj = semigroup_trajectory(sys, xi, horizon);
      const std::vector<double> sup = window_sup_norms(traj, lag);
      if (times.size() != sup.size()) {
        times.resize(sup.size());
        for (std::size_t k = 0; k < sup.size(); ++k) times[k] = static_cast<double>(k) * h;
      }
      const double slope = log_slope(times, sup, 0.5 * horizon, horizon);
      if (std::isfinite(slope)) worst = std::max(worst, slope);
    }
  }
  return worst;
}

}  // namespace rdde
