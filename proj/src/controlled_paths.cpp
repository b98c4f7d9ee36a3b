#include "rdde/controlled_paths.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rdde/error.hpp"

namespace rdde {

ControlledSegment ControlledSegment::smooth(int begin, double step, Eigen::MatrixXd values, int noise_dim) {
  ControlledSegment seg;
  seg.begin = begin;
  seg.step = step;
  seg.derivs = Eigen::MatrixXd::Zero(values.rows() * noise_dim, values.cols());
  seg.values = std::move(values);
  return seg;
}

// ---------------------------------------------------------------------------

SmoothMapG::SmoothMapG(int n, int d, ValueFn value, FirstFn first, SecondFn second, int smoothness,
                       double bound)
    : n_(n),
      d_(d),
      value_(std::move(value)),
      first_(std::move(first)),
      second_(std::move(second)),
      smoothness_(smoothness),
      bound_(bound) {
  if (n < 1 || d < 1) throw Error(ErrorCode::kInvalidArgument, "G needs positive dimensions");
  if (!value_) throw Error(ErrorCode::kInvalidArgument, "G needs an evaluation function");
  if (smoothness < 2) throw Error(ErrorCode::kInvalidArgument, "G must be at least C^2");
}

SmoothMapG::Mat SmoothMapG::operator()(const Vec& x, const Vec& y) const {
  if (zero_) return Mat::Zero(n_, d_);
  return value_(x, y);
}

SmoothMapG::Mat SmoothMapG::first_fd(const Vec& x, const Vec& y, const Vec& dx, const Vec& dy,
                                     double delta) const {
  const double scale = std::sqrt(dx.squaredNorm() + dy.squaredNorm());
  if (scale == 0.0) return Mat::Zero(n_, d_);
  const double t = delta / scale;
  return (value_(x + t * dx, y + t * dy) - value_(x - t * dx, y - t * dy)) / (2.0 * t);
}

SmoothMapG::Mat SmoothMapG::first(const Vec& x, const Vec& y, const Vec& dx, const Vec& dy) const {
  if (zero_) return Mat::Zero(n_, d_);
  if (first_) return first_(x, y, dx, dy);
  return first_fd(x, y, dx, dy);
}

SmoothMapG::Mat SmoothMapG::second(const Vec& x, const Vec& y, const Vec& ax, const Vec& ay, const Vec& bx,
                                   const Vec& by) const {
  if (zero_) return Mat::Zero(n_, d_);
  if (second_) return second_(x, y, ax, ay, bx, by);
  const double scale = std::sqrt(bx.squaredNorm() + by.squaredNorm());
  if (scale == 0.0) return Mat::Zero(n_, d_);
  const double t = 1e-5 / scale;
  return (first(x + t * bx, y + t * by, ax, ay) - first(x - t * bx, y - t * by, ax, ay)) / (2.0 * t);
}

SmoothMapG SmoothMapG::scaled(double eps) const {
  if (zero_) return *this;
  auto v = value_;
  SmoothMapG out(
      n_, d_, [v, eps](const Vec& x, const Vec& y) -> Mat { return eps * v(x, y); }, {}, {}, smoothness_,
      std::abs(eps) * bound_);
  if (first_) {
    auto f = first_;
    out.first_ = [f, eps](const Vec& x, const Vec& y, const Vec& dx, const Vec& dy) -> Mat {
      return eps * f(x, y, dx, dy);
    };
  }
  if (second_) {
    auto s = second_;
    out.second_ = [s, eps](const Vec& x, const Vec& y, const Vec& ax, const Vec& ay, const Vec& bx,
                           const Vec& by) -> Mat { return eps * s(x, y, ax, ay, bx, by); };
  }
  out.zero_ = (eps == 0.0);
  return out;
}

SmoothMapG SmoothMapG::zero(int n, int d) {
  SmoothMapG g(
      n, d, [n, d](const Vec&, const Vec&) -> Mat { return Mat::Zero(n, d); },
      [n, d](const Vec&, const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Zero(n, d); },
      [n, d](const Vec&, const Vec&, const Vec&, const Vec&, const Vec&, const Vec&) -> Mat {
        return Mat::Zero(n, d);
      },
      8, 0.0);
  g.zero_ = true;
  return g;
}

namespace {

struct Saturator {
  Saturation kind;
  double a1, a2;

  double phi(double u) const {
    switch (kind) {
      case Saturation::kLinear: return u;
      case Saturation::kTanh: return std::tanh(u);
      case Saturation::kBoundedPolynomial: return (a1 * u + a2 * u * u) / (1.0 + u * u);
    }
    return 0.0;
  }
  double dphi(double u) const {
    switch (kind) {
      case Saturation::kLinear: return 1.0;
      case Saturation::kTanh: {
        const double t = std::tanh(u);
        return 1.0 - t * t;
      }
      case Saturation::kBoundedPolynomial: {
        const double q = 1.0 + u * u;
        return (a1 + 2.0 * a2 * u - a1 * u * u) / (q * q);
      }
    }
    return 0.0;
  }
  double ddphi(double u) const {
    switch (kind) {
      case Saturation::kLinear: return 0.0;
      case Saturation::kTanh: {
        const double t = std::tanh(u);
        return -2.0 * t * (1.0 - t * t);
      }
      case Saturation::kBoundedPolynomial: {
        const double q = 1.0 + u * u;
        const double num = a1 + 2.0 * a2 * u - a1 * u * u;
        return ((2.0 * a2 - 2.0 * a1 * u) * q - 4.0 * u * num) / (q * q * q);
      }
    }
    return 0.0;
  }
  double sup_phi() const {
    switch (kind) {
      case Saturation::kLinear: return std::numeric_limits<double>::infinity();
      case Saturation::kTanh: return 1.0;
      case Saturation::kBoundedPolynomial: return 0.5 * std::abs(a1) + std::abs(a2);
    }
    return 0.0;
  }
};

}  // namespace

SmoothMapG column_map(Saturation kind, std::vector<ColumnMap> columns, double scale, double a1, double a2) {
  if (columns.empty()) throw Error(ErrorCode::kInvalidArgument, "column map needs at least one column");
  const int n = static_cast<int>(columns.front().L.rows());
  const int d = static_cast<int>(columns.size());
  for (auto& c : columns) {
    if (c.offset.size() == 0) c.offset = Eigen::VectorXd::Zero(n);
    if (c.L.size() == 0) c.L = Eigen::MatrixXd::Zero(n, n);
    if (c.K.size() == 0) c.K = Eigen::MatrixXd::Zero(n, n);
    if (c.offset.size() != n || c.L.rows() != n || c.L.cols() != n || c.K.rows() != n || c.K.cols() != n) {
      throw Error(ErrorCode::kInvalidArgument, "column map blocks must be n x n with length-n offsets");
    }
  }
  const auto cols = std::make_shared<const std::vector<ColumnMap>>(std::move(columns));
  const Saturator sat{kind, a1, a2};
  using Vec = SmoothMapG::Vec;
  using Mat = SmoothMapG::Mat;

  auto value = [cols, sat, scale, n, d](const Vec& x, const Vec& y) -> Mat {
    Mat out(n, d);
    for (int j = 0; j < d; ++j) {
      const auto& c = (*cols)[static_cast<std::size_t>(j)];
      const Vec u = c.L * x + c.K * y;
      for (int i = 0; i < n; ++i) out(i, j) = scale * (c.offset[i] + sat.phi(u[i]));
    }
    return out;
  };
  auto first = [cols, sat, scale, n, d](const Vec& x, const Vec& y, const Vec& dx, const Vec& dy) -> Mat {
    Mat out(n, d);
    for (int j = 0; j < d; ++j) {
      const auto& c = (*cols)[static_cast<std::size_t>(j)];
      const Vec u = c.L * x + c.K * y;
      const Vec du = c.L * dx + c.K * dy;
      for (int i = 0; i < n; ++i) out(i, j) = scale * sat.dphi(u[i]) * du[i];
    }
    return out;
  };
  auto second = [cols, sat, scale, n, d](const Vec& x, const Vec& y, const Vec& ax, const Vec& ay, const Vec& bx,
                                         const Vec& by) -> Mat {
    Mat out(n, d);
    for (int j = 0; j < d; ++j) {
      const auto& c = (*cols)[static_cast<std::size_t>(j)];
      const Vec u = c.L * x + c.K * y;
      const Vec da = c.L * ax + c.K * ay;
      const Vec db = c.L * bx + c.K * by;
      for (int i = 0; i < n; ++i) out(i, j) = scale * sat.ddphi(u[i]) * da[i] * db[i];
    }
    return out;
  };
  double offset_sup = 0.0;
  for (const auto& c : *cols) offset_sup = std::max(offset_sup, c.offset.cwiseAbs().maxCoeff());
  const double bound = std::abs(scale) * (offset_sup + sat.sup_phi());
  return SmoothMapG(n, d, value, first, second, kind == Saturation::kLinear ? 8 : 6, bound);
}

double check_first_derivative(const SmoothMapG& g, int probes, double delta, std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  const int n = g.state_dim();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd x(n), y(n), dx(n), dy(n);
    for (int i = 0; i < n; ++i) {
      x[i] = u(rng);
      y[i] = u(rng);
      dx[i] = u(rng);
      dy[i] = u(rng);
    }
    const Eigen::MatrixXd exact = g.first(x, y, dx, dy);
    const Eigen::MatrixXd fd = g.first_fd(x, y, dx, dy, delta);
    const double scale = exact.norm();
    const double err = (exact - fd).norm();
    worst = std::max(worst, scale > 1e-10 ? err / scale : err);
  }
  return worst;
}

namespace {

void check_covered(int begin, int end, const DelayedRoughPath& drp) {
  if (begin < drp.min_index() || end > drp.max_index()) {
    throw Error(ErrorCode::kWindowOutOfRange, "segment window outside the driver span");
  }
}

double holder_seminorm_of_columns(const Eigen::MatrixXd& m, double beta, double h) {
  double sup = 0.0;
  const int nodes = static_cast<int>(m.cols());
  for (int i = 0; i < nodes; ++i)
    for (int j = i + 1; j < nodes; ++j)
      sup = std::max(sup, (m.col(j) - m.col(i)).norm() / std::pow((j - i) * h, beta));
  return sup;
}

}  // namespace

double remainder_seminorm(const ControlledSegment& seg, double beta, const DelayedRoughPath& drp) {
  check_covered(seg.begin, seg.end(), drp);
  const int nodes = seg.num_nodes();
  const double h = seg.step;
  double sup = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const Eigen::VectorXd xi = drp.value(seg.begin + i);
    const auto yp = seg.deriv(i);
    for (int j = i + 1; j < nodes; ++j) {
      const Eigen::VectorXd rem = seg.values.col(j) - seg.values.col(i) - yp * (drp.value(seg.begin + j) - xi);
      sup = std::max(sup, rem.norm() / std::pow((j - i) * h, 2.0 * beta));
    }
  }
  return sup;
}

double controlled_norm(const ControlledSegment& seg, double beta, const DelayedRoughPath& drp) {
  if (seg.num_nodes() == 0) return 0.0;
  double y_sup = 0.0, d_sup = 0.0;
  for (int k = 0; k < seg.num_nodes(); ++k) {
    y_sup = std::max(y_sup, seg.values.col(k).norm());
    d_sup = std::max(d_sup, seg.derivs.col(k).norm());
  }
  return y_sup + d_sup + holder_seminorm_of_columns(seg.derivs, beta, seg.step) +
         remainder_seminorm(seg, beta, drp);
}

namespace {

// zeta0 applied to a vector v in R^d: sum_i v_i (D . e_i), an n x d matrix.
Eigen::MatrixXd apply_first_slot(const Eigen::Map<const Eigen::MatrixXd>& t, const Eigen::VectorXd& v, int n,
                                 int d) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) out.col(j) += v[i] * t.col(i + d * j);
  return out;
}

}  // namespace

double delayed_remainder_seminorm(const DelayedControlledSegment& seg, double beta, const DelayedRoughPath& drp) {
  const int lag = drp.delay_steps();
  check_covered(seg.begin - lag, seg.end(), drp);
  const int nodes = seg.num_nodes();
  double sup = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const int s = seg.begin + i;
    for (int j = i + 1; j < nodes; ++j) {
      const int t = seg.begin + j;
      const Eigen::MatrixXd rem = seg.value(j) - seg.value(i) -
                                  apply_first_slot(seg.d0(i), drp.increment(s, t), seg.n, seg.d) -
                                  apply_first_slot(seg.d1(i), drp.increment(s - lag, t - lag), seg.n, seg.d);
      sup = std::max(sup, rem.norm() / std::pow((j - i) * seg.step, 2.0 * beta));
    }
  }
  return sup;
}

DelayedControlledSegment compose_with_G(const ControlledSegment& y_now, const ControlledSegment& y_delayed,
                                        const SmoothMapG& g, int delay_steps) {
  const int n = y_now.dim();
  const int d = y_now.noise_dim();
  if (std::abs(y_now.step - y_delayed.step) > 1e-14 * y_now.step) {
    throw Error(ErrorCode::kMisaligned, "segments use different grid steps");
  }
  if (y_delayed.dim() != n || y_delayed.noise_dim() != d || g.state_dim() != n || g.noise_dim() != d) {
    throw Error(ErrorCode::kInvalidArgument, "segment and G dimensions disagree");
  }
  const int offset = y_now.begin - delay_steps - y_delayed.begin;
  if (offset < 0 || offset + y_now.num_nodes() > y_delayed.num_nodes()) {
    throw Error(ErrorCode::kMisaligned, "delayed segment does not cover the window shifted by r");
  }
  DelayedControlledSegment out;
  out.begin = y_now.begin;
  out.step = y_now.step;
  out.n = n;
  out.d = d;
  const int nodes = y_now.num_nodes();
  out.zeta.resize(n * d, nodes);
  out.zeta0.resize(n * d * d, nodes);
  out.zeta1.resize(n * d * d, nodes);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < nodes; ++k) {
    const Eigen::VectorXd x = y_now.values.col(k);
    const Eigen::VectorXd yd = y_delayed.values.col(k + offset);
    const auto xp = y_now.deriv(k);
    const auto ydp = y_delayed.deriv(k + offset);
    Eigen::Map<Eigen::MatrixXd>(out.zeta.col(k).data(), n, d) = g(x, yd);
    Eigen::Map<Eigen::MatrixXd> z0(out.zeta0.col(k).data(), n, d * d);
    Eigen::Map<Eigen::MatrixXd> z1(out.zeta1.col(k).data(), n, d * d);
    for (int i = 0; i < d; ++i) {
      const Eigen::MatrixXd di = g.first(x, yd, xp.col(i), zero);
      const Eigen::MatrixXd ei = g.first(x, yd, zero, ydp.col(i));
      for (int j = 0; j < d; ++j) {
        z0.col(i + d * j) = di.col(j);
        z1.col(i + d * j) = ei.col(j);
      }
    }
  }
  return out;
}

}  // namespace rdde
