#pragma once

// Reference computations used only by the tests. Each one is written out
// directly from its defining formula and shares no code with the library.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

struct MeanStat {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStat mean_stat(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= (n - 1.0);
  return {m, std::sqrt(v / n)};
}

/// Least-squares slope of y against x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// y' = y(t - 1), y = 1 on [-1, 0]: y(t) = sum_{j >= 0, t >= j - 1} (t - j + 1)^j / j!.
inline double pure_delay_constant_history(double t) {
  double y = 0.0;
  double fact = 1.0;
  for (int j = 0; t - (j - 1) >= 0.0; ++j) {
    if (j > 0) fact *= j;
    y += std::pow(t - (j - 1), j) / fact;
  }
  return y;
}

/// Principal root of z + e^{-z} = 0 (y' = -y(t - 1)) by bisection on the
/// imaginary part: writing z = x + iy gives x = -y cot y and e^{-x} = y / sin y,
/// i.e. f(y) = y cot y - log(y / sin y) = 0 on (0, pi).
inline std::complex<double> principal_root_negative_unit_delay() {
  const auto f = [](double y) { return y / std::tan(y) - std::log(y / std::sin(y)); };
  double lo = 1e-6, hi = std::numbers::pi - 1e-9;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) > 0) == (f(mid) > 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double y = 0.5 * (lo + hi);
  return {-y / std::tan(y), y};
}

/// Real root of z - a - b e^{-z r} by bisection on [lo, hi].
inline double real_root(double a, double b, double r, double lo, double hi) {
  const auto f = [&](double z) { return z - a - b * std::exp(-z * r); };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) > 0) == (f(mid) > 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Iterated integrals of the piecewise-linear interpolant over [t_i, t_j] by
/// the double sum  sum_{k<l} dX_k (x) dX_l + 1/2 sum_k dX_k (x) dX_k, where
/// `x` holds node values (d x nodes) and `lag` shifts the first factor back.
inline Eigen::MatrixXd double_sum_area(const Eigen::MatrixXd& x, int i, int j, int lag = 0) {
  const Eigen::Index d = x.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (int l = i; l < j; ++l) {
    const Eigen::VectorXd dl = x.col(l + 1) - x.col(l);
    for (int k = i; k < l; ++k) out += (x.col(k - lag + 1) - x.col(k - lag)) * dl.transpose();
    out += 0.5 * (x.col(l - lag + 1) - x.col(l - lag)) * dl.transpose();
  }
  return out;
}

/// Composite Gauss-Legendre (5 points) of f over [a, b] with n panels.
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b, int n) {
  static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                               0.9061798459386640};
  static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const double w = (b - a) / n;
  double acc = 0.0;
  for (int p = 0; p < n; ++p) {
    const double c = a + (p + 0.5) * w;
    for (int q = 0; q < 5; ++q) acc += wg[q] * f(c + 0.5 * w * xg[q]);
  }
  return acc * 0.5 * w;
}

}  // namespace oracle
