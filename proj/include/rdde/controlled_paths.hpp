#pragma once

// Controlled and delayed-controlled path segments, and the diffusion map G.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "rdde/delayed_rough_lift.hpp"

namespace rdde {

/// Path y with Gubinelli derivative y' on the nodes begin..begin+M (time indices).
/// derivs column k stores y'_k as an n x d matrix in column-major order.
struct ControlledSegment {
  int begin = 0;
  double step = 0.0;
  Eigen::MatrixXd values;  // n x (M+1)
  Eigen::MatrixXd derivs;  // (n*d) x (M+1)

  int dim() const noexcept { return static_cast<int>(values.rows()); }
  int noise_dim() const noexcept { return dim() == 0 ? 0 : static_cast<int>(derivs.rows()) / dim(); }
  int num_nodes() const noexcept { return static_cast<int>(values.cols()); }
  int end() const noexcept { return begin + num_nodes() - 1; }

  Eigen::Map<const Eigen::MatrixXd> deriv(int node) const {
    return {derivs.col(node).data(), dim(), noise_dim()};
  }
  Eigen::Map<Eigen::MatrixXd> deriv(int node) { return {derivs.col(node).data(), dim(), noise_dim()}; }

  /// Embeds plain (Lipschitz) data with y' = 0.
  static ControlledSegment smooth(int begin, double step, Eigen::MatrixXd values, int noise_dim);
};

/// zeta with Gubinelli derivatives zeta0 (against dX) and zeta1 (against dX(-r)).
/// zeta column k is an n x d matrix; zeta0/zeta1 column k is an n x (d*d)
/// matrix whose column (i + d*j) is (D zeta . e_i) e_j, so that
///   zeta0_k XX = zeta0_k * vec(XX)  (column-major vec).
struct DelayedControlledSegment {
  int begin = 0;
  double step = 0.0;
  int n = 0;
  int d = 0;
  Eigen::MatrixXd zeta;   // (n*d) x nodes
  Eigen::MatrixXd zeta0;  // (n*d*d) x nodes
  Eigen::MatrixXd zeta1;  // (n*d*d) x nodes

  int num_nodes() const noexcept { return static_cast<int>(zeta.cols()); }
  int end() const noexcept { return begin + num_nodes() - 1; }
  Eigen::Map<const Eigen::MatrixXd> value(int node) const { return {zeta.col(node).data(), n, d}; }
  Eigen::Map<const Eigen::MatrixXd> d0(int node) const { return {zeta0.col(node).data(), n, d * d}; }
  Eigen::Map<const Eigen::MatrixXd> d1(int node) const { return {zeta1.col(node).data(), n, d * d}; }
};

/// Diffusion coefficient G : R^n x R^n -> L(R^d, R^n) with derivative oracles.
///
/// first(x, y, dx, dy)  = DG_(x,y)[(dx, dy)]
/// second(x, y, a, b)   = D^2G_(x,y)[(a_x, a_y), (b_x, b_y)]
/// Missing oracles fall back to central differences (lower accuracy).
class SmoothMapG {
 public:
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  using ValueFn = std::function<Mat(const Vec& x, const Vec& y)>;
  using FirstFn = std::function<Mat(const Vec& x, const Vec& y, const Vec& dx, const Vec& dy)>;
  using SecondFn = std::function<Mat(const Vec& x, const Vec& y, const Vec& ax, const Vec& ay, const Vec& bx,
                                     const Vec& by)>;

  SmoothMapG(int n, int d, ValueFn value, FirstFn first = {}, SecondFn second = {}, int smoothness = 4,
             double bound = std::numeric_limits<double>::infinity());

  int state_dim() const noexcept { return n_; }
  int noise_dim() const noexcept { return d_; }
  int smoothness() const noexcept { return smoothness_; }
  double bound() const noexcept { return bound_; }
  bool has_analytic_first() const noexcept { return static_cast<bool>(first_); }
  bool has_analytic_second() const noexcept { return static_cast<bool>(second_); }
  /// Set for maps known to vanish identically (lets callers skip work).
  bool is_zero() const noexcept { return zero_; }

  Mat operator()(const Vec& x, const Vec& y) const;
  Mat first(const Vec& x, const Vec& y, const Vec& dx, const Vec& dy) const;
  Mat second(const Vec& x, const Vec& y, const Vec& ax, const Vec& ay, const Vec& bx, const Vec& by) const;

  /// Derivatives computed by central differences regardless of the oracles.
  Mat first_fd(const Vec& x, const Vec& y, const Vec& dx, const Vec& dy, double delta = 1e-6) const;

  /// eps * G, with all derivative oracles scaled alike.
  SmoothMapG scaled(double eps) const;

  static SmoothMapG zero(int n, int d);

 private:
  int n_, d_;
  ValueFn value_;
  FirstFn first_;
  SecondFn second_;
  int smoothness_;
  double bound_;
  bool zero_ = false;
};

/// Built-in column maps: G(x, y) e_j = scale * (c_j + phi(L_j x + K_j y)),
/// phi applied elementwise.
enum class Saturation { kLinear, kTanh, kBoundedPolynomial };

struct ColumnMap {
  Eigen::VectorXd offset;  // c_j
  Eigen::MatrixXd L;       // n x n
  Eigen::MatrixXd K;       // n x n
};

/// phi for kBoundedPolynomial is (a1 u + a2 u^2) / (1 + u^2).
SmoothMapG column_map(Saturation kind, std::vector<ColumnMap> columns, double scale = 1.0, double a1 = 1.0,
                      double a2 = 0.0);

/// Max relative error of the supplied first derivative against central
/// differences at `probes` random points with step `delta`.
double check_first_derivative(const SmoothMapG& g, int probes = 100, double delta = 1e-4,
                              std::uint64_t seed = 7, double radius = 1.0);

/// |y|_inf + |y'|_inf + ||y'||_beta + ||y#||_2beta, all discrete over grid pairs,
/// with y#_{s,t} = y_t - y_s - y'_s X_{s,t}.
double controlled_norm(const ControlledSegment& seg, double beta, const DelayedRoughPath& drp);

/// ||y#||_2beta alone (brute force over all pairs).
double remainder_seminorm(const ControlledSegment& seg, double beta, const DelayedRoughPath& drp);

/// ||zeta#||_2beta with zeta#_{s,t} = zeta_t - zeta_s - zeta0_s X_{s,t} - zeta1_s X_{s-r,t-r}.
double delayed_remainder_seminorm(const DelayedControlledSegment& seg, double beta, const DelayedRoughPath& drp);

/// zeta_u = G(y_u, y~_{u-r}), zeta0_u = dG/dx . y'_u, zeta1_u = dG/dy . y~'_{u-r}.
/// `y_delayed` must cover the window of `y_now` moved back by delay_steps.
DelayedControlledSegment compose_with_G(const ControlledSegment& y_now, const ControlledSegment& y_delayed,
                                        const SmoothMapG& g, int delay_steps);

}  // namespace rdde
