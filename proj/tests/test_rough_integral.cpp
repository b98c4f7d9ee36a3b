#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "rdde/error.hpp"
#include "rdde/fbm_sampler.hpp"
#include "rdde/rough_integral.hpp"
#include "support/oracles.hpp"

using namespace rdde;

namespace {

using Mat = Eigen::MatrixXd;

struct Node {
  Mat value, d0, d1;
};

DelayedControlledSegment build(const DelayedRoughPath& drp, int n, int begin, int end,
                               const std::function<Node(int)>& at) {
  const int d = drp.dim();
  DelayedControlledSegment z;
  z.begin = begin;
  z.step = drp.step();
  z.n = n;
  z.d = d;
  z.zeta.resize(n * d, end - begin + 1);
  z.zeta0.resize(n * d * d, end - begin + 1);
  z.zeta1.resize(n * d * d, end - begin + 1);
  for (int k = begin; k <= end; ++k) {
    const Node v = at(k);
    z.zeta.col(k - begin) = Eigen::Map<const Eigen::VectorXd>(v.value.data(), n * d);
    z.zeta0.col(k - begin) = Eigen::Map<const Eigen::VectorXd>(v.d0.data(), n * d * d);
    z.zeta1.col(k - begin) = Eigen::Map<const Eigen::VectorXd>(v.d1.data(), n * d * d);
  }
  return z;
}

DelayedRoughPath fbm_lift(double hurst, int dim, double step, double back, double fwd, int lag, std::uint64_t seed) {
  const FbmSampler s(UniformGrid::over(step, back, fwd), HurstParam(hurst), dim);
  return lift_piecewise_linear(s.sample(seed, 0), lag);
}

// zeta = cos(X_t) + sin(X_{t-r}) for a scalar driver
DelayedControlledSegment smooth_integrand(const DelayedRoughPath& drp, int begin, int end) {
  const int lag = drp.delay_steps();
  return build(drp, 1, begin, end, [&](int k) {
    const double x = drp.value(k)[0], xd = drp.value(k - lag)[0];
    return Node{Mat::Constant(1, 1, std::cos(x) + std::sin(xd)), Mat::Constant(1, 1, -std::sin(x)),
                Mat::Constant(1, 1, std::cos(xd))};
  });
}

}  // namespace

TEST_CASE("constant integrand integrates to c times the increment") {
  const DelayedRoughPath drp = fbm_lift(0.4, 2, 1.0 / 64, 0.5, 1.0, 32, 2);
  Mat c(3, 2);
  c << 1.0, -2.0, 0.5, 0.25, 3.0, 0.0;
  const DelayedControlledSegment z =
      build(drp, 3, 0, 64, [&](int) { return Node{c, Mat::Zero(3, 4), Mat::Zero(3, 4)}; });
  const ControlledSegment I = delayed_rough_integral(z, drp, 0.25, 1.0);
  CHECK(I.begin == 16);
  CHECK(I.num_nodes() == 49);
  CHECK((I.values.col(48) - c * drp.increment(16, 64)).norm() < 1e-13);
  for (int k = 0; k < I.num_nodes(); ++k) CHECK(Mat(I.deriv(k)) == c);
  CHECK(local_expansion_residual(z, drp, 0.0, 1.0) < 1e-13);
}

TEST_CASE("Chen telescoping recovers the iterated integrals") {
  const DelayedRoughPath drp = fbm_lift(0.35, 2, 1.0 / 128, 0.5, 1.0, 64, 5);
  const int a = 10, b = 120, lag = 64;
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) {
      const DelayedControlledSegment area = build(drp, 1, a, b, [&](int u) {
        Mat v = Mat::Zero(1, 2), d0 = Mat::Zero(1, 4);
        v(0, k) = drp.increment(a, u)[i];
        d0(0, i + 2 * k) = 1.0;
        return Node{v, d0, Mat::Zero(1, 4)};
      });
      CHECK(std::abs(delayed_rough_integral_steps(area, drp, a, b).values(0, b - a) - drp.area(a, b)(i, k)) < 1e-13);

      const DelayedControlledSegment delayed = build(drp, 1, a, b, [&](int u) {
        Mat v = Mat::Zero(1, 2), d1 = Mat::Zero(1, 4);
        v(0, k) = drp.increment(a - lag, u - lag)[i];
        d1(0, i + 2 * k) = 1.0;
        return Node{v, Mat::Zero(1, 4), d1};
      });
      CHECK(std::abs(delayed_rough_integral_steps(delayed, drp, a, b).values(0, b - a) -
                     drp.delayed_area(a, b)(i, k)) < 1e-13);
    }
  }
}

TEST_CASE("smooth driver matches the classical integral") {
  // X = (sin t, cos t), zeta(X) = (X1^2, X2): int sin^2 t cos t dt - cos t sin t dt
  const auto classical = [](double a, double b) {
    return oracle::gauss_legendre(
        [](double t) { return std::sin(t) * std::sin(t) * std::cos(t) - std::cos(t) * std::sin(t); }, a, b, 64);
  };
  std::vector<double> errs;
  for (int cells : {64, 128, 256, 512}) {
    const double h = 2.0 / cells;
    const int lag = cells / 4;
    SampledPath p;
    p.grid = UniformGrid{h, cells + lag, lag};
    p.values.resize(2, cells + lag + 1);
    for (int k = 0; k <= cells + lag; ++k) {
      p.values(0, k) = std::sin(p.grid.time(k));
      p.values(1, k) = std::cos(p.grid.time(k));
    }
    const DelayedRoughPath drp = lift_piecewise_linear(p, lag);
    const DelayedControlledSegment z = build(drp, 1, 0, cells, [&](int k) {
      const Eigen::VectorXd x = p.values.col(k + lag);
      Mat v(1, 2), d0 = Mat::Zero(1, 4);
      v << x[0] * x[0], x[1];
      d0(0, 0) = 2.0 * x[0];
      d0(0, 3) = 1.0;
      return Node{v, d0, Mat::Zero(1, 4)};
    });
    const ControlledSegment I = delayed_rough_integral(z, drp, 0.0, 2.0);
    errs.push_back(std::abs(I.values(0, cells) - classical(0.0, 2.0)));
  }
  CHECK(errs.back() < 1e-3);
  for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] < errs[i - 1]);
  // observed order at least one
  CHECK(std::log2(errs.front() / errs.back()) / 3.0 > 0.9);
}

TEST_CASE("local expansion residual") {
  const DelayedRoughPath drp = fbm_lift(0.4, 1, 1.0 / 4096, 0.25, 1.0, 1024, 17);
  const DelayedControlledSegment z = smooth_integrand(drp, 0, 4096);

  SUBCASE("a single cell has no residual") {
    for (int s : {0, 17, 4095}) CHECK(local_expansion_residual_steps(z, drp, s, s + 1) < 1e-15);
  }
  SUBCASE("constant integrand has no residual on any window") {
    const DelayedControlledSegment c =
        build(drp, 1, 0, 4096, [](int) { return Node{Mat::Constant(1, 1, 0.3), Mat::Zero(1, 1), Mat::Zero(1, 1)}; });
    for (auto [s, t] : std::vector<std::pair<int, int>>{{0, 4096}, {100, 900}, {7, 9}}) {
      CHECK(local_expansion_residual_steps(c, drp, s, t) < 1e-14);
    }
  }
  SUBCASE("residual decays like a power above 2 beta + gamma - 0.15") {
    // max over a fixed set of 16 window starts, so every length sees the same number of samples;
    // log-maxima averaged over six paths
    const double beta = 0.35, gamma = 0.35;
    const std::vector<int> lengths{16, 32, 64, 128, 256};
    std::vector<double> lx, ly(lengths.size(), 0.0);
    for (int m : lengths) lx.push_back(std::log(m / 4096.0));
    const FbmSampler sampler(UniformGrid::over(1.0 / 4096, 0.25, 1.0), HurstParam(0.4), 1);
    for (int path = 0; path < 6; ++path) {
      const DelayedRoughPath x = lift_piecewise_linear(sampler.sample(17, static_cast<std::uint64_t>(path)), 1024);
      const DelayedControlledSegment zx = smooth_integrand(x, 0, 4096);
      for (std::size_t i = 0; i < lengths.size(); ++i) {
        double worst = 0.0;
        for (int w = 0; w < 16; ++w) {
          worst = std::max(worst, local_expansion_residual_steps(zx, x, 256 * w, 256 * w + lengths[i]));
        }
        ly[i] += std::log(worst) / 6.0;
      }
    }
    const double slope = oracle::slope(lx, ly);
    MESSAGE("residual slope " << slope);
    CHECK(slope >= 2 * beta + gamma - 0.15);
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      const double q = std::exp(ly[i] - (2 * beta + gamma) * lx[i]);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    CHECK(hi / lo < 10.0);
  }
}

TEST_CASE("integral is additive over adjacent windows") {
  const DelayedRoughPath drp = fbm_lift(0.4, 2, 1.0 / 128, 0.5, 1.0, 64, 23);
  const DelayedControlledSegment z = build(drp, 2, 0, 128, [&](int k) {
    const Eigen::VectorXd x = drp.value(k);
    Mat v(2, 2), d0(2, 4), d1 = Mat::Constant(2, 4, 0.1);
    v << std::sin(x[0]), x[1], 1.0, std::cos(x[1]);
    d0 << std::cos(x[0]), 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -std::sin(x[1]);
    return Node{v, d0, d1};
  });
  for (int mid : {1, 40, 77, 127}) {
    const Eigen::VectorXd whole = delayed_rough_integral_steps(z, drp, 0, 128).values.col(128);
    const Eigen::VectorXd left = delayed_rough_integral_steps(z, drp, 0, mid).values.col(mid);
    const Eigen::VectorXd right = delayed_rough_integral_steps(z, drp, mid, 128).values.col(128 - mid);
    CHECK((whole - left - right).norm() < 1e-13);
  }
}

TEST_CASE("agrees with Young integration for H = 0.75") {
  const FbmSampler s(UniformGrid::over(1.0 / 4096, 0.25, 1.0), HurstParam(0.75), 1);
  const SampledPath fine = s.sample(41, 0);
  std::vector<double> lh, ldiff;
  for (int factor : {16, 8, 4, 2, 1}) {
    SampledPath p;
    p.grid = UniformGrid{fine.grid.step * factor, fine.grid.num_cells / factor, fine.grid.origin_index / factor};
    p.values.resize(1, p.grid.num_nodes());
    for (int k = 0; k < p.grid.num_nodes(); ++k) p.values(0, k) = fine.values(0, k * factor);
    const int cells = 4096 / factor;
    const DelayedRoughPath drp = lift_piecewise_linear(p, cells / 4);
    const DelayedControlledSegment z = build(drp, 1, 0, cells, [&](int k) {
      const double x = drp.value(k)[0];
      return Node{Mat::Constant(1, 1, std::cos(x)), Mat::Constant(1, 1, -std::sin(x)), Mat::Zero(1, 1)};
    });
    const double compensated = delayed_rough_integral_steps(z, drp, 0, cells).values(0, cells);
    double riemann = 0.0;
    for (int j = 0; j < cells; ++j) riemann += std::cos(drp.value(j)[0]) * drp.increment(j, j + 1)[0];
    lh.push_back(std::log(p.grid.step));
    ldiff.push_back(std::log(std::abs(compensated - riemann)));
    // both approximate sin(X_1) - sin(X_0)
    CHECK(std::abs(compensated - (std::sin(drp.value(cells)[0]) - std::sin(drp.value(0)[0]))) < 0.05);
  }
  const double rate = oracle::slope(lh, ldiff);
  MESSAGE("Young consistency rate " << rate);
  CHECK(rate >= 2 * 0.75 - 1 - 0.15);
}

TEST_CASE("integral argument checks") {
  const DelayedRoughPath drp = fbm_lift(0.4, 1, 1.0 / 64, 0.5, 1.0, 32, 2);
  const DelayedControlledSegment z = smooth_integrand(drp, 0, 64);
  try {
    delayed_rough_integral(z, drp, 0.01, 0.5);
    FAIL("misaligned bound accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMisaligned);
  }
  try {
    delayed_rough_integral_steps(z, drp, 0, 65);
    FAIL("window overrun accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWindowOutOfRange);
  }
  CHECK_THROWS_AS(delayed_rough_integral_steps(z, drp, 10, 5), Error);
  const DelayedRoughPath other = fbm_lift(0.4, 2, 1.0 / 64, 0.5, 1.0, 32, 2);
  CHECK_THROWS_AS(delayed_rough_integral_steps(z, other, 0, 10), Error);
}
