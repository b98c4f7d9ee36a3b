#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rdde/dde_spectrum.hpp"
#include "rdde/error.hpp"
#include "support/oracles.hpp"

using namespace rdde;

namespace {

using Mat = Eigen::MatrixXd;

bool has_conjugate(const std::vector<CharacteristicRoot>& roots, Complex z) {
  for (const auto& r : roots) {
    if (std::abs(r.z - std::conj(z)) < 1e-8) return true;
  }
  return false;
}

int total_multiplicity(const SpectralReport& rep) {
  int m = 0;
  for (const auto& r : rep.roots) m += r.multiplicity;
  return m;
}

}  // namespace

TEST_CASE("characteristic determinant") {
  SUBCASE("scalar discrete delay") {
    const LinearDelaySystem sys = LinearDelaySystem::scalar(-0.7, 1.3, 0.8);
    for (Complex z : {Complex(0.3, 0.0), Complex(-1.0, 2.0), Complex(2.5, -4.0)}) {
      const Complex expected = z + 0.7 - 1.3 * std::exp(-z * 0.8);
      CHECK(std::abs(char_det(z, sys) - expected) < 1e-13 * (1.0 + std::abs(expected)));
    }
  }
  SUBCASE("zero drift gives z^n") {
    LinearDelaySystem sys;
    sys.delay = 1.0;
    sys.drift_state = Mat::Zero(3, 3);
    sys.drift_delay = Mat::Zero(3, 3);
    for (Complex z : {Complex(0.5, 0.5), Complex(-2.0, 1.0)}) CHECK(std::abs(char_det(z, sys) - z * z * z) < 1e-13);
  }
  SUBCASE("forced imaginary root") {
    const double r = 0.7;
    const LinearDelaySystem sys = LinearDelaySystem::scalar(0.0, -M_PI / (2 * r), r);
    CHECK(std::abs(char_det(Complex(0.0, M_PI / (2 * r)), sys)) < 1e-12);
  }
  SUBCASE("uniform density") {
    LinearDelaySystem sys;
    sys.delay = 1.5;
    sys.drift_state = Mat::Constant(1, 1, -0.5);
    sys.drift_delay = Mat::Constant(1, 1, 0.8);
    sys.measure.density_cells = {Mat::Identity(1, 1)};
    const CharacteristicMatrix delta(sys);
    for (Complex z : {Complex(0.4, 1.0), Complex(-1.0, -3.0)}) {
      const Complex expected = z + 0.5 - 0.8 * (1.0 - std::exp(-z * 1.5)) / z;
      CHECK(std::abs(char_det(z, sys) - expected) < 1e-6 * std::abs(expected));  // 64-panel Simpson
      CHECK(delta.quadrature_check(z) < 1e-5);
      // derivative against a central difference
      const Complex dz(1e-6, 0.0);
      const Complex fd = (delta.det(z + dz) - delta.det(z - dz)) / (2.0 * dz);
      CHECK(std::abs(delta.derivative(z)(0, 0) - fd) < 1e-7);
      CHECK(std::abs(delta.log_derivative(z) - fd / delta.det(z)) < 1e-6);
    }
  }
}

TEST_CASE("root enumeration") {
  SUBCASE("pure decay") {
    const SpectralReport rep = find_roots(LinearDelaySystem::scalar(-1.0, 0.0, 1.0), Region{-3.0, 2.0, -5.0, 5.0});
    REQUIRE(rep.roots.size() == 1);
    CHECK(std::abs(rep.roots[0].z - Complex(-1.0, 0.0)) < 1e-12);
    CHECK(rep.winding_count == 1);
  }
  SUBCASE("roots on the imaginary axis") {
    const SpectralReport rep =
        find_roots(LinearDelaySystem::scalar(0.0, -M_PI / 2, 1.0), Region{-1.0, 1.0, -3.0, 3.0});
    REQUIRE(rep.roots.size() == 2);
    CHECK(std::abs(rep.abscissa) < 1e-8);
    CHECK(has_conjugate(rep.roots, Complex(0.0, M_PI / 2)));
    CHECK(std::abs(std::abs(rep.roots[0].z.imag()) - M_PI / 2) < 1e-10);
  }
  SUBCASE("principal pair agrees with an independent bisection") {
    const Complex oracle_root = oracle::principal_root_negative_unit_delay();
    const SpectralReport rep = find_roots(LinearDelaySystem::scalar(0.0, -1.0, 1.0), Region{-3.0, 1.0, -10.0, 10.0});
    REQUIRE(!rep.roots.empty());
    const Complex top = rep.roots.front().z;
    CHECK(top.real() < 0.0);
    CHECK(std::abs(top.real() - oracle_root.real()) < 1e-8);
    CHECK(std::abs(std::abs(top.imag()) - std::abs(oracle_root.imag())) < 1e-8);
  }
  SUBCASE("zero drift: root of full multiplicity") {
    LinearDelaySystem sys;
    sys.delay = 1.0;
    sys.drift_state = Mat::Zero(2, 2);
    sys.drift_delay = Mat::Zero(2, 2);
    const SpectralReport rep = find_roots(sys, Region{-1.1, 0.9, -1.3, 1.7});
    REQUIRE(rep.roots.size() == 1);
    CHECK(std::abs(rep.roots[0].z) < 1e-6);
    CHECK(rep.roots[0].multiplicity == 2);
    CHECK(rep.winding_count == 2);
  }
  SUBCASE("many roots: residuals, conjugate pairs and counts") {
    const LinearDelaySystem sys = LinearDelaySystem::scalar(-2.0, 1.0, 1.0);
    const SpectralReport rep = find_roots(sys, Region{-6.0, 1.0, -60.0, 60.0});
    CHECK(rep.roots.size() > 10);
    CHECK(total_multiplicity(rep) == rep.winding_count);
    for (const auto& r : rep.roots) {
      CHECK(r.residual < 1e-8);
      CHECK(has_conjugate(rep.roots, r.z));
    }
    for (std::size_t i = 1; i < rep.roots.size(); ++i) CHECK(rep.roots[i].z.real() <= rep.roots[i - 1].z.real() + 1e-12);
    // every sub-rectangle: winding number equals the roots found inside it
    const CharacteristicMatrix delta(sys);
    for (const Region& cell : {Region{-6.0, -2.5, -60.0, 0.5}, Region{-2.5, 1.0, 0.5, 60.0}, Region{-4.1, 0.3, -20.2, 31.7}}) {
      int inside = 0;
      for (const auto& r : rep.roots) {
        if (r.z.real() > cell.re_min && r.z.real() < cell.re_max && r.z.imag() > cell.im_min && r.z.imag() < cell.im_max) {
          inside += r.multiplicity;
        }
      }
      CHECK(argument_principle_count(delta, cell) == inside);
    }
  }
  SUBCASE("boundary through a root is reported") {
    try {
      find_roots(LinearDelaySystem::scalar(0.0, -M_PI / 2, 1.0), Region{-1.0, 1.0, -1.0, M_PI / 2});
      FAIL("boundary root not detected");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBoundaryRoot);
    }
  }
  SUBCASE("two-dimensional system with a density") {
    LinearDelaySystem sys;
    sys.delay = 1.0;
    sys.drift_state = (Mat(2, 2) << -1.0, 0.5, 0.0, -2.0).finished();
    sys.drift_delay = (Mat(2, 2) << 0.3, 0.0, 0.2, 0.4).finished();
    sys.measure.density_cells = {Mat::Identity(2, 2), 0.5 * Mat::Identity(2, 2)};
    const SpectralReport rep = find_roots(sys, Region{-8.0, 2.0, -30.0, 30.0});
    CHECK(total_multiplicity(rep) == rep.winding_count);
    for (const auto& r : rep.roots) CHECK(r.residual < 1e-8);
  }
}

TEST_CASE("spectral abscissa") {
  CHECK(std::abs(spectral_abscissa(LinearDelaySystem::scalar(-1.0, 0.0, 1.0)) + 1.0) < 1e-10);
  CHECK(std::abs(spectral_abscissa(LinearDelaySystem::scalar(0.0, -M_PI / 2, 1.0))) < 1e-8);
  const double hayes = spectral_abscissa(LinearDelaySystem::scalar(0.0, -1.0, 1.0));
  CHECK(hayes < 0.0);
  CHECK(std::abs(hayes - oracle::principal_root_negative_unit_delay().real()) < 1e-8);
  // real dominant root of z = a + b e^{-z r}
  const double real_case = spectral_abscissa(LinearDelaySystem::scalar(-1.0, 0.2, 1.0));
  CHECK(std::abs(real_case - oracle::real_root(-1.0, 0.2, 1.0, -2.0, 0.0)) < 1e-9);
  // unstable case
  const double unstable = spectral_abscissa(LinearDelaySystem::scalar(0.5, 0.3, 2.0));
  CHECK(std::abs(unstable - oracle::real_root(0.5, 0.3, 2.0, 0.0, 2.0)) < 1e-9);
  const SpectralReport rep = spectral_report(LinearDelaySystem::scalar(-1.0, 0.2, 1.0));
  CHECK(rep.abscissa > rep.region.re_min);
  CHECK(rep.abscissa < rep.region.re_max);
}

TEST_CASE("method-of-steps semigroup") {
  const LinearDelaySystem sys = LinearDelaySystem::scalar(-0.4, -0.9, 1.0);
  Mat xi(1, 101);
  for (int k = 0; k <= 100; ++k) xi(0, k) = std::sin(0.07 * k) - 0.3;
  CHECK(semigroup_apply(sys, xi, 0.0) == xi);
  const Mat st = semigroup_apply(sys, xi, 2.5);
  const Mat s_then_t = semigroup_apply(sys, semigroup_apply(sys, xi, 1.2), 1.3);
  CHECK(st == s_then_t);
  const Mat traj = semigroup_trajectory(sys, xi, 2.5);
  CHECK(traj.cols() == 351);
  CHECK(traj.rightCols(101) == st);

  const LinearDelaySystem pure = LinearDelaySystem::scalar(0.0, 1.0, 1.0);
  const Mat ones = Mat::Ones(1, 1001);
  CHECK(std::abs(semigroup_apply(pure, ones, 1.0)(0, 1000) - 2.0) < 1e-4);
  CHECK(std::abs(semigroup_apply(pure, ones, 2.0)(0, 1000) - 3.5) < 1e-4);
  CHECK_THROWS_AS(semigroup_apply(sys, xi, -1.0), Error);
}

TEST_CASE("decay rate estimates") {
  CHECK(std::abs(decay_rate_estimate(LinearDelaySystem::scalar(-1.0, 0.0, 1.0), 40.0) + 1.0) < 1e-2);
  CHECK(std::abs(decay_rate_estimate(LinearDelaySystem::scalar(0.0, -M_PI / 2, 1.0), 100.0)) < 5e-2);
  const LinearDelaySystem hayes = LinearDelaySystem::scalar(0.0, -1.0, 1.0);
  const double lambda = spectral_abscissa(hayes);
  CHECK(std::abs(decay_rate_estimate(hayes, 100.0) - lambda) < 1e-2);
  CHECK_THROWS_AS(decay_rate_estimate(hayes, 10.0), Error);

  // no tested initial segment decays slower than lambda + 1e-2
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const int lag = 64;
  for (int trial = 0; trial < 5; ++trial) {
    Mat xi(1, lag + 1);
    for (int k = 0; k <= lag; ++k) xi(0, k) = g(rng);
    const Mat traj = semigroup_trajectory(hayes, xi, 60.0);
    const std::vector<double> sup = window_sup_norms(traj, lag);
    std::vector<double> times(sup.size());
    for (std::size_t k = 0; k < sup.size(); ++k) times[k] = static_cast<double>(k) / lag;
    CHECK(log_slope(times, sup, 30.0, 60.0) <= lambda + 1e-2);
  }
}

TEST_CASE("smoothing after one delay: discrete Lipschitz bound") {
  const double a = -0.6, b = 1.1;
  const LinearDelaySystem sys = LinearDelaySystem::scalar(a, b, 1.0);
  const int lag = 200;
  const double h = 1.0 / lag;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Mat xi(1, lag + 1);
    for (int k = 0; k <= lag; ++k) xi(0, k) = u(rng);  // rough, unit sup norm
    for (double t : {1.0, 2.0, 3.0}) {
      const Mat now = semigroup_apply(sys, xi, t);
      const Mat before = semigroup_apply(sys, xi, t - 1.0);
      double lip = 0.0;
      for (int k = 0; k < lag; ++k) lip = std::max(lip, std::abs(now(0, k + 1) - now(0, k)) / h);
      const double bound = std::max(std::abs(a), std::abs(b)) *
                           (now.cwiseAbs().maxCoeff() + before.cwiseAbs().maxCoeff());
      CHECK(lip <= bound * (1.0 + 1e-9));
    }
  }
}
