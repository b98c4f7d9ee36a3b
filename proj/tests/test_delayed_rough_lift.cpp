#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rdde/delayed_rough_lift.hpp"
#include "rdde/error.hpp"
#include "support/oracles.hpp"

using namespace rdde;

namespace {

SampledPath linear_path(const Eigen::VectorXd& v, double step, int left, int right) {
  SampledPath p;
  p.grid = UniformGrid{step, left + right, left};
  p.values.resize(v.size(), left + right + 1);
  for (int k = 0; k <= left + right; ++k) p.values.col(k) = v * p.grid.time(k);
  return p;
}

SampledPath fbm(double hurst, int dim, double step, double back, double fwd, std::uint64_t seed, int index = 0) {
  const FbmSampler s(UniformGrid::over(step, back, fwd), HurstParam(hurst), dim);
  return s.sample(seed, static_cast<std::uint64_t>(index));
}

double brute_chen(const PairAreaTable& t) {
  double worst = 0.0;
  for (int s = t.begin(); s <= t.end(); ++s) {
    for (int u = s + 1; u <= t.end(); ++u) {
      for (int e = u + 1; e <= t.end(); ++e) {
        const Eigen::VectorXd xsu = t.value(u) - t.value(s);
        const Eigen::VectorXd xut = t.value(e) - t.value(u);
        const Eigen::VectorXd dsu = t.value(u - t.delay_steps()) - t.value(s - t.delay_steps());
        const Eigen::MatrixXd r1 = t.area(s, e) - t.area(s, u) - t.area(u, e) - xsu * xut.transpose();
        const Eigen::MatrixXd r2 =
            t.delayed_area(s, e) - t.delayed_area(s, u) - t.delayed_area(u, e) - dsu * xut.transpose();
        worst = std::max(worst, r1.norm() / (1.0 + t.area(s, e).norm()));
        worst = std::max(worst, r2.norm() / (1.0 + t.delayed_area(s, e).norm()));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("areas of a straight line") {
  Eigen::VectorXd v(2);
  v << 0.7, -1.3;
  const double h = 0.05;
  const DelayedRoughPath drp = lift_piecewise_linear(linear_path(v, h, 10, 40), 10);
  for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {0, 40}, {3, 17}, {12, 13}}) {
    const double dt = (j - i) * h;
    const Eigen::MatrixXd expected = 0.5 * dt * dt * v * v.transpose();
    CHECK((drp.area(i, j) - expected).norm() < 1e-12);
    CHECK((drp.delayed_area(i, j) - expected).norm() < 1e-12);
  }
}

TEST_CASE("lift agrees with the double-sum iterated integrals") {
  const SampledPath p = fbm(0.4, 2, 1.0 / 64, 0.25, 1.0, 31);
  const int lag = 16;
  const DelayedRoughPath drp = lift_piecewise_linear(p, lag);
  const int o = p.grid.origin_index;
  for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {0, 64}, {5, 37}, {20, 21}, {63, 64}}) {
    CHECK((drp.area(i, j) - oracle::double_sum_area(p.values, o + i, o + j)).norm() < 1e-12);
    CHECK((drp.delayed_area(i, j) - oracle::double_sum_area(p.values, o + i, o + j, lag)).norm() < 1e-12);
  }
  // cell tensors: symmetric area, delayed area = 1/2 dX_{j-K} (x) dX_j
  const Eigen::VectorXd d0 = drp.increment(9, 10);
  const Eigen::VectorXd dk = drp.increment(9 - lag, 10 - lag);
  CHECK((Eigen::MatrixXd(drp.cell_area(9)) - 0.5 * d0 * d0.transpose()).norm() < 1e-15);
  CHECK((Eigen::MatrixXd(drp.cell_delayed_area(9)) - 0.5 * dk * d0.transpose()).norm() < 1e-15);
}

TEST_CASE("materialised pair table matches Chen reconstruction") {
  const SampledPath p = fbm(0.35, 2, 1.0 / 32, 0.5, 1.0, 4);
  const DelayedRoughPath drp = lift_piecewise_linear(p, 16);
  const PairAreaTable t = materialize_pairs(drp, 0, 32);
  for (int i = 0; i <= 32; i += 3) {
    for (int j = i; j <= 32; j += 5) {
      CHECK((Eigen::MatrixXd(t.area(i, j)) - drp.area(i, j)).norm() < 1e-12);
      CHECK((Eigen::MatrixXd(t.delayed_area(i, j)) - drp.delayed_area(i, j)).norm() < 1e-12);
    }
  }
}

TEST_CASE("Chen identities hold on fresh lifts") {
  for (double hurst : {0.35, 0.4, 0.5}) {
    const DelayedRoughPath small = lift_piecewise_linear(fbm(hurst, 2, 1.0 / 32, 0.25, 1.0, 9), 8);
    CHECK(validate_chen(small) < 1e-10);
    const DelayedRoughPath big = lift_piecewise_linear(fbm(hurst, 2, 1.0 / 512, 0.25, 1.0, 9), 128);
    CHECK(validate_chen(big) < 1e-10);
  }
}

TEST_CASE("a perturbed area entry is detected") {
  const DelayedRoughPath drp = lift_piecewise_linear(fbm(0.4, 2, 1.0 / 32, 0.5, 0.75, 12), 16);
  PairAreaTable t = materialize_pairs(drp, 0, 24);
  CHECK(validate_chen(t) < 1e-10);
  t.area(5, 14)(0, 1) += 1e-3;
  const double reported = validate_chen(t);
  CHECK(reported >= 1e-4);
  CHECK(reported == doctest::Approx(brute_chen(t)).epsilon(1e-9));

  PairAreaTable d = materialize_pairs(drp, 0, 24);
  d.delayed_area(2, 20)(1, 0) -= 1e-3;
  CHECK(validate_chen(d) >= 1e-4);
  CHECK(validate_chen(d) == doctest::Approx(brute_chen(d)).epsilon(1e-9));
}

TEST_CASE("single-cell windows have no Chen triples") {
  const DelayedRoughPath drp = lift_piecewise_linear(fbm(0.4, 1, 0.1, 0.2, 1.0, 1), 2);
  CHECK(validate_chen(materialize_pairs(drp, 3, 4)) == 0.0);
}

TEST_CASE("lift preconditions") {
  const SampledPath p = fbm(0.4, 1, 0.1, 0.2, 0.3, 1);
  try {
    lift_piecewise_linear(p, 5);
    FAIL("lift without a window accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientHistory);
  }
  CHECK_THROWS_AS(lift_piecewise_linear(p, 0), Error);
  CHECK_THROWS_AS(lift_piecewise_linear(p, -1), Error);
  const DelayedRoughPath drp = lift_piecewise_linear(p, 2);
  CHECK_THROWS_AS(drp.cell_area(-1), Error);  // before the lift window
}

TEST_CASE("Hoelder norms") {
  SUBCASE("constant path") {
    SampledPath p;
    p.grid = UniformGrid{0.1, 20, 5};
    p.values = Eigen::MatrixXd::Zero(2, 21);
    const HolderNormReport r = holder_norms(lift_piecewise_linear(p, 5), 0.35);
    CHECK(r.x_gamma == 0.0);
    CHECK(r.area_2gamma == 0.0);
    CHECK(r.delayed_area_2gamma == 0.0);
    CHECK(r.total == 0.0);
  }
  SUBCASE("X_t = t on [0, 1] with gamma = 1/2") {
    Eigen::VectorXd v(1);
    v << 1.0;
    const HolderNormReport r = holder_norms(lift_piecewise_linear(linear_path(v, 1.0 / 50, 10, 50), 10), 0.5);
    CHECK(r.x_gamma == doctest::Approx(1.0));
    CHECK(r.total == doctest::Approx(r.x_gamma + r.area_2gamma + r.delayed_area_2gamma));
    CHECK(r.area_2gamma == doctest::Approx(0.5));  // (dt^2 / 2) / dt, largest at dt = 1
  }
  SUBCASE("stable under grid refinement") {
    const SampledPath fine = fbm(0.4, 1, 1.0 / 512, 0.25, 1.0, 77);
    SampledPath coarse;
    coarse.grid = UniformGrid{fine.grid.step * 2, fine.grid.num_cells / 2, fine.grid.origin_index / 2};
    coarse.values.resize(1, coarse.grid.num_nodes());
    for (int k = 0; k < coarse.grid.num_nodes(); ++k) coarse.values.col(k) = fine.values.col(2 * k);
    const double a = holder_norms(lift_piecewise_linear(fine, 128), 0.35).total;
    const double b = holder_norms(lift_piecewise_linear(coarse, 64), 0.35).total;
    CHECK(std::isfinite(a));
    CHECK(std::abs(b - a) <= 0.2 * a);
  }
  CHECK_THROWS_AS(holder_norms(lift_piecewise_linear(fbm(0.4, 1, 0.1, 0.2, 1.0, 1), 2), 0.6), Error);
  CHECK_THROWS_AS(holder_norms(lift_piecewise_linear(fbm(0.4, 1, 0.1, 0.2, 1.0, 1), 2), 0.0), Error);
}

TEST_CASE("shift is a groupoid action on the data view") {
  const DelayedRoughPath drp = lift_piecewise_linear(fbm(0.4, 2, 1.0 / 32, 0.5, 3.0, 5), 16);
  const DelayedRoughPath same = drp.shift(0);
  CHECK(same.same_view(drp));
  const DelayedRoughPath ab = drp.shift(7).shift(12);
  const DelayedRoughPath direct = drp.shift(19);
  CHECK(ab.same_view(direct));
  for (int k = -16; k <= 40; k += 3) CHECK(ab.value(k) == direct.value(k));
  for (auto [s, t] : std::vector<std::pair<int, int>>{{0, 10}, {3, 30}, {-5, 7}}) {
    if (s < ab.window_begin()) continue;
    CHECK(ab.area(s, t) == direct.area(s, t));
    CHECK(ab.delayed_area(s, t) == direct.delayed_area(s, t));
  }
  // entrywise: shifted areas over (s, t) are the original areas over (s + D, t + D)
  const int shift = 19;
  for (auto [s, t] : std::vector<std::pair<int, int>>{{0, 1}, {0, 25}, {4, 44}}) {
    CHECK(direct.area(s, t) == drp.area(s + shift, t + shift));
    CHECK(direct.delayed_area(s, t) == drp.delayed_area(s + shift, t + shift));
    CHECK(direct.increment(s, t) == drp.increment(s + shift, t + shift));
  }
  try {
    drp.shift(10000);
    FAIL("shift beyond the span accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWindowOutOfRange);
  }
  CHECK_THROWS_AS(drp.shift(-1), Error);  // origin would leave the lift window
}

TEST_CASE("zero driver") {
  const DelayedRoughPath z = zero_driver(2, 0.1, 4, -4, 20);
  CHECK(z.min_index() == -4);
  CHECK(z.window_begin() == 0);
  CHECK(z.max_index() == 20);
  CHECK(z.increment(-4, 20).norm() == 0.0);
  CHECK(z.delayed_area(0, 20).norm() == 0.0);
}

TEST_CASE("mollifier") {
  const double h = 1.0 / 128;
  SUBCASE("constant and linear paths are reproduced") {
    SampledPath c;
    c.grid = UniformGrid{h, 200, 64};
    c.values = Eigen::MatrixXd::Zero(1, 201);
    const SampledPath mc = mollify(c, 0.1, bump_profile());
    CHECK(mc.values.cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd v(2);
    v << 1.5, -0.25;
    const SampledPath lin = linear_path(v, h, 64, 136);
    const SampledPath ml = mollify(lin, 0.1, bump_profile());
    for (int k = 0; k < ml.grid.num_nodes(); ++k) {
      CHECK((ml.values.col(k) - v * ml.grid.time(k)).norm() < 1e-12);
    }
  }
  SUBCASE("argument checks") {
    const SampledPath p = fbm(0.4, 1, h, 0.5, 1.0, 3);
    try {
      mollify(p, 0.5 * h, bump_profile());
      FAIL("sub-grid epsilon accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDegenerateQuadrature);
    }
    CHECK_THROWS_AS(mollify(p, 1.5, bump_profile()), Error);
    CHECK_THROWS_AS(mollify(p, 0.1, [](double z) { return z - 0.5; }), Error);  // sign change
    CHECK_THROWS_AS(mollify(p, 0.1, [](double) { return 2.0; }), Error);         // mass 2
    CHECK_NOTHROW(mollify(p, 0.1, [](double) { return 1.0; }));
  }
  SUBCASE("converges to the path as epsilon shrinks to the grid step") {
    const SampledPath p = fbm(0.4, 1, h, 0.5, 1.0, 21);
    std::vector<double> errs;
    for (int m : {32, 16, 8, 4, 2}) {
      const SampledPath q = mollify(p, m * h, bump_profile());
      double worst = 0.0;
      const int shift = p.grid.origin_index - q.grid.origin_index;
      for (int k = 0; k < q.grid.num_nodes(); ++k) {
        worst = std::max(worst, std::abs(q.values(0, k) - p.values(0, k + shift)));
      }
      errs.push_back(worst);
    }
    CHECK(errs.back() < errs.front());
    CHECK(errs[2] < errs[0]);
    CHECK(errs[4] < errs[2]);
  }
  SUBCASE("lifts of mollified smooth paths approach the lift in the homogeneous metric") {
    SampledPath p;
    p.grid = UniformGrid{h, 192, 64};
    p.values.resize(2, 193);
    for (int k = 0; k <= 192; ++k) {
      const double t = p.grid.time(k);
      p.values(0, k) = std::sin(2.0 * M_PI * t);
      p.values(1, k) = std::cos(3.0 * t);
    }
    const int lag = 32;
    std::vector<double> dist;
    for (int m : {32, 8, 2}) {
      const SampledPath q = mollify(p, m * h, bump_profile());
      SampledPath base;
      base.grid = q.grid;
      base.values = p.values.rightCols(q.grid.num_nodes());
      const DelayedRoughPath a = lift_piecewise_linear(base, lag);
      const DelayedRoughPath b = lift_piecewise_linear(q, lag);
      CHECK(homogeneous_distance(a, a, 0.35, 0, 64) == 0.0);
      CHECK(homogeneous_distance(a, b, 0.35, 0, 64) == doctest::Approx(homogeneous_distance(b, a, 0.35, 0, 64)));
      dist.push_back(homogeneous_distance(a, b, 0.35, 0, 64));
    }
    CHECK(dist[1] < dist[0]);
    CHECK(dist[2] < dist[1]);
  }
}

TEST_CASE("delayed area mean: Monte-Carlo against the second-chaos identity") {
  const double r = 0.25, t = 0.5;
  const double h = 1.0 / 64;
  for (double hurst : {0.4, 0.5}) {
    const FbmSampler s(UniformGrid::over(h, r, t), HurstParam(hurst), 1);
    std::vector<double> samples;
    for (int p = 0; p < 3000; ++p) {
      const DelayedRoughPath drp = lift_piecewise_linear(s.sample(101, static_cast<std::uint64_t>(p)), 16);
      samples.push_back(drp.delayed_area(0, 32)(0, 0));
    }
    const auto st = oracle::mean_stat(samples);
    const double target = -hurst * std::pow(r, 2 * hurst - 1) * t + 0.5 * (std::pow(t + r, 2 * hurst) - std::pow(r, 2 * hurst));
    CHECK(std::abs(st.mean - target) < 4 * st.stderr_);
  }
}
