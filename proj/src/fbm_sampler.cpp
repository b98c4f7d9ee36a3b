#include "rdde/fbm_sampler.hpp"

#include <cmath>
#include <random>

#include "rdde/error.hpp"

namespace rdde {

HurstParam::HurstParam(double value) : value_(value) {
  if (!(value > 1.0 / 3.0 && value < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Hurst parameter must lie in (1/3, 1)");
  }
}

UniformGrid UniformGrid::over(double step, double t_minus, double t_plus) {
  if (!(step > 0.0) || t_minus < 0.0 || t_plus < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs step > 0 and non-negative span ends");
  }
  const int left = grid_index(t_minus, step, "left span");
  const int right = grid_index(t_plus, step, "right span");
  if (left + right < 1) throw Error(ErrorCode::kInvalidArgument, "grid needs at least one cell");
  if (left + right > kMaxExactCells) {
    throw Error(ErrorCode::kTooLarge, "grid has more cells than the exact sampler supports");
  }
  return UniformGrid{step, left + right, left};
}

UniformGrid UniformGrid::from_nodes(std::span<const double> times) {
  if (times.size() < 2) throw Error(ErrorCode::kInvalidArgument, "grid needs at least two nodes");
  const double step = times[1] - times[0];
  if (!(step > 0.0)) throw Error(ErrorCode::kGridNotUniform, "grid times must increase");
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double expected = times[0] + static_cast<double>(k) * step;
    if (std::abs(times[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw Error(ErrorCode::kGridNotUniform, "node " + std::to_string(k) + " breaks uniform spacing");
    }
  }
  const double origin = -times[0] / step;
  if (std::abs(origin - std::round(origin)) > 1e-8 || origin < -1e-8 ||
      origin > static_cast<double>(times.size() - 1) + 1e-8) {
    throw Error(ErrorCode::kMisaligned, "time 0 is not a grid node");
  }
  const int cells = static_cast<int>(times.size()) - 1;
  if (cells > kMaxExactCells) throw Error(ErrorCode::kTooLarge, "grid too large for exact sampling");
  return UniformGrid{step, cells, static_cast<int>(std::round(origin))};
}

double fbm_covariance(double s, double t, HurstParam hurst) {
  const double two_h = 2.0 * hurst.value();
  return 0.5 * (std::pow(std::abs(t), two_h) + std::pow(std::abs(s), two_h) -
                std::pow(std::abs(t - s), two_h));
}

double fgn_autocovariance(int lag, double step, HurstParam hurst) {
  const double two_h = 2.0 * hurst.value();
  const double k = std::abs(static_cast<double>(lag));
  const double unit = 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
                             std::pow(std::abs(k - 1.0), two_h));
  return unit * std::pow(step, two_h);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  // splitmix64 finaliser over a combined word
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FbmSampler::FbmSampler(const UniformGrid& grid, HurstParam hurst, int dim)
    : grid_(grid), hurst_(hurst), dim_(dim) {
  if (dim < 1) throw Error(ErrorCode::kInvalidArgument, "dimension must be positive");
  if (!(grid.step > 0.0) || grid.num_cells < 1 || grid.origin_index < 0 ||
      grid.origin_index > grid.num_cells) {
    throw Error(ErrorCode::kInvalidArgument, "malformed grid");
  }
  if (grid.num_cells > kMaxExactCells) {
    throw Error(ErrorCode::kTooLarge, "grid has more cells than the exact sampler supports");
  }
  const int n = grid.num_cells;
  autocov_.resize(n);
  for (int k = 0; k < n; ++k) autocov_[k] = fgn_autocovariance(k, grid.step, hurst);

  if (n <= kCholeskyLimit) {
    Eigen::MatrixXd cov(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cov(i, j) = autocov_[std::abs(i - j)];
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kInvalidArgument, "increment covariance is not positive definite");
    }
    factor_ = llt.matrixL();
  }
}

void FbmSampler::levinson_component(const Eigen::VectorXd& normals,
                                    Eigen::Ref<Eigen::VectorXd> out) const {
  const int n = static_cast<int>(autocov_.size());
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(n);
  double var = autocov_[0];
  out[0] = std::sqrt(var) * normals[0];
  for (int m = 1; m < n; ++m) {
    double acc = autocov_[m];
    for (int j = 1; j < m; ++j) acc -= prev[j] * autocov_[m - j];
    const double reflect = acc / var;
    phi[m] = reflect;
    for (int j = 1; j < m; ++j) phi[j] = prev[j] - reflect * prev[m - j];
    var *= (1.0 - reflect * reflect);
    double mean = 0.0;
    for (int j = 1; j <= m; ++j) mean += phi[j] * out[m - j];
    out[m] = mean + std::sqrt(var) * normals[m];
    prev.head(m + 1) = phi.head(m + 1);
  }
}

void FbmSampler::draw_increments(std::uint64_t seed, std::uint64_t path_index,
                                 Eigen::MatrixXd& incr) const {
  const int n = grid_.num_cells;
  std::mt19937_64 rng(stream_seed(seed, path_index));
  std::normal_distribution<double> normal(0.0, 1.0);
  incr.resize(dim_, n);
  Eigen::VectorXd z(n);
  Eigen::VectorXd component(n);
  for (int c = 0; c < dim_; ++c) {
    for (int k = 0; k < n; ++k) z[k] = normal(rng);
    if (uses_cholesky()) {
      component.noalias() = factor_.triangularView<Eigen::Lower>() * z;
    } else {
      levinson_component(z, component);
    }
    incr.row(c) = component.transpose();
  }
}

SampledPath FbmSampler::sample(std::uint64_t seed, std::uint64_t path_index) const {
  Eigen::MatrixXd incr;
  draw_increments(seed, path_index, incr);
  SampledPath path{grid_, Eigen::MatrixXd::Zero(dim_, grid_.num_nodes())};
  for (int k = 0; k < grid_.num_cells; ++k) path.values.col(k + 1) = path.values.col(k) + incr.col(k);
  const Eigen::VectorXd anchor = path.values.col(grid_.origin_index);
  path.values.colwise() -= anchor;
  path.values.col(grid_.origin_index).setZero();
  return path;
}

std::vector<SampledPath> sample_fbm(const UniformGrid& grid, HurstParam hurst, int dim,
                                    std::uint64_t seed, int n_paths) {
  if (n_paths < 0) throw Error(ErrorCode::kInvalidArgument, "path count must be non-negative");
  const FbmSampler sampler(grid, hurst, dim);
  std::vector<SampledPath> out;
  out.reserve(static_cast<std::size_t>(n_paths));
  for (int p = 0; p < n_paths; ++p) out.push_back(sampler.sample(seed, static_cast<std::uint64_t>(p)));
  return out;
}

}  // namespace rdde
