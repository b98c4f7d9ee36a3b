#pragma once

// Exact sampling of multidimensional fractional Brownian motion on uniform grids.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace rdde {

/// Hurst index restricted to (1/3, 1). Values above 1/2 are accepted so that
/// Young-regime reference runs can be used to check the rough integrator.
class HurstParam {
 public:
  explicit HurstParam(double value);
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Uniform time grid t_k = (k - origin_index) * step, k = 0..num_cells.
struct UniformGrid {
  double step = 0.0;
  int num_cells = 0;
  int origin_index = 0;

  int num_nodes() const noexcept { return num_cells + 1; }
  double time(int node) const noexcept { return (node - origin_index) * step; }

  /// Grid covering [-t_minus, t_plus]; both ends must be multiples of step.
  static UniformGrid over(double step, double t_minus, double t_plus);
  /// Validates explicit node times (uniform spacing, contains 0).
  static UniformGrid from_nodes(std::span<const double> times);
};

struct SampledPath {
  UniformGrid grid;
  Eigen::MatrixXd values;  // dim x num_nodes, column k is the value at node k

  int dim() const noexcept { return static_cast<int>(values.rows()); }
  Eigen::VectorXd at(int node) const { return values.col(node); }
};

/// R_H(s,t) = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(double s, double t, HurstParam hurst);

/// Autocovariance of unit-step fractional Gaussian noise scaled to step h.
double fgn_autocovariance(int lag, double step, HurstParam hurst);

/// Upper limit on grid size accepted by the exact samplers.
inline constexpr int kMaxExactCells = 100000;

/// Exact sampler with per-path RNG streams derived from (seed, path index).
/// Small grids use a cached Cholesky factor of the increment covariance; larger
/// grids switch to the Durbin-Levinson recursion (same law, O(N) memory).
class FbmSampler {
 public:
  FbmSampler(const UniformGrid& grid, HurstParam hurst, int dim);

  SampledPath sample(std::uint64_t seed, std::uint64_t path_index) const;

  const UniformGrid& grid() const noexcept { return grid_; }
  HurstParam hurst() const noexcept { return hurst_; }
  int dim() const noexcept { return dim_; }
  bool uses_cholesky() const noexcept { return factor_.size() > 0; }

  static constexpr int kCholeskyLimit = 2048;

 private:
  void draw_increments(std::uint64_t seed, std::uint64_t path_index, Eigen::MatrixXd& incr) const;
  void levinson_component(const Eigen::VectorXd& normals, Eigen::Ref<Eigen::VectorXd> out) const;

  UniformGrid grid_;
  HurstParam hurst_;
  int dim_;
  Eigen::MatrixXd factor_;           // lower Cholesky factor, empty when Levinson is used
  Eigen::VectorXd autocov_;          // fGn autocovariance, lags 0..N-1
};

std::vector<SampledPath> sample_fbm(const UniformGrid& grid, HurstParam hurst, int dim,
                                    std::uint64_t seed, int n_paths);

/// Deterministic 64-bit stream seed for path `index` of run `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace rdde
