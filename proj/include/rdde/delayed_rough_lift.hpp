#pragma once

// Delayed rough paths (X, XX, XX(-r)) over a uniform grid.
//
// Only the per-cell iterated integrals are stored. Area over a coarse pair
// (t_i, t_j) is rebuilt on demand by summing cells with the Chen correction:
//   XX_{s,t}      = sum_k [ XX_{k,k+1}      + X_{s,t_k}         (x) dX_k ]
//   XX_{s,t}(-r)  = sum_k [ XX_{k,k+1}(-r)  + X_{s-r,t_k-r}     (x) dX_k ]
// Tensors are d x d with entry (i,j) multiplying e_i (x) e_j, i.e. the
// earlier (or delayed) increment indexes the row.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rdde/fbm_sampler.hpp"

namespace rdde {

/// Immutable view on shared lift data. Copies and shifts are O(1) and share
/// storage, so instances can be handed to parallel workers freely.
///
/// Indices are time indices: k denotes t_k = k * step relative to the view's
/// origin, so shift() only moves the origin.
class DelayedRoughPath {
 public:
  /// `cell_area` / `cell_delayed_area` hold one column per grid cell
  /// (column-major d x d tensor); cells before `window_start` are unused.
  DelayedRoughPath(SampledPath base, int delay_steps, int window_start, Eigen::MatrixXd cell_area,
                   Eigen::MatrixXd cell_delayed_area);

  int dim() const noexcept { return data_->base.dim(); }
  double step() const noexcept { return data_->base.grid.step; }
  int delay_steps() const noexcept { return data_->delay_steps; }
  double delay() const noexcept { return delay_steps() * step(); }

  /// First node with a sampled value.
  int min_index() const noexcept { return -origin_; }
  /// First node from which both areas are available.
  int window_begin() const noexcept { return data_->window_start - origin_; }
  int max_index() const noexcept { return data_->base.grid.num_cells - origin_; }
  /// Raw node index of time 0.
  int origin_node() const noexcept { return origin_; }

  /// X_{t_k}, re-based so that value(0) == 0.
  Eigen::VectorXd value(int k) const;
  /// (dX)_{t_i, t_j}.
  Eigen::VectorXd increment(int i, int j) const;
  Eigen::Map<const Eigen::MatrixXd> cell_area(int k) const;
  Eigen::Map<const Eigen::MatrixXd> cell_delayed_area(int k) const;
  Eigen::MatrixXd area(int i, int j) const;
  Eigen::MatrixXd delayed_area(int i, int j) const;

  /// theta-shift by `steps` grid cells; the origin must stay inside the lift window.
  DelayedRoughPath shift(int steps) const;

  /// Sampled path with values re-based at this view's origin.
  SampledPath rebased_path() const;

  const SampledPath& raw_path() const noexcept { return data_->base; }
  const Eigen::MatrixXd& raw_cell_areas() const noexcept { return data_->area; }
  const Eigen::MatrixXd& raw_cell_delayed_areas() const noexcept { return data_->delayed; }
  int raw_window_start() const noexcept { return data_->window_start; }

  /// True when both views share storage and origin.
  bool same_view(const DelayedRoughPath& other) const noexcept {
    return data_ == other.data_ && origin_ == other.origin_;
  }

 private:
  struct Data {
    SampledPath base;
    int delay_steps;
    int window_start;
    Eigen::MatrixXd area;
    Eigen::MatrixXd delayed;
  };

  void check_cell(int k, bool delayed) const;

  std::shared_ptr<const Data> data_;
  int origin_ = 0;
};

/// Geometric lift of the piecewise-linear interpolant. Per cell:
///   XX_{k,k+1}     = dX_k (x) dX_k / 2
///   XX_{k,k+1}(-r) = dX_{k-K} (x) dX_k / 2,  K = delay_steps
/// The lift window starts at the first raw node with K nodes of history.
DelayedRoughPath lift_piecewise_linear(const SampledPath& path, int delay_steps);

/// Driver identically zero on [min_index, max_index] (time indices), for
/// deterministic runs.
DelayedRoughPath zero_driver(int dim, double step, int delay_steps, int min_index, int max_index);

/// Dense table of pair areas over time indices [begin, end]; used for Chen
/// validation and for data read back from external files.
class PairAreaTable {
 public:
  PairAreaTable(int begin, int end, int dim, int delay_steps);

  int begin() const noexcept { return begin_; }
  int end() const noexcept { return end_; }
  int dim() const noexcept { return dim_; }
  int delay_steps() const noexcept { return delay_steps_; }

  Eigen::Map<Eigen::MatrixXd> area(int i, int j);
  Eigen::Map<Eigen::MatrixXd> delayed_area(int i, int j);
  Eigen::Map<const Eigen::MatrixXd> area(int i, int j) const;
  Eigen::Map<const Eigen::MatrixXd> delayed_area(int i, int j) const;
  Eigen::Map<Eigen::VectorXd> value(int k);
  Eigen::Map<const Eigen::VectorXd> value(int k) const;

 private:
  std::size_t pair_offset(int i, int j) const;

  int begin_, end_, dim_, delay_steps_;
  std::vector<double> values_;   // nodes [begin - delay_steps, end]
  std::vector<double> area_;
  std::vector<double> delayed_;
};

/// Computes every pair (i, j), begin <= i <= j <= end, by direct summation of
/// the cell integrals (independently per starting index).
PairAreaTable materialize_pairs(const DelayedRoughPath& drp, int begin, int end);

struct ChenCheckOptions {
  int exhaustive_limit = 64;      // check all triples when the window has at most this many cells
  int random_triples = 20000;
  std::uint64_t seed = 1;
  int block_cells = 1024;         // windows larger than this are checked block by block
};

/// Max over checked triples of both Chen residuals, each divided by
/// 1 + |outer-pair tensor|. Small windows are checked exhaustively; larger ones
/// on every triple (s, s+1, t) and (s, t-1, t) plus random triples.
/// Windows with a single cell return 0.
double validate_chen(const PairAreaTable& table, const ChenCheckOptions& options = {});
double validate_chen(const DelayedRoughPath& drp, const ChenCheckOptions& options = {});

struct HolderNormReport {
  double x_gamma = 0.0;
  double area_2gamma = 0.0;
  double delayed_area_2gamma = 0.0;
  double total = 0.0;
};

/// Discrete Hoelder seminorms over all grid pairs of the lift window
/// (or of [begin, end] when given).
HolderNormReport holder_norms(const DelayedRoughPath& drp, double gamma);
HolderNormReport holder_norms(const DelayedRoughPath& drp, double gamma, int begin, int end);

/// Discrete inhomogeneous-to-homogeneous distance
///   sup |dX - dY| / dt^g + sqrt(sup |XX - YY| / dt^{2g}) + sqrt(sup |XX(-r) - YY(-r)| / dt^{2g})
/// over all pairs in [begin, end]. Both paths must share step and delay.
double homogeneous_distance(const DelayedRoughPath& a, const DelayedRoughPath& b, double gamma,
                            int begin, int end);

/// Weight profile on [0, 1].
using WeightProfile = std::function<double(double)>;

/// Standard C-infinity bump supported on [0, 1], normalised to unit mass.
WeightProfile bump_profile();

/// B^eps_t = int_0^1 (B_{t - eps z} - B_{-eps z}) rho(z) dz evaluated on the
/// grid: lag m*h receives the mass of rho over the z-cell around m*h/eps.
/// The returned path loses floor(eps/h) nodes of history.
SampledPath mollify(const SampledPath& path, double epsilon, const WeightProfile& rho);

}  // namespace rdde
