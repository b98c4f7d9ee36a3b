#include "rdde/delayed_rough_lift.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rdde/error.hpp"

namespace rdde {

DelayedRoughPath::DelayedRoughPath(SampledPath base, int delay_steps, int window_start,
                                   Eigen::MatrixXd cell_area, Eigen::MatrixXd cell_delayed_area) {
  const int d = base.dim();
  const int cells = base.grid.num_cells;
  if (delay_steps <= 0) throw Error(ErrorCode::kInvalidArgument, "delay_steps must be positive");
  if (base.values.cols() != base.grid.num_nodes()) {
    throw Error(ErrorCode::kInvalidArgument, "path values do not match the grid");
  }
  if (window_start < delay_steps || window_start >= cells) {
    throw Error(ErrorCode::kInsufficientHistory,
                "lift window needs delay_steps nodes of history and at least one cell");
  }
  if (cell_area.rows() != d * d || cell_area.cols() != cells || cell_delayed_area.rows() != d * d ||
      cell_delayed_area.cols() != cells) {
    throw Error(ErrorCode::kInvalidArgument, "cell area storage has the wrong shape");
  }
  origin_ = base.grid.origin_index;
  data_ = std::make_shared<const Data>(Data{std::move(base), delay_steps, window_start,
                                            std::move(cell_area), std::move(cell_delayed_area)});
}

Eigen::VectorXd DelayedRoughPath::value(int k) const {
  const int node = origin_ + k;
  if (node < 0 || node > data_->base.grid.num_cells) {
    throw Error(ErrorCode::kWindowOutOfRange, "node " + std::to_string(k) + " outside the sampled span");
  }
  return data_->base.values.col(node) - data_->base.values.col(origin_);
}

Eigen::VectorXd DelayedRoughPath::increment(int i, int j) const {
  const int a = origin_ + i;
  const int b = origin_ + j;
  const int last = data_->base.grid.num_cells;
  if (a < 0 || b < 0 || a > last || b > last) {
    throw Error(ErrorCode::kWindowOutOfRange, "increment outside the sampled span");
  }
  return data_->base.values.col(b) - data_->base.values.col(a);
}

void DelayedRoughPath::check_cell(int k, bool delayed) const {
  const int cell = origin_ + k;
  if (cell < data_->window_start || cell >= data_->base.grid.num_cells) {
    throw Error(ErrorCode::kWindowOutOfRange,
                std::string(delayed ? "delayed area" : "area") + " cell " + std::to_string(k) +
                    " outside the lift window");
  }
}

Eigen::Map<const Eigen::MatrixXd> DelayedRoughPath::cell_area(int k) const {
  check_cell(k, false);
  const int d = dim();
  return {data_->area.col(origin_ + k).data(), d, d};
}

Eigen::Map<const Eigen::MatrixXd> DelayedRoughPath::cell_delayed_area(int k) const {
  check_cell(k, true);
  const int d = dim();
  return {data_->delayed.col(origin_ + k).data(), d, d};
}

Eigen::MatrixXd DelayedRoughPath::area(int i, int j) const {
  if (i > j) throw Error(ErrorCode::kInvalidArgument, "area needs i <= j");
  const int d = dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  if (i == j) return out;
  check_cell(i, false);
  check_cell(j - 1, false);
  const auto& x = data_->base.values;
  const int a = origin_ + i;
  for (int c = a; c < origin_ + j; ++c) {
    out += Eigen::Map<const Eigen::MatrixXd>(data_->area.col(c).data(), d, d);
    out.noalias() += (x.col(c) - x.col(a)) * (x.col(c + 1) - x.col(c)).transpose();
  }
  return out;
}

Eigen::MatrixXd DelayedRoughPath::delayed_area(int i, int j) const {
  if (i > j) throw Error(ErrorCode::kInvalidArgument, "delayed area needs i <= j");
  const int d = dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  if (i == j) return out;
  check_cell(i, true);
  check_cell(j - 1, true);
  const auto& x = data_->base.values;
  const int lag = data_->delay_steps;
  const int a = origin_ + i;
  for (int c = a; c < origin_ + j; ++c) {
    out += Eigen::Map<const Eigen::MatrixXd>(data_->delayed.col(c).data(), d, d);
    out.noalias() += (x.col(c - lag) - x.col(a - lag)) * (x.col(c + 1) - x.col(c)).transpose();
  }
  return out;
}

DelayedRoughPath DelayedRoughPath::shift(int steps) const {
  const int target = origin_ + steps;
  if (target < data_->window_start || target > data_->base.grid.num_cells) {
    throw Error(ErrorCode::kWindowOutOfRange, "shifted origin leaves the lift window");
  }
  DelayedRoughPath out(*this);
  out.origin_ = target;
  return out;
}

SampledPath DelayedRoughPath::rebased_path() const {
  SampledPath out = data_->base;
  out.grid.origin_index = origin_;
  const Eigen::VectorXd anchor = out.values.col(origin_);
  out.values.colwise() -= anchor;
  return out;
}

DelayedRoughPath lift_piecewise_linear(const SampledPath& path, int delay_steps) {
  if (delay_steps <= 0) throw Error(ErrorCode::kInvalidArgument, "delay_steps must be positive");
  const int cells = path.grid.num_cells;
  if (delay_steps >= cells) {
    throw Error(ErrorCode::kInsufficientHistory, "path is shorter than the delay plus one cell");
  }
  const int d = path.dim();
  Eigen::MatrixXd area = Eigen::MatrixXd::Zero(d * d, cells);
  Eigen::MatrixXd delayed = Eigen::MatrixXd::Zero(d * d, cells);
  for (int c = delay_steps; c < cells; ++c) {
    const Eigen::VectorXd dx = path.values.col(c + 1) - path.values.col(c);
    const Eigen::VectorXd dx_lag = path.values.col(c + 1 - delay_steps) - path.values.col(c - delay_steps);
    Eigen::Map<Eigen::MatrixXd>(area.col(c).data(), d, d).noalias() = 0.5 * dx * dx.transpose();
    Eigen::Map<Eigen::MatrixXd>(delayed.col(c).data(), d, d).noalias() = 0.5 * dx_lag * dx.transpose();
  }
  return DelayedRoughPath(path, delay_steps, delay_steps, std::move(area), std::move(delayed));
}

DelayedRoughPath zero_driver(int dim, double step, int delay_steps, int min_index, int max_index) {
  if (min_index > 0 || max_index <= min_index) {
    throw Error(ErrorCode::kInvalidArgument, "zero driver needs min_index <= 0 < max_index");
  }
  SampledPath path{UniformGrid{step, max_index - min_index, -min_index},
                   Eigen::MatrixXd::Zero(dim, max_index - min_index + 1)};
  return lift_piecewise_linear(path, delay_steps);
}

// ---------------------------------------------------------------------------

PairAreaTable::PairAreaTable(int begin, int end, int dim, int delay_steps)
    : begin_(begin), end_(end), dim_(dim), delay_steps_(delay_steps) {
  if (end < begin || dim < 1 || delay_steps < 0) {
    throw Error(ErrorCode::kInvalidArgument, "malformed pair table bounds");
  }
  const std::size_t nodes = static_cast<std::size_t>(end - begin + 1);
  const std::size_t pairs = nodes * (nodes + 1) / 2;
  const std::size_t dd = static_cast<std::size_t>(dim) * dim;
  values_.assign((nodes + delay_steps) * dim, 0.0);
  area_.assign(pairs * dd, 0.0);
  delayed_.assign(pairs * dd, 0.0);
}

std::size_t PairAreaTable::pair_offset(int i, int j) const {
  if (i < begin_ || j > end_ || i > j) {
    throw Error(ErrorCode::kWindowOutOfRange, "pair outside table");
  }
  const std::size_t a = static_cast<std::size_t>(i - begin_);
  const std::size_t b = static_cast<std::size_t>(j - begin_);
  const std::size_t nodes = static_cast<std::size_t>(end_ - begin_ + 1);
  // packed upper triangle: row a starts after sum_{q<a} (nodes - q) entries
  const std::size_t start = a * nodes - (a * (a - 1)) / 2;
  return (start + (b - a)) * static_cast<std::size_t>(dim_) * dim_;
}

Eigen::Map<Eigen::MatrixXd> PairAreaTable::area(int i, int j) {
  return {area_.data() + pair_offset(i, j), dim_, dim_};
}
Eigen::Map<Eigen::MatrixXd> PairAreaTable::delayed_area(int i, int j) {
  return {delayed_.data() + pair_offset(i, j), dim_, dim_};
}
Eigen::Map<const Eigen::MatrixXd> PairAreaTable::area(int i, int j) const {
  return {area_.data() + pair_offset(i, j), dim_, dim_};
}
Eigen::Map<const Eigen::MatrixXd> PairAreaTable::delayed_area(int i, int j) const {
  return {delayed_.data() + pair_offset(i, j), dim_, dim_};
}
Eigen::Map<Eigen::VectorXd> PairAreaTable::value(int k) {
  if (k < begin_ - delay_steps_ || k > end_) throw Error(ErrorCode::kWindowOutOfRange, "node outside table");
  return {values_.data() + static_cast<std::size_t>(k - begin_ + delay_steps_) * dim_, dim_};
}
Eigen::Map<const Eigen::VectorXd> PairAreaTable::value(int k) const {
  if (k < begin_ - delay_steps_ || k > end_) throw Error(ErrorCode::kWindowOutOfRange, "node outside table");
  return {values_.data() + static_cast<std::size_t>(k - begin_ + delay_steps_) * dim_, dim_};
}

PairAreaTable materialize_pairs(const DelayedRoughPath& drp, int begin, int end) {
  if (begin < drp.window_begin() || end > drp.max_index() || begin > end) {
    throw Error(ErrorCode::kWindowOutOfRange, "pair table window outside the lift window");
  }
  const int d = drp.dim();
  const int lag = drp.delay_steps();
  PairAreaTable table(begin, end, d, lag);
  for (int k = begin - lag; k <= end; ++k) table.value(k) = drp.value(k);
  Eigen::MatrixXd acc(d, d), acc_delayed(d, d);
  for (int i = begin; i <= end; ++i) {
    acc.setZero();
    acc_delayed.setZero();
    const Eigen::VectorXd xi = drp.value(i);
    const Eigen::VectorXd xi_lag = drp.value(i - lag);
    for (int j = i; j < end; ++j) {
      const Eigen::VectorXd dx = drp.value(j + 1) - drp.value(j);
      acc += drp.cell_area(j);
      acc.noalias() += (drp.value(j) - xi) * dx.transpose();
      acc_delayed += drp.cell_delayed_area(j);
      acc_delayed.noalias() += (drp.value(j - lag) - xi_lag) * dx.transpose();
      table.area(i, j + 1) = acc;
      table.delayed_area(i, j + 1) = acc_delayed;
    }
  }
  return table;
}

namespace {

double triple_residual(const PairAreaTable& t, int s, int u, int v) {
  const Eigen::VectorXd dsu = t.value(u) - t.value(s);
  const Eigen::VectorXd duv = t.value(v) - t.value(u);
  const Eigen::VectorXd dsu_lag = t.value(u - t.delay_steps()) - t.value(s - t.delay_steps());
  const auto outer = t.area(s, v);
  const auto outer_delayed = t.delayed_area(s, v);
  const double r1 = (outer - t.area(s, u) - t.area(u, v) - dsu * duv.transpose()).norm() / (1.0 + outer.norm());
  const double r2 = (outer_delayed - t.delayed_area(s, u) - t.delayed_area(u, v) - dsu_lag * duv.transpose()).norm() /
                    (1.0 + outer_delayed.norm());
  return std::max(r1, r2);
}

}  // namespace

double validate_chen(const PairAreaTable& table, const ChenCheckOptions& options) {
  const int b = table.begin();
  const int e = table.end();
  const int cells = e - b;
  if (cells < 2) return 0.0;
  double worst = 0.0;
  if (cells <= options.exhaustive_limit) {
    for (int s = b; s <= e; ++s)
      for (int u = s + 1; u <= e; ++u)
        for (int v = u + 1; v <= e; ++v) worst = std::max(worst, triple_residual(table, s, u, v));
    return worst;
  }
  for (int s = b; s <= e; ++s) {
    for (int v = s + 2; v <= e; ++v) {
      worst = std::max(worst, triple_residual(table, s, s + 1, v));
      worst = std::max(worst, triple_residual(table, s, v - 1, v));
    }
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> pick(b, e);
  for (int n = 0; n < options.random_triples; ++n) {
    int q[3] = {pick(rng), pick(rng), pick(rng)};
    std::sort(q, q + 3);
    if (q[0] == q[1] || q[1] == q[2]) continue;
    worst = std::max(worst, triple_residual(table, q[0], q[1], q[2]));
  }
  return worst;
}

double validate_chen(const DelayedRoughPath& drp, const ChenCheckOptions& options) {
  const int begin = drp.window_begin();
  const int end = drp.max_index();
  const int block = std::max(2, options.block_cells);
  double worst = 0.0;
  for (int b = begin; b < end; b += block) {
    const int e = std::min(end, b + block);
    worst = std::max(worst, validate_chen(materialize_pairs(drp, b, e), options));
  }
  return worst;
}

HolderNormReport holder_norms(const DelayedRoughPath& drp, double gamma) {
  return holder_norms(drp, gamma, drp.window_begin(), drp.max_index());
}

HolderNormReport holder_norms(const DelayedRoughPath& drp, double gamma, int begin, int end) {
  if (!(gamma > 0.0 && gamma <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "Hoelder exponent must lie in (0, 1/2]");
  }
  if (begin < drp.window_begin() || end > drp.max_index() || begin > end) {
    throw Error(ErrorCode::kWindowOutOfRange, "norm window outside the lift window");
  }
  const int d = drp.dim();
  const int lag = drp.delay_steps();
  const double h = drp.step();
  HolderNormReport rep;
  Eigen::MatrixXd acc(d, d), acc_delayed(d, d);
  for (int i = begin; i < end; ++i) {
    acc.setZero();
    acc_delayed.setZero();
    const Eigen::VectorXd xi = drp.value(i);
    const Eigen::VectorXd xi_lag = drp.value(i - lag);
    for (int j = i; j < end; ++j) {
      const Eigen::VectorXd xj = drp.value(j);
      const Eigen::VectorXd dx = drp.value(j + 1) - xj;
      acc += drp.cell_area(j);
      acc.noalias() += (xj - xi) * dx.transpose();
      acc_delayed += drp.cell_delayed_area(j);
      acc_delayed.noalias() += (drp.value(j - lag) - xi_lag) * dx.transpose();
      const double dt = (j + 1 - i) * h;
      const double pg = std::pow(dt, gamma);
      rep.x_gamma = std::max(rep.x_gamma, (drp.value(j + 1) - xi).norm() / pg);
      rep.area_2gamma = std::max(rep.area_2gamma, acc.norm() / (pg * pg));
      rep.delayed_area_2gamma = std::max(rep.delayed_area_2gamma, acc_delayed.norm() / (pg * pg));
    }
  }
  rep.total = rep.x_gamma + rep.area_2gamma + rep.delayed_area_2gamma;
  return rep;
}

double homogeneous_distance(const DelayedRoughPath& a, const DelayedRoughPath& b, double gamma, int begin,
                            int end) {
  if (a.dim() != b.dim() || a.delay_steps() != b.delay_steps() ||
      std::abs(a.step() - b.step()) > 1e-14 * a.step()) {
    throw Error(ErrorCode::kInvalidArgument, "paths differ in dimension, step or delay");
  }
  const int d = a.dim();
  const int lag = a.delay_steps();
  double dx_sup = 0.0, area_sup = 0.0, delayed_sup = 0.0;
  Eigen::MatrixXd ua(d, d), ub(d, d), va(d, d), vb(d, d);
  for (int i = begin; i < end; ++i) {
    ua.setZero();
    ub.setZero();
    va.setZero();
    vb.setZero();
    for (int j = i; j < end; ++j) {
      const Eigen::VectorXd da = a.increment(j, j + 1);
      const Eigen::VectorXd db = b.increment(j, j + 1);
      ua += a.cell_area(j);
      ua.noalias() += a.increment(i, j) * da.transpose();
      ub += b.cell_area(j);
      ub.noalias() += b.increment(i, j) * db.transpose();
      va += a.cell_delayed_area(j);
      va.noalias() += a.increment(i - lag, j - lag) * da.transpose();
      vb += b.cell_delayed_area(j);
      vb.noalias() += b.increment(i - lag, j - lag) * db.transpose();
      const double pg = std::pow((j + 1 - i) * a.step(), gamma);
      dx_sup = std::max(dx_sup, (a.increment(i, j + 1) - b.increment(i, j + 1)).norm() / pg);
      area_sup = std::max(area_sup, (ua - ub).norm() / (pg * pg));
      delayed_sup = std::max(delayed_sup, (va - vb).norm() / (pg * pg));
    }
  }
  return dx_sup + std::sqrt(area_sup) + std::sqrt(delayed_sup);
}

WeightProfile bump_profile() {
  const auto raw = [](double z) { return (z <= 0.0 || z >= 1.0) ? 0.0 : std::exp(-1.0 / (z * (1.0 - z))); };
  // composite Simpson, the integrand is flat at both ends
  const int panels = 4000;
  double mass = 0.0;
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    mass += w * raw(static_cast<double>(k) / panels);
  }
  mass /= 3.0 * panels;
  return [raw, mass](double z) { return raw(z) / mass; };
}

SampledPath mollify(const SampledPath& path, double epsilon, const WeightProfile& rho) {
  const double h = path.grid.step;
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1]");
  if (epsilon < h * (1.0 - 1e-12)) {
    throw Error(ErrorCode::kDegenerateQuadrature, "epsilon is smaller than the grid step");
  }
  const int lags = static_cast<int>(std::ceil(epsilon / h - 0.5 - 1e-12));
  // mass of rho on each lag cell, Simpson with 64 panels per cell
  std::vector<double> weights(static_cast<std::size_t>(lags) + 1, 0.0);
  double total = 0.0;
  for (int m = 0; m <= lags; ++m) {
    const double lo = std::max(0.0, (m - 0.5) * h / epsilon);
    const double hi = std::min(1.0, (m + 0.5) * h / epsilon);
    if (hi <= lo) continue;
    const int panels = 64;
    double acc = 0.0;
    for (int k = 0; k <= panels; ++k) {
      const double z = lo + (hi - lo) * k / panels;
      const double v = rho(z);
      if (v < 0.0 || !std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "weight profile must be non-negative");
      const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      acc += w * v;
    }
    weights[static_cast<std::size_t>(m)] = acc * (hi - lo) / (3.0 * panels);
    total += weights[static_cast<std::size_t>(m)];
  }
  if (std::abs(total - 1.0) > 1e-3) {
    throw Error(ErrorCode::kInvalidArgument, "weight profile must integrate to 1 on [0, 1]");
  }
  for (double& w : weights) w /= total;

  const int origin = path.grid.origin_index;
  if (origin < lags || path.grid.num_cells - lags < 1) {
    throw Error(ErrorCode::kInsufficientHistory, "mollifier needs epsilon of history before time 0");
  }
  SampledPath out{UniformGrid{h, path.grid.num_cells - lags, origin - lags},
                  Eigen::MatrixXd::Zero(path.dim(), path.grid.num_cells - lags + 1)};
  Eigen::VectorXd base = Eigen::VectorXd::Zero(path.dim());
  for (int m = 0; m <= lags; ++m) base += weights[static_cast<std::size_t>(m)] * path.values.col(origin - m);
  for (int j = 0; j < out.grid.num_nodes(); ++j) {
    const int node = j + lags;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(path.dim());
    for (int m = 0; m <= lags; ++m) acc += weights[static_cast<std::size_t>(m)] * path.values.col(node - m);
    out.values.col(j) = acc - base;
  }
  out.values.col(out.grid.origin_index).setZero();
  return out;
}

}  // namespace rdde
