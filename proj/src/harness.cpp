#include "rdde/harness.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <algorithm>
#include <set>
#include <sstream>

#include "rdde/dde_spectrum.hpp"
#include "rdde/error.hpp"
#include "rdde/fbm_sampler.hpp"

namespace rdde {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

const std::set<std::string> kTasks = {"sample-fbm", "lift",     "solve",          "lyapunov",
                                      "decay",      "spectrum", "stability-sweep"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double get_number(const json& c, const char* key, double fallback) {
  if (!c.contains(key)) return fallback;
  if (!c[key].is_number()) bad(std::string("'") + key + "' must be a number");
  return c[key].get<double>();
}

long long get_integer(const json& c, const char* key, long long fallback) {
  if (!c.contains(key)) return fallback;
  if (!c[key].is_number_integer()) bad(std::string("'") + key + "' must be an integer");
  return c[key].get<long long>();
}

bool on_grid(double t, double step) {
  const double q = t / step;
  return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

std::vector<double> parse_epsilons(const json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const json& e : j) {
      if (!e.is_number()) bad("epsilons must be numbers");
      out.push_back(e.get<double>());
    }
  } else if (j.is_object()) {
    const double from = get_number(j, "from", 0.0);
    const double to = get_number(j, "to", 1.0);
    const long long count = get_integer(j, "count", 11);
    if (count < 1) bad("epsilon sweep count must be positive");
    for (long long i = 0; i < count; ++i) {
      out.push_back(count == 1 ? from : from + (to - from) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
  } else {
    bad("'epsilons' must be a list or {from, to, count}");
  }
  for (double e : out) {
    if (!(e >= 0.0) || !std::isfinite(e)) bad("epsilons must be finite and non-negative");
  }
  return out;
}

std::string default_name(const std::string& task) {
  if (task == "sample-fbm") return "samples.csv";
  if (task == "lift") return "lift.json";
  if (task == "solve") return "solution.csv";
  if (task == "lyapunov") return "lyapunov.json";
  if (task == "decay") return "decay.csv";
  if (task == "spectrum") return "roots.json";
  return "sweep.csv";
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Outputs {
 public:
  Outputs(fs::path dir, std::string primary) : dir_(std::move(dir)), primary_(std::move(primary)) {
    fs::create_directories(dir_);
  }

  fs::path name_for(const std::string& suffix) const {
    // sibling files share the primary file's stem
    return fs::path(primary_).stem().string() + suffix;
  }

  void write(const fs::path& name, const std::string& schema, const std::string& content) {
    const fs::path full = dir_ / name;
    std::ofstream out(full, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + full.string());
    out << content;
    if (!out) throw Error(ErrorCode::kInvalidArgument, "write failed for " + full.string());
    files_.push_back(full);
    listing_.push_back({{"name", name.string()}, {"schema", schema}});
  }

  const std::vector<fs::path>& files() const { return files_; }
  const json& listing() const { return listing_; }
  const fs::path& dir() const { return dir_; }
  const std::string& primary() const { return primary_; }

 private:
  fs::path dir_;
  std::string primary_;
  std::vector<fs::path> files_;
  json listing_ = json::array();
};

struct Context {
  const Scenario& sc;
  Outputs& out;
  json extra = json::object();  // task facts recorded in the manifest
};

std::string hash_of(const Scenario& sc) { return sc.spec ? spec_hash(sc.spec->source) : std::string(); }

json provenance(const Scenario& sc, const char* schema) {
  json j;
  j["schema"] = schema;
  j["seed"] = sc.seed;
  j["spec_hash"] = sc.spec ? json(hash_of(sc)) : json(nullptr);
  return j;
}

double step_of(const Scenario& sc) { return sc.spec->spec.delay / sc.segments; }

std::vector<DelayedRoughPath> drivers(const Scenario& sc, double horizon) {
  const EquationSpec& spec = sc.spec->spec;
  const double h = step_of(sc);
  if (spec.diffusion.is_zero()) {
    // the driver never enters a deterministic run
    const int steps = grid_index(horizon, h, "horizon");
    return std::vector<DelayedRoughPath>(static_cast<std::size_t>(sc.paths),
                                         zero_driver(spec.d, h, sc.segments, -sc.segments, steps));
  }
  return fbm_ensemble(sc.hurst, spec.d, h, sc.segments, horizon, sc.seed, sc.paths);
}

void task_sample(Context& cx) {
  const Scenario& sc = cx.sc;
  const UniformGrid grid = UniformGrid::over(sc.step, sc.history, sc.horizon);
  const FbmSampler sampler(grid, HurstParam(sc.hurst), sc.dim);
  std::ostringstream csv;
  csv << "path_id,t";
  for (int c = 0; c < sc.dim; ++c) csv << ",component_" << c;
  csv << '\n';
  for (int p = 0; p < sc.paths; ++p) {
    const SampledPath path = sampler.sample(sc.seed, static_cast<std::uint64_t>(p));
    for (int k = 0; k < grid.num_nodes(); ++k) {
      csv << p << ',' << num(grid.time(k));
      for (int c = 0; c < sc.dim; ++c) csv << ',' << num(path.values(c, k));
      csv << '\n';
    }
  }
  cx.out.write(cx.out.primary(), "rdde.samples/1", csv.str());
  cx.extra["nodes_per_path"] = grid.num_nodes();
  cx.extra["method"] = sampler.uses_cholesky() ? "cholesky" : "levinson";
}

json row_major(const Eigen::Map<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void task_lift(Context& cx) {
  const Scenario& sc = cx.sc;
  std::vector<SampledPath> paths;
  int lag = sc.delay_steps;
  if (!sc.input.empty()) {
    paths = read_paths_csv(sc.input);
    std::ifstream in(sc.input, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes.str())));
    cx.extra["input_hash"] = buf;
  } else {
    lag = grid_index(sc.delay, sc.step, "delay");
    const UniformGrid grid = UniformGrid::over(sc.step, sc.delay, sc.horizon);
    const FbmSampler sampler(grid, HurstParam(sc.hurst), sc.dim);
    for (int p = 0; p < sc.paths; ++p) paths.push_back(sampler.sample(sc.seed, static_cast<std::uint64_t>(p)));
  }
  json doc = provenance(sc, "rdde.lift/1");
  if (sc.input.empty()) doc["hurst"] = sc.hurst;
  doc["delay_steps"] = lag;
  doc["gamma"] = sc.gamma;
  doc["paths"] = json::array();
  double worst = 0.0;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const SampledPath& path = paths[p];
    const DelayedRoughPath drp = lift_piecewise_linear(path, lag);
    json jp;
    jp["path_id"] = p;
    jp["grid"] = {{"step", path.grid.step},
                  {"num_cells", path.grid.num_cells},
                  {"origin_index", path.grid.origin_index},
                  {"t_first", path.grid.time(0)}};
    const double chen = validate_chen(drp);
    worst = std::max(worst, chen);
    jp["chen_residual"] = chen;
    const HolderNormReport hn = holder_norms(drp, sc.gamma);
    jp["holder"] = {{"x_gamma", hn.x_gamma},
                    {"area_2gamma", hn.area_2gamma},
                    {"delayed_area_2gamma", hn.delayed_area_2gamma},
                    {"total", hn.total}};
    json cells = json::array();
    for (int k = drp.window_begin(); k < drp.max_index(); ++k) {
      const Eigen::VectorXd inc = drp.increment(k, k + 1);
      cells.push_back({{"t", path.grid.step * k},
                       {"increment", std::vector<double>(inc.data(), inc.data() + inc.size())},
                       {"area", row_major(drp.cell_area(k))},
                       {"delayed_area", row_major(drp.cell_delayed_area(k))}});
    }
    jp["cells"] = std::move(cells);
    doc["paths"].push_back(std::move(jp));
  }
  cx.out.write(cx.out.primary(), "rdde.lift/1", doc.dump(1) + "\n");
  cx.extra["max_chen_residual"] = worst;
}

void task_solve(Context& cx) {
  const Scenario& sc = cx.sc;
  const EquationSpec& spec = sc.spec->spec;
  const double h = step_of(sc);
  const ControlledSegment xi = initial_segment(*sc.spec, sc.segments, h);
  const auto ens = drivers(sc, sc.horizon);
  std::ostringstream csv, norms;
  csv << "path_id,t";
  for (int i = 0; i < spec.n; ++i) csv << ",y_" << i;
  csv << '\n';
  norms << "path_id,segment,t_begin,t_end,solution_norm,driver_norm,sup_norm\n";
  json aborted = json::array();
  for (int p = 0; p < sc.paths; ++p) {
    try {
      const SolutionPath sol = solve(spec, xi, ens[static_cast<std::size_t>(p)], sc.horizon);
      for (int k = 0; k < sol.trajectory.num_nodes(); ++k) {
        csv << p << ',' << num(k * h);
        for (int i = 0; i < spec.n; ++i) csv << ',' << num(sol.trajectory.values(i, k));
        csv << '\n';
      }
      for (const auto& r : apriori_norm_report(sol)) {
        norms << p << ',' << r.segment << ',' << num(r.t_begin) << ',' << num(r.t_end) << ','
              << num(r.solution_norm) << ',' << num(r.driver_norm) << ',' << num(r.sup_norm) << '\n';
      }
    } catch (const OverflowError& e) {
      aborted.push_back({{"path_id", p}, {"segment", e.segment()}});
    }
  }
  cx.out.write(cx.out.primary(), "rdde.solution/1", csv.str());
  cx.out.write(cx.out.name_for("_norms.csv"), "rdde.norms/1", norms.str());
  cx.extra["aborted_paths"] = aborted;
  if (static_cast<int>(aborted.size()) == sc.paths) {
    throw Error(ErrorCode::kAllPathsAborted, "every path overflowed");
  }
}

void task_lyapunov(Context& cx) {
  const Scenario& sc = cx.sc;
  const EquationSpec& spec = sc.spec->spec;
  const auto ens = drivers(sc, sc.iterations * spec.delay);
  LyapunovOptions opt;
  opt.k = sc.k;
  opt.iterations = sc.iterations;
  opt.burn_in = sc.burn_in;
  opt.lag = sc.segments;
  opt.frame_seed = sc.seed;
  const LyapunovReport rep = lyapunov_spectrum(spec, ens, opt);
  json doc = provenance(sc, "rdde.lyapunov/1");
  doc["exponents"] = rep.exponents;
  doc["stderrs"] = rep.stderrs;
  doc["iterations"] = rep.iterations;
  doc["requested_k"] = rep.requested_k;
  doc["frame_collapsed"] = rep.frame_collapsed;
  doc["segments"] = sc.segments;
  doc["hurst"] = sc.hurst;
  doc["paths"] = sc.paths;
  json logs = json::array();
  for (const auto& l : rep.diag_logs) logs.push_back(std::vector<double>(l.data(), l.data() + l.size()));
  doc["diag_logs"] = std::move(logs);
  cx.out.write(cx.out.primary(), "rdde.lyapunov/1", doc.dump(1) + "\n");
}

const char* outcome_name(PathOutcome o) {
  switch (o) {
    case PathOutcome::kCompleted:
      return "completed";
    case PathOutcome::kAborted:
      return "aborted";
    case PathOutcome::kDegenerate:
      return "degenerate";
  }
  return "?";
}

void task_decay(Context& cx) {
  const Scenario& sc = cx.sc;
  const EquationSpec& spec = sc.spec->spec;
  const ControlledSegment xi = initial_segment(*sc.spec, sc.segments, step_of(sc));
  const auto ens = drivers(sc, sc.horizon);
  const DecayReport rep = pathwise_decay_estimate(spec, xi, ens, sc.horizon);
  std::ostringstream csv;
  csv << "path_id,outcome,slope\n";
  for (std::size_t p = 0; p < rep.outcomes.size(); ++p) {
    csv << p << ',' << outcome_name(rep.outcomes[p]) << ',' << num(rep.slopes[p]) << '\n';
  }
  cx.out.write(cx.out.primary(), "rdde.decay/1", csv.str());
  json summary = provenance(sc, "rdde.decay-summary/1");
  summary["median_slope"] = rep.median;
  summary["completed"] = rep.completed;
  summary["aborted"] = rep.aborted;
  summary["degenerate"] = rep.degenerate;
  summary["abort_fraction"] = rep.abort_fraction();
  summary["horizon"] = sc.horizon;
  cx.out.write(cx.out.name_for("_summary.json"), "rdde.decay-summary/1", summary.dump(1) + "\n");
}

void task_spectrum(Context& cx) {
  const Scenario& sc = cx.sc;
  const LinearDelaySystem sys = LinearDelaySystem::from(sc.spec->spec);
  const SpectralReport rep = sc.region ? find_roots(sys, *sc.region) : spectral_report(sys);
  json doc = provenance(sc, "rdde.roots/1");
  doc["abscissa"] = rep.roots.empty() ? json(nullptr) : json(rep.abscissa);
  doc["winding_count"] = rep.winding_count;
  doc["region"] = {rep.region.re_min, rep.region.re_max, rep.region.im_min, rep.region.im_max};
  json roots = json::array();
  for (const auto& r : rep.roots) {
    roots.push_back({{"re", r.z.real()}, {"im", r.z.imag()}, {"residual", r.residual}, {"multiplicity", r.multiplicity}});
  }
  doc["roots"] = std::move(roots);
  cx.out.write(cx.out.primary(), "rdde.roots/1", doc.dump(1) + "\n");
}

void task_sweep(Context& cx) {
  const Scenario& sc = cx.sc;
  const EquationSpec& spec = sc.spec->spec;
  const ControlledSegment xi = initial_segment(*sc.spec, sc.segments, step_of(sc));
  // the sweep scales the diffusion, so draw real noise even if eps = 0 comes first
  const auto ens = fbm_ensemble(sc.hurst, spec.d, step_of(sc), sc.segments, sc.horizon, sc.seed, sc.paths);
  const SweepSummary sum = stability_sweep(spec, xi, sc.epsilons, ens, sc.horizon);
  std::ostringstream csv;
  csv << "epsilon,median_slope,abort_fraction,completed,aborted,degenerate\n";
  for (const auto& row : sum.rows) {
    csv << num(row.epsilon) << ',' << num(row.decay.median) << ',' << num(row.decay.abort_fraction()) << ','
        << row.decay.completed << ',' << row.decay.aborted << ',' << row.decay.degenerate << '\n';
  }
  cx.out.write(cx.out.primary(), "rdde.sweep/1", csv.str());
  json summary = provenance(sc, "rdde.sweep-summary/1");
  summary["spectral_abscissa"] = sum.spectral_abscissa;
  summary["largest_stable_epsilon"] = sum.largest_stable_epsilon ? json(*sum.largest_stable_epsilon) : json(nullptr);
  summary["monotone_trend"] = sum.monotone_trend;
  summary["trend_tolerance"] = sum.trend_tolerance;
  summary["trend_slope"] = sum.trend_slope;
  summary["paths"] = sc.paths;
  summary["horizon"] = sc.horizon;
  cx.out.write(cx.out.name_for("_summary.json"), "rdde.sweep-summary/1", summary.dump(1) + "\n");
}

void dispatch(Context& cx) {
  const std::string& t = cx.sc.task;
  if (t == "sample-fbm") return task_sample(cx);
  if (t == "lift") return task_lift(cx);
  if (t == "solve") return task_solve(cx);
  if (t == "lyapunov") return task_lyapunov(cx);
  if (t == "decay") return cx.sc.epsilons.empty() ? task_decay(cx) : task_sweep(cx);
  if (t == "spectrum") return task_spectrum(cx);
  return task_sweep(cx);
}

json versions() {
  return {{"rdde", kLibraryVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

}  // namespace

fs::path default_output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? fs::path(env) : fs::path("rdde_out");
}

Scenario parse_scenario(const json& raw, const fs::path& base) {
  if (!raw.is_object()) bad("scenario must be a JSON object");
  if (raw.value("schema", std::string()) == "rdde.manifest/1") {
    if (!raw.contains("config")) bad("manifest carries no config");
    return parse_scenario(raw["config"], base);
  }
  static const std::set<std::string> allowed = {
      "schema", "task",  "spec",     "hurst", "segments", "step",   "delay",  "history", "horizon",    "dim",
      "paths",  "seed",  "k",        "iterations", "burn_in", "gamma", "epsilons", "region", "output_dir", "output", "input", "delay_steps"};
  for (const auto& [key, _] : raw.items()) {
    if (!allowed.count(key)) bad("unknown scenario key '" + key + "'");
  }
  if (raw.contains("schema") && raw["schema"] != "rdde.scenario/1") bad("unsupported scenario schema");
  if (!raw.contains("task") || !raw["task"].is_string()) bad("scenario needs a 'task'");

  Scenario sc;
  json norm = raw;
  norm["schema"] = "rdde.scenario/1";
  sc.task = raw["task"].get<std::string>();
  if (!kTasks.count(sc.task)) bad("unknown task '" + sc.task + "'");

  if (raw.contains("spec")) {
    const json& s = raw["spec"];
    if (s.is_string()) {
      fs::path p = s.get<std::string>();
      if (p.is_relative() && !base.empty()) p = base / p;
      sc.spec = load_spec(p);
    } else {
      sc.spec = parse_spec(s);
    }
    norm["spec"] = sc.spec->source;  // inline so the manifest replays anywhere
  }
  const bool needs_spec = sc.task != "sample-fbm" && sc.task != "lift";
  if (needs_spec && !sc.spec) bad("task '" + sc.task + "' needs a spec");

  sc.hurst = get_number(raw, "hurst", 0.5);
  if (!(sc.hurst > 1.0 / 3.0 && sc.hurst < 1.0)) bad("hurst must lie in (1/3, 1)");
  sc.segments = static_cast<int>(get_integer(raw, "segments", 64));
  if (sc.spec && raw.contains("step") && !raw.contains("segments")) {
    const double q = sc.spec->spec.delay / get_number(raw, "step", 1.0);
    if (!(q >= 1.0) || !on_grid(q, 1.0)) bad("delay must be a whole multiple of step");
    sc.segments = static_cast<int>(std::lround(q));
  }
  if (sc.segments < 1 || sc.segments > 4096) bad("segments must lie in [1, 4096]");
  sc.paths = static_cast<int>(get_integer(raw, "paths", 1));
  if (sc.paths < 1 || sc.paths > 100000) bad("paths must lie in [1, 100000]");
  const long long seed = get_integer(raw, "seed", 1);
  if (seed < 0) bad("seed must be non-negative");
  sc.seed = static_cast<std::uint64_t>(seed);
  sc.dim = static_cast<int>(get_integer(raw, "dim", sc.spec ? sc.spec->spec.d : 1));
  if (sc.dim < 1) bad("dim must be positive");
  sc.k = static_cast<int>(get_integer(raw, "k", 1));
  sc.iterations = static_cast<int>(get_integer(raw, "iterations", 200));
  sc.burn_in = static_cast<int>(get_integer(raw, "burn_in", -1));
  if (sc.iterations < 1) bad("iterations must be positive");
  if (sc.burn_in >= sc.iterations) bad("burn_in must be below iterations");
  sc.gamma = get_number(raw, "gamma", 0.35);
  if (!(sc.gamma > 0.0 && sc.gamma <= 0.5)) bad("gamma must lie in (0, 1/2]");
  if (sc.task == "lyapunov" && (sc.k < 1 || sc.k > 15)) bad("k must lie in [1, 15]");

  if (sc.spec) {
    const double r = sc.spec->spec.delay;
    const double h = r / sc.segments;
    if (raw.contains("step") && std::abs(get_number(raw, "step", h) - h) > 1e-12 * h) {
      bad("step must equal delay / segments");
    }
    sc.step = h;
    sc.delay = r;
    if (sc.dim != sc.spec->spec.d) bad("dim disagrees with the spec's noise dimension");
    for (const auto& a : sc.spec->spec.measure.atoms) {
      if (!on_grid(a.theta, h)) bad("atom locations must lie on the grid r / segments");
    }
  } else {
    sc.step = get_number(raw, "step", 1.0 / 64);
    if (!(sc.step > 0.0)) bad("step must be positive");
    sc.delay_steps = static_cast<int>(get_integer(raw, "delay_steps", 0));
    if (raw.contains("delay_steps")) {
      if (sc.delay_steps < 1) bad("delay_steps must be positive");
      if (raw.contains("delay")) bad("give either delay or delay_steps");
      sc.delay = sc.delay_steps * sc.step;
    } else {
      sc.delay = get_number(raw, "delay", 0.0);
      if (sc.delay > 0.0 && on_grid(sc.delay, sc.step)) sc.delay_steps = static_cast<int>(std::lround(sc.delay / sc.step));
    }
  }
  if (raw.contains("input")) {
    if (sc.task != "lift") bad("'input' is only used by lift");
    if (!raw["input"].is_string()) bad("'input' must be a file name");
    fs::path p = raw["input"].get<std::string>();
    if (p.is_relative() && !base.empty()) p = base / p;
    if (!fs::exists(p)) bad("input file " + p.string() + " does not exist");
    sc.input = fs::absolute(p);
    norm["input"] = sc.input.string();
    if (sc.delay_steps < 1 || raw.contains("delay")) bad("lift from a file needs delay_steps");
  }
  sc.history = get_number(raw, "history", 0.0);
  sc.horizon = get_number(raw, "horizon", sc.spec ? 20.0 * sc.spec->spec.delay : 1.0);
  if (!(sc.horizon > 0.0) || !on_grid(sc.horizon, sc.step)) bad("horizon must be a positive multiple of the step");
  if (sc.history < 0.0 || !on_grid(sc.history, sc.step)) bad("history must be a non-negative multiple of the step");
  if (sc.task == "lift" && sc.input.empty()) {
    if (!(sc.delay > 0.0) || !on_grid(sc.delay, sc.step)) bad("lift needs a positive delay on the grid");
  }
  const double span = sc.history + sc.horizon + (sc.task == "sample-fbm" ? 0.0 : sc.delay);
  if (span / sc.step > kMaxExactCells * (1.0 + 1e-12)) bad("grid has more cells than the sampler supports");
  if ((sc.task == "decay" || sc.task == "stability-sweep") && sc.horizon < 20.0 * sc.delay * (1 - 1e-12)) {
    bad("decay runs need horizon >= 20 delay");
  }

  if (raw.contains("epsilons")) sc.epsilons = parse_epsilons(raw["epsilons"]);
  if (sc.task == "stability-sweep" && sc.epsilons.empty()) {
    for (int i = 0; i <= 10; ++i) sc.epsilons.push_back(0.1 * i);
  }
  if (!sc.epsilons.empty()) norm["epsilons"] = sc.epsilons;
  if (raw.contains("region")) {
    const json& r = raw["region"];
    if (!r.is_array() || r.size() != 4) bad("region must be [re_min, re_max, im_min, im_max]");
    Region reg{};
    double* f[4] = {&reg.re_min, &reg.re_max, &reg.im_min, &reg.im_max};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!r[i].is_number()) bad("region entries must be numbers");
      *f[i] = r[i].get<double>();
    }
    if (!(reg.re_max > reg.re_min && reg.im_max > reg.im_min)) bad("region must be a non-empty rectangle");
    sc.region = reg;
  }

  sc.out_dir = raw.contains("output_dir") ? fs::path(raw["output_dir"].get<std::string>()) : default_output_dir();
  if (sc.out_dir.is_relative() && raw.contains("output_dir") && !base.empty()) sc.out_dir = base / sc.out_dir;
  sc.out_name = raw.contains("output") ? raw["output"].get<std::string>() : default_name(sc.task);
  if (sc.out_name.empty() || fs::path(sc.out_name).has_parent_path()) bad("'output' must be a plain file name");
  norm["output_dir"] = sc.out_dir.string();
  norm["output"] = sc.out_name;
  sc.config = std::move(norm);
  return sc;
}

RunResult run_scenario(const json& config, const fs::path& base) {
  RunResult res;
  Scenario sc;
  try {
    sc = parse_scenario(config, base);
  } catch (const Error& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  } catch (const json::exception& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
    return res;
  }

  std::optional<Outputs> out;
  try {
    out.emplace(sc.out_dir, sc.out_name);
  } catch (const std::exception& e) {
    res.exit_code = kExitRuntime;
    res.message = e.what();
    return res;
  }
  Context cx{sc, *out};
  std::string status = "ok";
  try {
    dispatch(cx);
  } catch (const std::exception& e) {
    status = "failed";
    res.exit_code = kExitRuntime;
    res.message = e.what();
  }

  json manifest;
  manifest["schema"] = "rdde.manifest/1";
  manifest["task"] = sc.task;
  manifest["status"] = status;
  if (status != "ok") manifest["error"] = res.message;
  manifest["seed"] = sc.seed;
  manifest["spec_hash"] = sc.spec ? json(hash_of(sc)) : json(nullptr);
  manifest["versions"] = versions();
  manifest["files"] = out->listing();
  manifest["facts"] = cx.extra;
  manifest["config"] = sc.config;
  manifest["created"] = timestamp();
  res.manifest = out->dir() / out->name_for(".manifest.json");
  {
    std::ofstream m(res.manifest, std::ios::binary | std::ios::trunc);
    m << manifest.dump(1) << '\n';
    if (!m) {
      res.exit_code = kExitRuntime;
      res.message = "cannot write manifest " + res.manifest.string();
    }
  }
  res.files = out->files();
  return res;
}

RunResult run_scenario_file(const fs::path& file) {
  json config;
  try {
    config = read_json_file(file);
  } catch (const Error& e) {
    RunResult r;
    r.exit_code = kExitConfig;
    r.message = e.what();
    return r;
  }
  return run_scenario(config, file.parent_path());
}

namespace {

// least-squares slope of y against x
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

}  // namespace

SweepSummary stability_sweep(const EquationSpec& spec, const ControlledSegment& xi,
                             const std::vector<double>& epsilons, std::span<const DelayedRoughPath> ensemble,
                             double horizon) {
  SweepSummary sum;
  sum.spectral_abscissa = spectral_abscissa(LinearDelaySystem::from(spec));
  if (!(sum.spectral_abscissa < 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "stability sweep needs a drift with negative spectral abscissa");
  }
  std::vector<double> sorted = epsilons;
  std::sort(sorted.begin(), sorted.end());
  for (double eps : sorted) {
    EquationSpec scaled = spec;
    scaled.diffusion = spec.diffusion.scaled(eps);
    SweepRow row{eps, {}};
    try {
      row.decay = pathwise_decay_estimate(scaled, xi, ensemble, horizon);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kAllPathsAborted) throw;
      row.decay.aborted = static_cast<int>(ensemble.size());
      row.decay.outcomes.assign(ensemble.size(), PathOutcome::kAborted);
      row.decay.slopes.assign(ensemble.size(), std::nan(""));
      row.decay.median = std::nan("");
    }
    if (row.decay.median < 0.0) sum.largest_stable_epsilon = eps;
    sum.rows.push_back(std::move(row));
  }
  std::vector<double> eps, med;
  for (const auto& row : sum.rows) {
    if (!std::isfinite(row.decay.median)) continue;
    eps.push_back(row.epsilon);
    med.push_back(row.decay.median);
  }
  bool up = true, down = true;
  for (std::size_t i = 1; i < med.size(); ++i) {
    if (med[i] < med[i - 1] - sum.trend_tolerance) up = false;
    if (med[i] > med[i - 1] + sum.trend_tolerance) down = false;
  }
  sum.monotone_trend = up || down;
  if (med.size() >= 2) sum.trend_slope = least_squares_slope(eps, med);
  return sum;
}

std::vector<SampledPath> read_paths_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) bad("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("path_id,t", 0) != 0) bad(file.string() + ": missing path_id,t header");
  const int dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
  if (dim < 1) bad(file.string() + ": no component columns");

  struct Rows {
    std::vector<double> t;
    std::vector<double> v;
  };
  std::vector<std::pair<long long, Rows>> groups;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> fields;
    long long id = 0;
    for (int c = 0; std::getline(row, cell, ','); ++c) {
      char* end = nullptr;
      if (c == 0) {
        id = std::strtoll(cell.c_str(), &end, 10);
      } else {
        fields.push_back(std::strtod(cell.c_str(), &end));
      }
      if (end == cell.c_str() || *end != '\0') bad(file.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    if (static_cast<int>(fields.size()) != dim + 1) bad(file.string() + ":" + std::to_string(lineno) + ": wrong column count");
    if (groups.empty() || groups.back().first != id) groups.push_back({id, {}});
    Rows& g = groups.back().second;
    g.t.push_back(fields[0]);
    g.v.insert(g.v.end(), fields.begin() + 1, fields.end());
  }
  if (groups.empty()) bad(file.string() + ": no samples");
  std::vector<SampledPath> out;
  for (auto& [id, g] : groups) {
    SampledPath p;
    p.grid = UniformGrid::from_nodes(g.t);
    p.values = Eigen::Map<const Eigen::MatrixXd>(g.v.data(), dim, static_cast<Eigen::Index>(g.t.size()));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<DelayedRoughPath> fbm_ensemble(double hurst, int dim, double step, int delay_steps, double horizon,
                                           std::uint64_t seed, int paths) {
  const UniformGrid grid = UniformGrid::over(step, delay_steps * step, horizon);
  const FbmSampler sampler(grid, HurstParam(hurst), dim);
  std::vector<DelayedRoughPath> out;
  out.reserve(static_cast<std::size_t>(paths));
  for (int p = 0; p < paths; ++p) {
    out.push_back(lift_piecewise_linear(sampler.sample(seed, static_cast<std::uint64_t>(p)), delay_steps));
  }
  return out;
}

}  // namespace rdde
