#pragma once

// Scenario runner behind the rdde command-line tool. Every task reads a JSON
// scenario (schema "rdde.scenario/1"), writes its artifacts into one
// directory and leaves a manifest with the seed, spec hash and versions.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rdde/cocycle_dynamics.hpp"
#include "rdde/dde_spectrum.hpp"
#include "rdde/spec_io.hpp"

namespace rdde {

inline constexpr const char* kLibraryVersion = "0.3.0";
inline constexpr const char* kOutputDirEnv = "RDDE_OUTPUT_DIR";

struct Scenario {
  std::string task;
  std::optional<SpecDocument> spec;
  double hurst = 0.5;
  int segments = 64;         // M, with step r / M
  double step = 0.0;         // for tasks without a spec
  double delay = 0.0;        // for lift without a spec
  int delay_steps = 0;       // lift: delay in grid steps
  std::filesystem::path input;  // lift: sample CSV to lift instead of fresh fBm
  double history = 0.0;      // sample-fbm: grid starts at -history
  double horizon = 1.0;
  int dim = 1;
  int paths = 1;
  std::uint64_t seed = 1;
  int k = 1;
  int iterations = 200;
  int burn_in = -1;
  double gamma = 0.35;
  std::vector<double> epsilons;
  std::optional<Region> region;
  std::filesystem::path out_dir;
  std::string out_name;      // primary output file name
  nlohmann::json config;     // normalised scenario, stored in the manifest
};

/// Exit codes of run_scenario and the CLI.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

/// Default output directory: $RDDE_OUTPUT_DIR or ./rdde_out.
std::filesystem::path default_output_dir();

/// Validates a scenario object. Relative spec paths resolve against `base`.
/// A manifest written by an earlier run is accepted and replays its config.
Scenario parse_scenario(const nlohmann::json& config, const std::filesystem::path& base = {});

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
  std::string message;
};

/// Runs one scenario. Errors never escape: config problems give exit 2,
/// runtime failures exit 1 with a manifest marked "failed".
RunResult run_scenario(const nlohmann::json& config, const std::filesystem::path& base = {});
RunResult run_scenario_file(const std::filesystem::path& file);

struct SweepRow {
  double epsilon = 0.0;
  DecayReport decay;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  double spectral_abscissa = 0.0;
  std::optional<double> largest_stable_epsilon;  // largest eps with median slope < 0
  bool monotone_trend = false;  // medians monotone in eps (either direction) up to tolerance
  double trend_tolerance = 1e-2;
  double trend_slope = 0.0;     // least-squares slope of median against eps
};

/// Pathwise decay over an epsilon grid with diffusion scaled by eps.
/// Requires a stable drift (spectral abscissa < 0).
SweepSummary stability_sweep(const EquationSpec& spec, const ControlledSegment& xi,
                             const std::vector<double>& epsilons, std::span<const DelayedRoughPath> ensemble,
                             double horizon);

/// Reads the CSV written by sample-fbm (path_id, t, component_*).
std::vector<SampledPath> read_paths_csv(const std::filesystem::path& file);

/// Driver ensemble on [-r, T] lifted with delay r: fBm of index `hurst` with
/// per-path streams of `seed`.
std::vector<DelayedRoughPath> fbm_ensemble(double hurst, int dim, double step, int delay_steps, double horizon,
                                           std::uint64_t seed, int paths);

}  // namespace rdde
