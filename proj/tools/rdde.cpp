// rdde: command-line front end. Each subcommand assembles a scenario and hands
// it to the same runner used by `rdde run config.json`.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "rdde/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string spec;
  double hurst = 0.5;
  double step = 0.0;
  int segments = 64;
  double horizon = 0.0;
  double delay = 0.0;
  int dim = 1;
  int paths = 1;
  std::uint64_t seed = 1;
  int k = 1;
  int iters = 200;
  int burn_in = -1;
  double gamma = 0.35;
  std::vector<double> sweep;   // e0 e1 n
  std::vector<double> region;  // re0 re1 im0 im1
  std::vector<double> span;    // T- T+
  std::string input;
  int delay_steps = 0;
  std::string out;
};

json build_config(const std::string& task, const Flags& f, CLI::App& sub) {
  json c;
  c["task"] = task;
  const auto given = [&](const char* name) {
    const CLI::Option* o = sub.get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (!f.spec.empty()) c["spec"] = fs::absolute(f.spec).string();
  if (given("--hurst")) c["hurst"] = f.hurst;
  if (given("--step")) c["step"] = f.step;
  if (given("--segments")) c["segments"] = f.segments;
  if (given("--horizon")) c["horizon"] = f.horizon;
  if (given("--delay")) c["delay"] = f.delay;
  if (given("--dim")) c["dim"] = f.dim;
  if (given("--paths")) c["paths"] = f.paths;
  if (given("--seed")) c["seed"] = f.seed;
  if (given("--k")) c["k"] = f.k;
  if (given("--iters")) c["iterations"] = f.iters;
  if (given("--burn-in")) c["burn_in"] = f.burn_in;
  if (given("--gamma")) c["gamma"] = f.gamma;
  if (given("--span")) {
    c["history"] = f.span[0];
    c["horizon"] = f.span[1];
  }
  if (given("--in")) c["input"] = fs::absolute(f.input).string();
  if (given("--delay-steps")) c["delay_steps"] = f.delay_steps;
  if (given("--epsilon-sweep")) {
    c["epsilons"] = {{"from", f.sweep[0]}, {"to", f.sweep[1]}, {"count", static_cast<long long>(f.sweep[2])}};
  }
  if (given("--region")) c["region"] = f.region;
  if (!f.out.empty()) {
    const fs::path p = fs::absolute(f.out);
    c["output_dir"] = p.parent_path().string();
    c["output"] = p.filename().string();
  }
  return c;
}

int report(const rdde::RunResult& r) {
  for (const auto& f : r.files) std::cout << f.string() << '\n';
  if (!r.manifest.empty()) std::cout << r.manifest.string() << '\n';
  if (r.exit_code != rdde::kExitOk) std::cerr << "rdde: " << r.message << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rough delay equations: fBm drivers, solver, Lyapunov spectra and characteristic roots"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rdde::kLibraryVersion);

  Flags f;
  std::string config;
  std::vector<std::pair<std::string, CLI::App*>> subs;

  const auto add = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    subs.emplace_back(name, s);
    s->add_option("--out", f.out, "output file (directory from $RDDE_OUTPUT_DIR when omitted)");
    s->add_option("--seed", f.seed, "base seed for the per-path random streams");
    return s;
  };
  const auto noise = [&](CLI::App* s) {
    s->add_option("--hurst", f.hurst, "Hurst index in (1/3, 1)");
    s->add_option("--paths", f.paths, "ensemble size");
  };
  const auto with_spec = [&](CLI::App* s, bool required = true) {
    auto* o = s->add_option("--spec", f.spec, "equation spec (JSON)")->check(CLI::ExistingFile);
    if (required) o->required();
    s->add_option("--segments", f.segments, "nodes per delay window minus one (step = delay / segments)");
    s->add_option("--step", f.step, "grid step; must equal delay / segments");
  };

  auto* sample = add("sample-fbm", "sample fractional Brownian motion paths to CSV");
  noise(sample);
  sample->add_option("--step", f.step, "grid step")->required();
  sample->add_option("--span", f.span, "T- T+: the grid covers [-T-, T+]")->expected(2)->required();
  sample->add_option("--dim", f.dim, "number of components");

  auto* lift = add("lift", "delayed rough path lift of sampled paths (from --in, or fresh fBm) as JSON");
  noise(lift);
  lift->add_option("--in", f.input, "CSV written by sample-fbm")->check(CLI::ExistingFile);
  lift->add_option("--delay-steps", f.delay_steps, "delay in grid steps");
  lift->add_option("--step", f.step, "grid step when sampling");
  lift->add_option("--horizon", f.horizon, "right end of the lift window when sampling");
  lift->add_option("--delay", f.delay, "delay r when sampling (multiple of the step)");
  lift->add_option("--dim", f.dim, "number of components");
  lift->add_option("--gamma", f.gamma, "Hölder exponent for the norm report");

  auto* solve = add("solve", "solve the equation along fBm drivers; CSV per node");
  with_spec(solve);
  noise(solve);
  solve->add_option("--horizon", f.horizon, "final time T");

  auto* lyap = add("lyapunov", "Lyapunov exponents of the linearised cocycle by iterated QR");
  with_spec(lyap);
  noise(lyap);
  lyap->add_option("--iters", f.iters, "r-steps per path, burn-in included");
  lyap->add_option("--burn-in", f.burn_in, "discarded r-steps (default iters / 10)");
  lyap->add_option("--k", f.k, "number of exponents");

  auto* decay = add("decay", "pathwise decay slopes; with --epsilon-sweep runs a stability sweep");
  with_spec(decay);
  noise(decay);
  decay->add_option("--horizon", f.horizon, "final time T (at least 20 r)");
  decay->add_option("--epsilon-sweep", f.sweep, "e0 e1 n")->expected(3);

  auto* spectrum = add("spectrum", "characteristic roots of the drift");
  with_spec(spectrum);
  spectrum->add_option("--region", f.region, "re0 re1 im0 im1 (adaptive when omitted)")->expected(4);

  auto* sweep = add("stability-sweep", "median decay slope over a noise-intensity grid");
  with_spec(sweep);
  noise(sweep);
  sweep->add_option("--horizon", f.horizon, "final time T (at least 20 r)");
  sweep->add_option("--epsilon-sweep", f.sweep, "e0 e1 n (default 0 1 11)")->expected(3);

  auto* run = app.add_subcommand("run", "run a scenario file (or replay a manifest)");
  run->add_option("config", config, "scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rdde::kExitConfig;
  }

  if (run->parsed()) return report(rdde::run_scenario_file(config));
  for (auto& [name, s] : subs) {
    if (s->parsed()) return report(rdde::run_scenario(build_config(name, f, *s)));
  }
  return rdde::kExitConfig;
}
