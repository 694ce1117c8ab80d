// Command line front end: run verification scenarios, export fields and
// trajectories, list the registry.  Exit codes: 0 all checks passed,
// 1 at least one check failed, 2 configuration or construction error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rootflow/scenario.hpp"

namespace {

using namespace rootflow;

struct Overrides {
  std::optional<int> grid, depth;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<std::string> out_dir, json_path;
};

void add_override_flags(CLI::App* sub, Overrides& ov) {
  sub->add_option("--grid", ov.grid, "sample grid resolution");
  sub->add_option("--seed", ov.seed, "sample grid seed");
  sub->add_option("--depth", ov.depth, "dyadic depth of the root family");
  sub->add_option("--tol", ov.tol, "tolerance for conditions 2-4");
  sub->add_option("--out", ov.out_dir, "output directory for reports and CSV files");
  sub->add_option("--json", ov.json_path, "explicit report JSON path");
}

ScenarioConfig resolve(const std::string& spec, const Overrides& ov) {
  ScenarioConfig cfg;
  if (const ScenarioConfig* named = find_scenario(spec)) {
    cfg = *named;
  } else if (std::filesystem::exists(spec)) {
    cfg = load_scenario_config(spec);
  } else {
    throw ConfigError("'" + spec + "' is neither a built-in scenario nor a config file; try 'rootflow list'");
  }
  if (ov.grid) cfg.grid = *ov.grid;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.depth) cfg.depth = *ov.depth;
  if (ov.tol) cfg.tol = *ov.tol;
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.json_path) cfg.json_path = *ov.json_path;
  return cfg;
}

int print_report(const RunReport& r) {
  for (const CheckEntry& e : r.checks.entries) {
    std::printf("%-28s residual=%-12.5g tol=%-9.3g %s\n", e.id.c_str(), e.residual, e.tolerance,
                e.pass ? "PASS" : "FAIL");
    if (!e.pass && !e.witness.empty()) std::printf("    witness: %s\n", e.witness.c_str());
    for (const std::string& u : e.untestable) std::printf("    untestable: %s\n", u.c_str());
  }
  if (!r.note.empty()) std::printf("note: %s\n", r.note.c_str());
  std::printf("%s: %s  (%zu checks, %.3f s)\n", r.scenario.c_str(),
              r.overall_pass ? "PASS" : "FAIL", r.checks.entries.size(), r.elapsed_seconds);
  return r.exit_status;
}

int cmd_run(const std::string& spec, const Overrides& ov) {
  return print_report(run_scenario(resolve(spec, ov)));
}

int cmd_verify(const std::string& spec, const Overrides& ov) {
  ScenarioConfig cfg = resolve(spec, ov);
  const bool lemma = cfg.checks.lemma;
  cfg.checks = ScenarioChecks{};
  cfg.checks.conditions = true;
  cfg.checks.lemma = lemma;
  cfg.checks.flow_axioms = cfg.checks.extract = cfg.checks.round_trip = false;
  return print_report(run_scenario(cfg));
}

int cmd_symmetry(const std::string& spec, const Overrides& ov) {
  ScenarioConfig cfg = resolve(spec, ov);
  if (!cfg.checks.symmetry && !cfg.checks.group_probe)
    throw ConfigError("scenario '" + cfg.name + "' defines no symmetry or group-probe checks");
  const ScenarioChecks orig = cfg.checks;
  cfg.checks = ScenarioChecks{};
  cfg.checks.conditions = cfg.checks.lemma = cfg.checks.flow_axioms = false;
  cfg.checks.extract = cfg.checks.round_trip = false;
  cfg.checks.symmetry = orig.symmetry;
  cfg.checks.group_probe = orig.group_probe;
  return print_report(run_scenario(cfg));
}

int cmd_extract(const std::string& spec, const Overrides& ov, int extract_depth, int richardson) {
  ScenarioConfig cfg = resolve(spec, ov);
  if (cfg.source == SourceKind::Reflection || cfg.source == SourceKind::BrokenRotations)
    throw ConfigError("scenario '" + cfg.name + "' has no coherent root family to extract from");
  if (extract_depth > 0) cfg.extract_depth = extract_depth;
  if (richardson >= 0) cfg.richardson = richardson;
  cfg.checks = ScenarioChecks{};
  cfg.checks.conditions = cfg.checks.lemma = cfg.checks.flow_axioms = cfg.checks.round_trip = false;
  cfg.checks.extract = true;
  if (cfg.out_dir.empty()) cfg.out_dir = ".";
  return print_report(run_scenario(cfg));
}

int cmd_integrate(const std::string& spec, const Overrides& ov, double time, int steps) {
  ScenarioConfig cfg = resolve(spec, ov);
  if (cfg.source == SourceKind::Reflection || cfg.source == SourceKind::BrokenRotations)
    throw ConfigError("scenario '" + cfg.name + "' has no generating vector field to integrate");
  const VectorFieldEstimate field = scenario_field(cfg);
  const ManifoldId m = field.manifold();
  const Point start = sample_grid(m, std::max(cfg.grid, 1), cfg.seed).front();
  const std::string dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
  std::filesystem::create_directories(dir);
  const std::string path =
      (std::filesystem::path(dir) / (cfg.name + ".trajectory.csv")).string();
  export_trajectory_csv(field, start, time, steps, cfg.integrator, path);
  std::printf("wrote %s (%d steps to t=%g)\n", path.c_str(), steps, time);
  return 0;
}

int cmd_list() {
  for (const auto& [name, description] : list_scenarios())
    std::printf("%-26s %s\n", name.c_str(), description.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyadic root families of diffeomorphisms: build, verify, extract"};
  app.set_version_flag("--version", rootflow::kVersion);
  app.require_subcommand(1);

  std::string spec;
  Overrides ov;
  int extract_depth = -1, richardson = -1, steps = 100;
  double time = 1.0;

  CLI::App* run = app.add_subcommand("run", "run a scenario's full check suite");
  run->add_option("scenario", spec, "built-in name or config file path")->required();
  add_override_flags(run, ov);

  CLI::App* verify = app.add_subcommand("verify", "run only the root family conditions");
  verify->add_option("scenario", spec, "built-in name or config file path")->required();
  add_override_flags(verify, ov);

  CLI::App* symmetry = app.add_subcommand("symmetry", "run only symmetry and group probe checks");
  symmetry->add_option("scenario", spec, "built-in name or config file path")->required();
  add_override_flags(symmetry, ov);

  CLI::App* extract = app.add_subcommand("extract", "extract the generating field to CSV");
  extract->add_option("scenario", spec, "built-in name or config file path")->required();
  extract->add_option("--extract-depth", extract_depth, "dyadic depth of the difference quotient");
  extract->add_option("--richardson", richardson, "extrapolation levels");
  add_override_flags(extract, ov);

  CLI::App* integrate = app.add_subcommand("integrate", "integrate the scenario field to CSV");
  integrate->add_option("scenario", spec, "built-in name or config file path")->required();
  integrate->add_option("--time", time, "integration time (default 1)");
  integrate->add_option("--steps", steps, "number of CSV rows after t=0 (default 100)");
  add_override_flags(integrate, ov);

  CLI::App* list = app.add_subcommand("list", "list built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(spec, ov);
    if (verify->parsed()) return cmd_verify(spec, ov);
    if (symmetry->parsed()) return cmd_symmetry(spec, ov);
    if (extract->parsed()) return cmd_extract(spec, ov, extract_depth, richardson);
    if (integrate->parsed()) return cmd_integrate(spec, ov, time, steps);
    if (list->parsed()) return cmd_list();
  } catch (const rootflow::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
