#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "rootflow/scenario.hpp"

using namespace rootflow;
using Catch::Approx;
namespace num = std::numbers;

namespace {

nlohmann::json strip_timing(nlohmann::json j) {
  j.erase("timing_seconds");
  return j;
}

nlohmann::json load_schema() {
  std::ifstream in(ROOTFLOW_SCHEMA_PATH);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("registry lists every built-in scenario with a description") {
  const auto names = list_scenarios();
  CHECK(names.size() == 9);
  bool found_broken = false;
  for (const auto& [name, description] : names) {
    CHECK_FALSE(description.empty());
    if (name == "broken-coherency") {
      found_broken = true;
      CHECK(description.find("expected failure") != std::string::npos);
    }
  }
  CHECK(found_broken);
  for (const char* required : {"circle-antipodal", "s3-antipodal-i", "s3-antipodal-j",
                               "circle-perturbed-rotation", "solved-sqrt-chain",
                               "negative-reflection", "group-probe-circle", "group-probe-s3"})
    CHECK(find_scenario(required) != nullptr);
  CHECK(find_scenario("negative-reflection")->description.find("expected failure") !=
        std::string::npos);
}

TEST_CASE("a small rotation scenario passes end to end") {
  ScenarioConfig cfg;
  cfg.name = "unit-small";
  cfg.source = SourceKind::Rotations;
  cfg.angle = num::pi;
  cfg.depth = 6;
  cfg.grid = 32;
  cfg.tol = 1e-12;
  cfg.tol_condition5 = 1e-10;
  cfg.tol_lemma = 1e-11;
  cfg.extract_tol = 1e-10;
  cfg.round_trip_tol = 1e-9;
  cfg.extract_depth = 3;
  cfg.richardson = 1;
  cfg.checks.symmetry = true;
  cfg.checks.mirror_system = true;
  const RunReport r = run_scenario(cfg);
  CHECK(r.overall_pass);
  CHECK(r.exit_status == 0);
  CHECK(r.checks.find("condition-2") != nullptr);
  CHECK(r.checks.find("mirror:condition-2") != nullptr);
  CHECK(r.checks.find("intertwine") != nullptr);
  CHECK(r.checks.find("conjugacy") != nullptr);
  CHECK(r.checks.find("round-trip") != nullptr);
}

TEST_CASE("reports are deterministic apart from timing") {
  const ScenarioConfig* cfg = find_scenario("group-probe-circle");
  REQUIRE(cfg != nullptr);
  const nlohmann::json a = strip_timing(run_report_to_json(run_scenario(*cfg)));
  const nlohmann::json b = strip_timing(run_report_to_json(run_scenario(*cfg)));
  CHECK(a.dump(2) == b.dump(2));
}

TEST_CASE("run reports validate against the published schema") {
  const nlohmann::json schema = load_schema();
  ScenarioConfig cfg;
  cfg.name = "schema-probe";
  cfg.depth = 4;
  cfg.grid = 16;
  cfg.tol_condition5 = 1e-8;
  cfg.extract_depth = 2;
  cfg.richardson = 1;
  const RunReport r = run_scenario(cfg);
  CHECK(r.overall_pass);
  const nlohmann::json doc = run_report_to_json(r);
  CHECK(validate_against_schema(doc, schema).empty());

  SECTION("schema rejects missing and mistyped fields") {
    nlohmann::json broken = doc;
    broken.erase("scenario");
    CHECK_FALSE(validate_against_schema(broken, schema).empty());

    nlohmann::json mistyped = doc;
    mistyped["overall_pass"] = "yes";
    CHECK_FALSE(validate_against_schema(mistyped, schema).empty());

    nlohmann::json extra = doc;
    extra["unexpected"] = 1;
    CHECK_FALSE(validate_against_schema(extra, schema).empty());
  }
}

TEST_CASE("the reflection scenario fails with an orientation witness") {
  const ScenarioConfig* cfg = find_scenario("negative-reflection");
  REQUIRE(cfg != nullptr);
  const RunReport r = run_scenario(*cfg);
  CHECK_FALSE(r.overall_pass);
  CHECK(r.exit_status == 1);
  const CheckEntry* iso = r.checks.find("condition-1");
  REQUIRE(iso != nullptr);
  CHECK_FALSE(iso->pass);
  CHECK(iso->witness.find("degree -1") != std::string::npos);
}

TEST_CASE("the broken-coherency scenario fails loudly and diagnostically") {
  const ScenarioConfig* cfg = find_scenario("broken-coherency");
  REQUIRE(cfg != nullptr);
  const RunReport r = run_scenario(*cfg);
  CHECK_FALSE(r.overall_pass);
  CHECK(r.exit_status == 1);

  const CheckEntry* coherency = r.checks.find("condition-4");
  REQUIRE(coherency != nullptr);
  CHECK_FALSE(coherency->pass);
  CHECK(coherency->residual >= 0.09);

  const CheckEntry* diag = r.checks.find("eval-real-diagnostic");
  REQUIRE(diag != nullptr);
  CHECK(diag->pass);  // aborting is the expected behavior here
  CHECK_FALSE(diag->table.empty());
}

TEST_CASE("construction failures are reported as a stage, not a crash") {
  ScenarioConfig cfg;
  cfg.name = "bad-axis";
  cfg.manifold = ManifoldKind::Sphere3;
  cfg.source = SourceKind::QuatChain;
  cfg.axis = 'q';
  cfg.grid = 8;
  const RunReport r = run_scenario(cfg);
  CHECK(r.exit_status == 2);
  CHECK(r.note.find("construction") != std::string::npos);
  CHECK(r.note.find("axis") != std::string::npos);
}

TEST_CASE("invalid scenario parameters are rejected before any stage") {
  ScenarioConfig cfg;
  cfg.depth = 0;
  CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
  cfg.depth = 4;
  cfg.tol = -1.0;
  CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
}

TEST_CASE("config files parse into scenario configurations") {
  std::istringstream ini(R"(# comment line
[scenario]
name = demo
manifold = circle
source = from-field
depth = 10
grid = 48
seed = 12
tol = 1e-8
angle = -pi/2

[field]
constant = pi
sin1 = 0.3
cos2 = 0.05

[checks]
conditions = on
order-check = on

[output]
dir = /tmp/demo-out
)");
  const ScenarioConfig cfg = parse_scenario_config(ini);
  CHECK(cfg.name == "demo");
  CHECK(cfg.source == SourceKind::FromField);
  CHECK(cfg.depth == 10);
  CHECK(cfg.grid == 48);
  CHECK(cfg.seed == 12);
  CHECK(cfg.angle == Approx(-num::pi / 2).margin(1e-15));
  CHECK(cfg.field_c0 == Approx(num::pi).margin(1e-15));
  REQUIRE(cfg.field_sin.size() == 1);
  CHECK(cfg.field_sin[0] == 0.3);
  REQUIRE(cfg.field_cos.size() == 2);
  CHECK(cfg.field_cos[1] == 0.05);
  // a [checks] section replaces the default set wholesale
  CHECK(cfg.checks.conditions);
  CHECK(cfg.checks.order_check);
  CHECK_FALSE(cfg.checks.round_trip);
  CHECK_FALSE(cfg.checks.lemma);
  CHECK(cfg.out_dir == "/tmp/demo-out");
}

TEST_CASE("config files reject unknown keys, sections, and flags") {
  {
    std::istringstream ini("[scenario]\nbogus = 1\n");
    CHECK_THROWS_AS(parse_scenario_config(ini), ConfigError);
  }
  {
    std::istringstream ini("[nope]\nx = 1\n");
    CHECK_THROWS_AS(parse_scenario_config(ini), ConfigError);
  }
  {
    std::istringstream ini("[checks]\nconditions = maybe\n");
    CHECK_THROWS_AS(parse_scenario_config(ini), ConfigError);
  }
  {
    std::istringstream ini("[scenario]\nangle = 2pi\n");
    CHECK_THROWS_AS(parse_scenario_config(ini), ConfigError);
  }
  {
    std::istringstream ini("[scenario]\nno equals sign here\n");
    CHECK_THROWS_AS(parse_scenario_config(ini), ConfigError);
  }
}

TEST_CASE("number expressions accept the pi forms") {
  CHECK(detail::parse_number_expr("pi") == Approx(num::pi).margin(1e-16));
  CHECK(detail::parse_number_expr("2*pi") == Approx(2 * num::pi).margin(1e-15));
  CHECK(detail::parse_number_expr("pi/4") == Approx(num::pi / 4).margin(1e-16));
  CHECK(detail::parse_number_expr("3*pi/4") == Approx(3 * num::pi / 4).margin(1e-15));
  CHECK(detail::parse_number_expr("-pi") == Approx(-num::pi).margin(1e-16));
  CHECK(detail::parse_number_expr("1.5e-3") == Approx(1.5e-3).margin(1e-18));
}

TEST_CASE("field CSV export writes one row per grid point") {
  const auto dir = std::filesystem::temp_directory_path() / "rootflow-test-csv";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "field.csv").string();
  const auto grid = sample_grid(ManifoldId::circle(), 8);
  export_field_csv(VectorFieldEstimate::constant_circle(num::pi), grid, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "theta,v");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.find(',') != std::string::npos);
  }
  CHECK(rows == 8);
}

TEST_CASE("trajectory CSV export records the requested steps") {
  const auto dir = std::filesystem::temp_directory_path() / "rootflow-test-csv";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "traj.csv").string();
  export_trajectory_csv(VectorFieldEstimate::constant_circle(1.0), Point::circle(0.0), 1.0, 10,
                        {}, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "t,theta");
  int rows = 0;
  double last_t = -1.0, last_th = -1.0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string tcol, thcol;
    std::getline(ls, tcol, ',');
    std::getline(ls, thcol, ',');
    last_t = std::stod(tcol);
    last_th = std::stod(thcol);
  }
  CHECK(rows == 11);
  CHECK(last_t == Approx(1.0).margin(1e-15));
  CHECK(last_th == Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(export_trajectory_csv(VectorFieldEstimate::constant_circle(1.0),
                                        Point::circle(0.0), 1.0, 0, {}, path),
                  ConfigError);
}

TEST_CASE("scenario output lands in the requested directory") {
  const auto dir = std::filesystem::temp_directory_path() / "rootflow-test-out";
  std::filesystem::remove_all(dir);
  ScenarioConfig cfg;
  cfg.name = "outdir-probe";
  cfg.depth = 4;
  cfg.grid = 16;
  cfg.tol_condition5 = 1e-8;
  cfg.extract_depth = 2;
  cfg.richardson = 1;
  cfg.out_dir = dir.string();
  const RunReport r = run_scenario(cfg);
  CHECK(r.overall_pass);
  CHECK(std::filesystem::exists(dir / "outdir-probe.report.json"));
  CHECK(std::filesystem::exists(dir / "outdir-probe.field.csv"));

  std::ifstream in(dir / "outdir-probe.report.json");
  const nlohmann::json doc = nlohmann::json::parse(in);
  CHECK(doc["scenario"] == "outdir-probe");
  CHECK(validate_against_schema(doc, load_schema()).empty());
}

TEST_CASE("shipped example configs load, run, and export as documented") {
  const std::string dir = ROOTFLOW_CONFIG_DIR;

  const ScenarioConfig wobble = load_scenario_config(dir + "/circle-wobble.ini");
  CHECK(wobble.name == "circle-wobble");
  CHECK(wobble.source == SourceKind::FromField);
  CHECK(wobble.depth == 10);
  CHECK(wobble.field_c0 == Approx(num::pi));
  REQUIRE(wobble.field_sin.size() == 1);
  CHECK(wobble.field_sin[0] == Approx(0.3));
  REQUIRE(wobble.field_cos.size() == 2);
  CHECK(wobble.field_cos[1] == Approx(0.1));

  ScenarioConfig shallow = load_scenario_config(dir + "/quat-chain-shallow.ini");
  CHECK(shallow.manifold == ManifoldKind::Sphere3);
  CHECK(shallow.axis == 'j');
  const RunReport chain_run = run_scenario(shallow);
  CHECK(chain_run.overall_pass);
  CHECK(chain_run.exit_status == 0);

  ScenarioConfig zero = load_scenario_config(dir + "/zero-field.ini");
  const auto out = std::filesystem::temp_directory_path() / "rootflow-test-zero";
  std::filesystem::remove_all(out);
  zero.out_dir = out.string();
  const RunReport zero_run = run_scenario(zero);
  CHECK(zero_run.overall_pass);

  std::ifstream csv(out / "zero-field.field.csv");
  REQUIRE(csv.good());
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "theta,v");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const std::string v = line.substr(line.find(',') + 1);
    CHECK(std::stod(v) == 0.0);
  }
  CHECK(rows == 64);
}
