#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rootflow/flow.hpp"
#include "rootflow/report_json.hpp"
#include "rootflow/root_system.hpp"
#include "rootflow/sqrt_solver.hpp"
#include "rootflow/symmetry.hpp"
#include "rootflow/version.hpp"

namespace rootflow {

enum class SourceKind {
  Rotations,        // g_b = rotation(angle/b), target rotation(angle)
  QuatChain,        // principal square-root chain for the 3-sphere antipodal map
  FromField,        // g_b = time-1/b flow map of [field]
  SolveChain,       // functional square-root solver on rotation(angle), plus
                    // a solver chain on the time-1 map of [field] when set
  Reflection,       // circle reflection target; the orientation check rejects it
  BrokenRotations,  // rotations with every even dyadic level offset by perturb
};

struct ScenarioChecks {
  bool conditions = true;
  bool lemma = true;
  bool flow_axioms = true;
  bool extract = true;
  bool round_trip = true;
  bool symmetry = false;       // intertwining + flow conjugacy (+ distinctness on the 3-sphere)
  bool mirror_system = false;  // independently verify the mirrored root system
  bool order_check = false;    // extraction error ratio between consecutive depths
  bool group_probe = false;
  bool solver_compare = false;        // solved chains vs exact / flow-built roots
  bool eval_real_diagnostic = false;  // expect the dyadic refinement to abort
};

struct ScenarioConfig {
  std::string name = "custom";
  std::string description;
  ManifoldKind manifold = ManifoldKind::Circle;
  SourceKind source = SourceKind::Rotations;
  double angle = std::numbers::pi;  // rotation-family targets
  char axis = 'i';                  // quat chain seed axis
  int depth = 12;                   // index set {2^1, ..., 2^depth}
  int grid = 128;
  std::uint64_t seed = 1;
  double perturb = 0.05;

  double tol = 1e-10;            // conditions 2-4, flow axioms
  double tol_condition5 = 1e-3;  // convergence-to-identity deviation
  double tol_lemma = 1e-10;
  double extract_tol = 1e-6;
  double round_trip_tol = 1e-6;
  double intertwine_tol = 1e-12;
  double conjugacy_tol = 1e-10;
  double group_tol = 1e-12;
  double solver_rotation_tol = 1e-8;  // solved g_{2^c} vs rotation(angle/2^c)
  double compare_tol = 1e-6;          // solved chain vs flow-built chain

  int extract_depth = 4;
  int richardson = 2;
  IntegratorSettings integrator;
  SqrtSolverSettings solver;

  double field_c0 = 0.0;  // [field]: speed(theta) = c0 + sum cos_k/sin_k harmonics
  std::vector<double> field_cos, field_sin;

  ScenarioChecks checks;
  std::string out_dir;     // when set: report JSON + field CSV are written here
  std::string json_path;   // explicit report path (overrides out_dir naming)
};

struct RunReport {
  std::string scenario;
  std::string version = kVersion;
  VerificationReport checks;
  double elapsed_seconds = 0.0;
  bool overall_pass = false;
  int exit_status = 2;  // 0 pass, 1 check failure, 2 construction/config error
  int grid_resolution = 0;
  std::uint64_t seed = 0;
  std::string precision = "ieee-binary64";
  std::string note;
};

inline nlohmann::json run_report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["version"] = r.version;
  nlohmann::json entries = nlohmann::json::array();
  for (const CheckEntry& e : r.checks.entries) entries.push_back(check_entry_to_json(e));
  j["checks"] = std::move(entries);
  j["overall_pass"] = r.overall_pass;
  j["note"] = r.note;
  j["timing_seconds"] = r.elapsed_seconds;
  j["environment"] = {{"grid_resolution", r.grid_resolution},
                      {"seed", r.seed},
                      {"precision", r.precision}};
  return j;
}

inline std::string run_report_dump(const RunReport& r) { return run_report_to_json(r).dump(2) + "\n"; }

namespace detail {

inline Quat axis_quat(char axis) {
  switch (axis) {
    case 'i': return {0.0, 1.0, 0.0, 0.0};
    case 'j': return {0.0, 0.0, 1.0, 0.0};
    case 'k': return {0.0, 0.0, 0.0, 1.0};
    default: throw ConfigError(std::string("unknown quaternion axis '") + axis + "'");
  }
}

inline char mirror_axis(char axis) { return axis == 'i' ? 'j' : 'i'; }

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline VectorFieldEstimate scenario_field(const ScenarioConfig& cfg) {
  switch (cfg.manifold) {
    case ManifoldKind::Circle:
      if (cfg.source == SourceKind::FromField ||
          !(cfg.field_cos.empty() && cfg.field_sin.empty() && cfg.field_c0 == 0.0)) {
        if (cfg.field_cos.empty() && cfg.field_sin.empty())
          return VectorFieldEstimate::constant_circle(cfg.field_c0);
        return VectorFieldEstimate::circle_fourier(cfg.field_c0, cfg.field_cos, cfg.field_sin);
      }
      return VectorFieldEstimate::constant_circle(cfg.angle);
    case ManifoldKind::Sphere3:
      return VectorFieldEstimate::left_invariant_s3(std::numbers::pi *
                                                    detail::axis_quat(cfg.axis));
    case ManifoldKind::Torus:
      throw ConfigError("scenario_field: no torus scenario field configured");
  }
  throw ConfigError("scenario_field: unknown manifold");
}

inline RootSystem build_rotation_system(double angle, int depth, double perturb_even) {
  std::map<std::int64_t, Diffeo> roots;
  for (int c = 1; c <= depth; ++c) {
    const std::int64_t b = std::int64_t{1} << c;
    double a = angle / static_cast<double>(b);
    if (perturb_even != 0.0 && c % 2 == 0) a += perturb_even;
    roots.emplace(b, Diffeo::circle_rotation(a));
  }
  return RootSystem(Diffeo::circle_rotation(angle), std::move(roots), Provenance::Analytic);
}

inline RootSystem build_reflection_system() {
  std::map<std::int64_t, Diffeo> roots;
  for (std::int64_t b : {2, 4, 8}) roots.emplace(b, Diffeo::circle_reflection());
  return RootSystem(Diffeo::circle_reflection(), std::move(roots), Provenance::Analytic);
}

/// Field CSV: header row, then one row per grid point with the point's
/// coordinates followed by the tangent components of est at that point,
/// %.17g columns.  Column order: circle theta,v; 3-sphere qw,qx,qy,qz then
/// vw,vx,vy,vz; torus x0..x{d-1} then v0..v{d-1}.
inline void export_field_csv(const VectorFieldEstimate& est, const std::vector<Point>& grid,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("export_field_csv: cannot open " + path);
  const ManifoldId m = est.manifold();
  switch (m.kind) {
    case ManifoldKind::Circle: out << "theta,v\n"; break;
    case ManifoldKind::Sphere3: out << "qw,qx,qy,qz,vw,vx,vy,vz\n"; break;
    case ManifoldKind::Torus: {
      for (int d = 0; d < m.coord_size(); ++d) out << "x" << d << ",";
      for (int d = 0; d < m.coord_size(); ++d) out << "v" << d << (d + 1 < m.coord_size() ? "," : "");
      out << "\n";
      break;
    }
  }
  for (const Point& p : grid) {
    const Tangent v = est.eval(p);
    bool first = true;
    for (double c : p.coords) {
      if (!first) out << ",";
      out << detail::format_g17(c);
      first = false;
    }
    for (double c : v.vec) out << "," << detail::format_g17(c);
    out << "\n";
  }
  if (!out.good()) throw Error("export_field_csv: write to " + path + " failed");
}

/// Trajectory CSV of the scenario's field from one start point: rows t then
/// the point coordinates, steps+1 rows from t=0 to t=time.
inline void export_trajectory_csv(const VectorFieldEstimate& field, const Point& start,
                                  double time, int steps, const IntegratorSettings& settings,
                                  const std::string& path) {
  if (steps < 1) throw ConfigError("export_trajectory_csv: steps must be >= 1");
  std::ofstream out(path);
  if (!out) throw Error("export_trajectory_csv: cannot open " + path);
  switch (field.manifold().kind) {
    case ManifoldKind::Circle: out << "t,theta\n"; break;
    case ManifoldKind::Sphere3: out << "t,qw,qx,qy,qz\n"; break;
    case ManifoldKind::Torus: {
      out << "t";
      for (int d = 0; d < field.manifold().coord_size(); ++d) out << ",x" << d;
      out << "\n";
      break;
    }
  }
  Point p = start;
  const double dt = time / static_cast<double>(steps);
  for (int s = 0; s <= steps; ++s) {
    out << detail::format_g17(dt * static_cast<double>(s));
    for (double c : p.coords) out << "," << detail::format_g17(c);
    out << "\n";
    if (s < steps) p = integrate_field(field, dt, p, settings);
  }
  if (!out.good()) throw Error("export_trajectory_csv: write to " + path + " failed");
}

namespace detail {

inline void append_prefixed(VerificationReport& into, VerificationReport from,
                            const std::string& prefix) {
  for (CheckEntry& e : from.entries) {
    e.id = prefix + e.id;
    into.entries.push_back(std::move(e));
  }
}

inline CheckEntry field_agreement_entry(std::string id, std::string label,
                                        const VectorFieldEstimate& got,
                                        const VectorFieldEstimate& expected,
                                        const std::vector<Point>& grid, double tol) {
  CheckEntry e;
  e.id = std::move(id);
  e.label = std::move(label);
  e.tolerance = tol;
  for (const Point& p : grid) {
    const double d = tangent_norm(tangent_sub(got.eval(p), expected.eval(p)));
    if (d > e.residual) {
      e.residual = d;
      e.witness = "p=" + point_to_string(p);
    }
    ++e.cases_checked;
  }
  e.metrics.emplace_back("recognized_analytic", got.is_analytic() ? 1.0 : 0.0);
  e.pass = e.residual <= e.tolerance;
  return e;
}

inline CheckEntry order_check_entry(const FlowApprox& fa, const VectorFieldEstimate& expected,
                                    const std::vector<Point>& grid, int depth) {
  // one-level Richardson halves its step between depth and depth+1, so the
  // worst-case extraction error must shrink by about 2^2
  CheckEntry e;
  e.id = "order-check";
  e.label = "extraction error ratio between depths " + std::to_string(depth) + " and " +
            std::to_string(depth + 1);
  e.tolerance = 0.0;
  double err_lo = 0.0, err_hi = 0.0;
  for (const Point& p : grid) {
    err_lo = std::max(err_lo,
                      tangent_norm(tangent_sub(extract_field(fa, p, depth, 1), expected.eval(p))));
    err_hi = std::max(
        err_hi, tangent_norm(tangent_sub(extract_field(fa, p, depth + 1, 1), expected.eval(p))));
    ++e.cases_checked;
  }
  const double lo = 1.8 * 1.8, hi = 2.2 * 2.2;
  const double ratio = err_lo / err_hi;
  e.residual = ratio < lo ? lo - ratio : (ratio > hi ? ratio - hi : 0.0);
  e.metrics.emplace_back("ratio", ratio);
  e.metrics.emplace_back("error_at_depth", err_lo);
  e.metrics.emplace_back("error_at_next_depth", err_hi);
  e.pass = e.residual <= e.tolerance;
  if (!e.pass)
    e.witness = "ratio " + std::to_string(ratio) + " outside [" + std::to_string(lo) + "," +
                std::to_string(hi) + "]";
  return e;
}

inline CheckEntry eval_real_diagnostic_entry(const FlowApprox& fa, const Point& p, double t) {
  CheckEntry e;
  e.id = "eval-real-diagnostic";
  e.label = "dyadic refinement reports non-convergence";
  e.surrogate = true;
  e.tolerance = 0.0;
  e.cases_checked = 1;
  try {
    const EvalRealResult r = fa.eval_real(t, p, 1e-10);
    e.residual = 1.0;
    e.witness = "refinement unexpectedly converged (error estimate " +
                std::to_string(r.error_estimate) + ")";
  } catch (const ConvergenceError& err) {
    e.residual = 0.0;
    e.witness = err.what();
    for (const DyadicLevel& lvl : err.diagnostics)
      e.table.push_back({static_cast<double>(lvl.level), lvl.cauchy_diff});
  }
  e.pass = e.residual <= e.tolerance;
  return e;
}

}  // namespace detail

/// Builds the configured root system(s), runs the requested checks in
/// dependency order, optionally writes the JSON report and field CSV.
/// Construction failures produce a report naming the failing stage with
/// exit status 2; check failures keep exit status 1.
inline RunReport run_scenario(const ScenarioConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = cfg.name;
  report.grid_resolution = cfg.grid;
  report.seed = cfg.seed;

  if (cfg.depth < 1) throw ConfigError("scenario: depth must be >= 1");
  if (cfg.grid < 1) throw ConfigError("scenario: grid must be >= 1");
  for (double t : {cfg.tol, cfg.tol_condition5, cfg.tol_lemma, cfg.extract_tol,
                   cfg.round_trip_tol, cfg.intertwine_tol, cfg.conjugacy_tol, cfg.group_tol})
    if (!(t > 0.0)) throw ConfigError("scenario: tolerances must be positive");

  const ManifoldId m = cfg.manifold == ManifoldKind::Circle    ? ManifoldId::circle()
                       : cfg.manifold == ManifoldKind::Sphere3 ? ManifoldId::sphere3()
                                                               : ManifoldId::torus(3);
  const std::vector<Point> grid = sample_grid(m, cfg.grid, cfg.seed);

  std::string stage = "setup";
  try {
    const ScenarioChecks& on = cfg.checks;
    const bool needs_system = on.conditions || on.lemma || on.flow_axioms || on.extract ||
                              on.round_trip || on.symmetry || on.order_check ||
                              on.eval_real_diagnostic || on.solver_compare;

    VerifyOptions vo;
    vo.tol_root = vo.tol_commute = vo.tol_coherency = cfg.tol;
    vo.tol_lemma = cfg.tol_lemma;
    vo.tol_converge = cfg.tol_condition5;
    vo.include_lemma = on.lemma;

    std::vector<RootSystem> systems;  // [0] primary, [1] mirror when built
    std::vector<SqrtChainResult> chains;

    stage = "construction";
    if (needs_system) switch (cfg.source) {
        case SourceKind::Rotations:
          systems.push_back(build_rotation_system(cfg.angle, cfg.depth, 0.0));
          if (on.mirror_system || on.symmetry)
            systems.push_back(build_rotation_system(-cfg.angle, cfg.depth, 0.0));
          break;
        case SourceKind::BrokenRotations:
          systems.push_back(build_rotation_system(cfg.angle, cfg.depth, cfg.perturb));
          break;
        case SourceKind::QuatChain:
          systems.push_back(quat_sqrt_chain(detail::axis_quat(cfg.axis), cfg.depth));
          if (on.mirror_system || on.symmetry)
            systems.push_back(
                quat_sqrt_chain(detail::axis_quat(detail::mirror_axis(cfg.axis)), cfg.depth));
          break;
        case SourceKind::FromField:
          systems.push_back(roots_from_field(scenario_field(cfg), cfg.depth, cfg.integrator));
          break;
        case SourceKind::Reflection: systems.push_back(build_reflection_system()); break;
        case SourceKind::SolveChain: {
          SqrtChainSettings scs;
          scs.solver = cfg.solver;
          scs.grid_resolution = cfg.grid;
          scs.grid_seed = static_cast<int>(cfg.seed);
          chains.push_back(solve_sqrt_chain(Diffeo::circle_rotation(cfg.angle), cfg.depth, scs));
          if (!(cfg.field_cos.empty() && cfg.field_sin.empty() && cfg.field_c0 == 0.0))
            chains.push_back(solve_sqrt_chain(
                Diffeo::flow_time(scenario_field(cfg), 1.0, cfg.integrator), cfg.depth, scs));
          systems.push_back(chains.front().system);
          break;
        }
      }

    stage = "conditions";
    if (on.conditions && !systems.empty()) {
      if (cfg.source == SourceKind::SolveChain) {
        // the solver already verified its chains; reuse those entries
        report.checks.entries = chains.front().report.entries;
        if (chains.size() > 1)
          detail::append_prefixed(report.checks, chains.back().report, "field:");
      } else {
        detail::append_prefixed(report.checks, verify_all(systems.front(), grid, vo), "");
        if (on.mirror_system && systems.size() > 1)
          detail::append_prefixed(report.checks, verify_all(systems.back(), grid, vo), "mirror:");
      }
    }

    stage = "flow";
    std::deque<FlowApprox> flows;  // FlowApprox is pinned in place (internal cache mutex)
    for (const RootSystem& rs : systems) flows.emplace_back(rs);
    if (on.flow_axioms && !flows.empty()) {
      const std::vector<std::pair<double, double>> real_pairs =
          cfg.source == SourceKind::SolveChain || cfg.source == SourceKind::Reflection
              ? std::vector<std::pair<double, double>>{}
              : std::vector<std::pair<double, double>>{{1.0 / 3.0, 1.0 / 3.0}};
      report.checks.entries.push_back(
          verify_flow_axioms(flows.front(), make_default_time_pairs(), real_pairs, grid, cfg.tol));
    }
    if (on.eval_real_diagnostic && !flows.empty())
      report.checks.entries.push_back(
          detail::eval_real_diagnostic_entry(flows.front(), grid[grid.size() > 1 ? 1 : 0], 1.0 / 3.0));

    stage = "extraction";
    VectorFieldEstimate extracted = VectorFieldEstimate::zero(m);
    bool have_extracted = false;
    if (on.extract && !flows.empty()) {
      extracted = extract_field_grid(flows.front(), grid, cfg.extract_depth, cfg.richardson);
      have_extracted = true;
      report.checks.entries.push_back(detail::field_agreement_entry(
          "extract", "extracted field matches the generating field", extracted,
          scenario_field(cfg), grid, cfg.extract_tol));
    }
    if (on.order_check && !flows.empty())
      report.checks.entries.push_back(detail::order_check_entry(
          flows.front(), scenario_field(cfg), sample_grid(m, 32, cfg.seed), cfg.extract_depth));

    stage = "round-trip";
    if (on.round_trip && !systems.empty()) {
      RoundTripSettings rts;
      rts.extract_resolution = cfg.grid;
      rts.extract_depth = cfg.extract_depth;
      rts.richardson = cfg.richardson;
      rts.seed = static_cast<int>(cfg.seed);
      rts.tol = cfg.round_trip_tol;
      rts.integrator = cfg.integrator;
      report.checks.entries.push_back(
          round_trip_check(systems.front().target(), systems.front(), rts));
    }

    stage = "solver-compare";
    if (on.solver_compare && !chains.empty()) {
      {
        CheckEntry e;
        e.id = "solver-rotation";
        e.label = "solved square-root chain matches the exact rotation roots";
        e.tolerance = cfg.solver_rotation_tol;
        for (std::int64_t b : chains.front().system.index_set()) {
          const double d = sup_distance(chains.front().system.root(b),
                                        Diffeo::circle_rotation(cfg.angle / static_cast<double>(b)),
                                        grid);
          e.table.push_back({static_cast<double>(b), d});
          if (d > e.residual) {
            e.residual = d;
            e.witness = "b=" + std::to_string(b);
          }
          e.cases_checked += static_cast<std::int64_t>(grid.size());
        }
        e.pass = e.residual <= e.tolerance;
        report.checks.entries.push_back(std::move(e));
      }
      {
        CheckEntry e;
        e.id = "solver-residuals";
        e.label = "verified node residual of each solved level";
        e.tolerance = cfg.solver.tol;
        for (const SqrtChainResult& chain : chains)
          for (std::size_t i = 0; i < chain.level_residuals.size(); ++i) {
            e.table.push_back(
                {static_cast<double>(std::int64_t{1} << (i + 1)), chain.level_residuals[i]});
            e.residual = std::max(e.residual, chain.level_residuals[i]);
            ++e.cases_checked;
          }
        e.pass = e.residual <= e.tolerance;
        report.checks.entries.push_back(std::move(e));
      }
      if (chains.size() > 1) {
        CheckEntry e;
        e.id = "solver-field-compare";
        e.label = "solved chain on a flow map matches the flow-built roots per level";
        e.tolerance = cfg.compare_tol;
        const RootSystem flow_rs = roots_from_field(scenario_field(cfg), cfg.depth, cfg.integrator);
        for (std::int64_t b : chains.back().system.index_set()) {
          const double d = sup_distance(chains.back().system.root(b), flow_rs.root(b), grid);
          e.table.push_back({static_cast<double>(b), d});
          if (d > e.residual) {
            e.residual = d;
            e.witness = "b=" + std::to_string(b);
          }
          e.cases_checked += static_cast<std::int64_t>(grid.size());
        }
        e.pass = e.residual <= e.tolerance;
        report.checks.entries.push_back(std::move(e));
      }
    }

    stage = "symmetry";
    if (on.symmetry && cfg.manifold == ManifoldKind::Circle && flows.size() > 1) {
      const IntertwineCase ic{Isometry::circle_reflection(),
                              VectorFieldEstimate::constant_circle(cfg.angle),
                              VectorFieldEstimate::constant_circle(-cfg.angle), 1.0};
      report.checks.entries.push_back(check_intertwine(ic, grid, cfg.intertwine_tol));
      report.checks.entries.push_back(flow_conjugacy_check(
          Isometry::circle_reflection(), flows.front(), flows.back(), 1.0,
          {RationalTime(1, 4), RationalTime(1, 2), RationalTime(1, 1)}, grid, cfg.conjugacy_tol));
    }
    if (on.symmetry && cfg.manifold == ManifoldKind::Sphere3 && flows.size() > 1) {
      const Quat q1 = detail::axis_quat(cfg.axis);
      const Quat q2 = detail::axis_quat(detail::mirror_axis(cfg.axis));
      const Quat rotor = conjugating_rotor(q1, q2);
      const VectorFieldEstimate xi1 =
          VectorFieldEstimate::left_invariant_s3(std::numbers::pi * q1);
      const VectorFieldEstimate xi2 =
          VectorFieldEstimate::left_invariant_s3(std::numbers::pi * q2);
      CheckEntry inter =
          check_intertwine({Isometry::quat_conjugation(rotor), xi1, xi2, 1.0}, grid,
                           cfg.intertwine_tol);
      // the left-multiplication candidate is reported alongside, not asserted
      const CheckEntry alt = check_intertwine(
          {Isometry::quat_left_mult(q2 * quat_inverse(q1)), xi1, xi2, 1.0}, grid, 1e-12);
      inter.metrics.emplace_back("left_mult_candidate_residual", alt.residual);
      report.checks.entries.push_back(std::move(inter));
      report.checks.entries.push_back(flow_conjugacy_check(
          Isometry::quat_conjugation(rotor), flows.front(), flows.back(), 1.0,
          {RationalTime(1, 4), RationalTime(1, 2), RationalTime(1, 1)}, grid, cfg.conjugacy_tol));
      {
        CheckEntry e;
        e.id = "distinct-roots";
        e.label = "square roots seeded at different axes stay far apart";
        e.tolerance = 0.0;
        const double supd =
            sup_distance(systems.front().root(2), systems.back().root(2), grid);
        e.residual = std::max(0.0, 1.0 - supd);
        e.metrics.emplace_back("sup_distance", supd);
        e.cases_checked = static_cast<std::int64_t>(grid.size());
        e.pass = e.residual <= e.tolerance;
        if (!e.pass) e.witness = "sup distance " + std::to_string(supd) + " below 1";
        report.checks.entries.push_back(std::move(e));
      }
    }

    stage = "group-probe";
    if (on.group_probe) {
      std::vector<IntertwineCase> cands;
      if (cfg.manifold == ManifoldKind::Circle) {
        const VectorFieldEstimate base = VectorFieldEstimate::constant_circle(cfg.angle);
        cands.push_back({Isometry::identity(m), base, base, 1.0});
        cands.push_back(
            {Isometry::circle_reflection(), base, VectorFieldEstimate::constant_circle(-cfg.angle), 1.0});
      } else if (cfg.manifold == ManifoldKind::Sphere3) {
        const Quat q1 = detail::axis_quat(cfg.axis);
        const Quat q2 = detail::axis_quat(detail::mirror_axis(cfg.axis));
        const Quat r = conjugating_rotor(q1, q2);
        const VectorFieldEstimate base =
            VectorFieldEstimate::left_invariant_s3(std::numbers::pi * q1);
        auto pushed = [&](const Quat& g) {
          const Quat w = g * q1 * quat_inverse(g);
          return VectorFieldEstimate::left_invariant_s3(
              std::numbers::pi * Quat{0.0, w.x, w.y, w.z});
        };
        cands.push_back({Isometry::identity(m), base, base, 1.0});
        cands.push_back({Isometry::quat_conjugation(r), base, pushed(r), 1.0});
        cands.push_back({Isometry::quat_conjugation(quat_inverse(r)), base,
                         pushed(quat_inverse(r)), 1.0});
        cands.push_back({Isometry::quat_conjugation(r * r), base, pushed(r * r), 1.0});
      } else {
        throw ConfigError("group probe: no torus candidates configured");
      }
      report.checks.entries.push_back(
          group_probe_entry(probe_group(cands, grid, cfg.group_tol), cfg.group_tol));
    }

    stage = "output";
    report.overall_pass = report.checks.overall_pass() && !report.checks.entries.empty();
    report.exit_status = report.overall_pass ? 0 : 1;
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!cfg.out_dir.empty() || !cfg.json_path.empty()) {
      std::string json_path = cfg.json_path;
      if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        if (json_path.empty())
          json_path = (std::filesystem::path(cfg.out_dir) / (cfg.name + ".report.json")).string();
        if (have_extracted)
          export_field_csv(extracted, grid,
                           (std::filesystem::path(cfg.out_dir) / (cfg.name + ".field.csv")).string());
      }
      std::ofstream out(json_path);
      if (!out) throw Error("run_scenario: cannot open " + json_path);
      out << run_report_dump(report);
      if (!out.good()) throw Error("run_scenario: write to " + json_path + " failed");
    }
    return report;
  } catch (const Error& err) {
    report.note = "stage " + stage + " failed: " + err.what();
    report.overall_pass = false;
    report.exit_status = 2;
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  }
}

inline const std::vector<ScenarioConfig>& built_in_scenarios() {
  static const std::vector<ScenarioConfig> registry = [] {
    std::vector<ScenarioConfig> v;

    {
      ScenarioConfig c;
      c.name = "circle-antipodal";
      c.description =
          "antipodal map of the circle through rotation roots, with the mirrored "
          "system and the reflection symmetry";
      c.manifold = ManifoldKind::Circle;
      c.source = SourceKind::Rotations;
      c.angle = std::numbers::pi;
      c.depth = 20;
      c.grid = 256;
      c.seed = 1;
      c.tol = 1e-12;
      c.tol_condition5 = 1e-12;
      c.tol_lemma = 1e-11;
      c.extract_tol = 1e-12;
      c.round_trip_tol = 1e-10;
      c.intertwine_tol = 1e-12;
      c.conjugacy_tol = 1e-10;
      c.extract_depth = 4;
      c.richardson = 2;
      c.checks.symmetry = true;
      c.checks.mirror_system = true;
      v.push_back(std::move(c));
    }

    for (char axis : {'i', 'j'}) {
      ScenarioConfig c;
      c.name = std::string("s3-antipodal-") + axis;
      c.description = std::string("antipodal map of the 3-sphere through the square-root chain "
                                  "seeded at axis ") +
                      axis + ", with cross-axis symmetry checks";
      c.manifold = ManifoldKind::Sphere3;
      c.source = SourceKind::QuatChain;
      c.axis = axis;
      c.depth = 20;
      c.grid = 64;
      c.seed = axis == 'i' ? 2 : 3;
      c.tol = 1e-12;
      c.tol_condition5 = 1e-12;
      c.tol_lemma = 1e-11;
      c.extract_tol = 1e-6;
      c.round_trip_tol = 1e-6;
      c.intertwine_tol = 1e-12;
      c.conjugacy_tol = 1e-8;
      c.extract_depth = 12;
      c.richardson = 2;
      c.checks.symmetry = true;
      c.checks.mirror_system = true;
      v.push_back(std::move(c));
    }

    {
      ScenarioConfig c;
      c.name = "circle-perturbed-rotation";
      c.description =
          "time-1 map of the field pi + 0.3 sin(theta), roots built from dyadic "
          "flow times, extraction and reintegration end to end";
      c.manifold = ManifoldKind::Circle;
      c.source = SourceKind::FromField;
      c.field_c0 = std::numbers::pi;
      c.field_sin = {0.3};
      c.depth = 12;
      c.grid = 128;
      c.seed = 4;
      c.tol = 1e-8;
      c.tol_condition5 = 1e-8;
      c.tol_lemma = 1e-8;
      c.extract_tol = 1e-6;
      c.round_trip_tol = 1e-5;
      c.extract_depth = 10;
      c.richardson = 2;
      c.integrator.h = 1e-3;
      c.checks.order_check = true;
      v.push_back(std::move(c));
    }

    {
      ScenarioConfig c;
      c.name = "solved-sqrt-chain";
      c.description =
          "functional square-root solver chains on a rotation and on a flow map, "
          "compared against the exact and flow-built roots";
      c.manifold = ManifoldKind::Circle;
      c.source = SourceKind::SolveChain;
      c.angle = 1.0;
      c.depth = 3;
      c.grid = 256;
      c.seed = 5;
      c.field_c0 = std::numbers::pi;
      c.field_sin = {0.3};
      c.solver_rotation_tol = 1e-8;
      c.compare_tol = 1e-6;
      c.checks.extract = false;
      c.checks.round_trip = false;
      c.checks.solver_compare = true;
      v.push_back(std::move(c));
    }

    {
      ScenarioConfig c;
      c.name = "negative-reflection";
      c.description =
          "reflection target; the orientation surrogate rejects it (expected failure)";
      c.manifold = ManifoldKind::Circle;
      c.source = SourceKind::Reflection;
      c.depth = 3;
      c.grid = 64;
      c.seed = 6;
      c.checks.flow_axioms = false;
      c.checks.extract = false;
      c.checks.round_trip = false;
      v.push_back(std::move(c));
    }

    {
      ScenarioConfig c;
      c.name = "broken-coherency";
      c.description =
          "rotation roots with every even dyadic level offset by 0.05, breaking "
          "coherency and dyadic convergence (expected failure)";
      c.manifold = ManifoldKind::Circle;
      c.source = SourceKind::BrokenRotations;
      c.angle = std::numbers::pi;
      c.perturb = 0.05;
      c.depth = 8;
      c.grid = 64;
      c.seed = 7;
      c.checks.flow_axioms = false;
      c.checks.extract = false;
      c.checks.round_trip = false;
      c.checks.eval_real_diagnostic = true;
      v.push_back(std::move(c));
    }

    {
      ScenarioConfig c;
      c.name = "group-probe-circle";
      c.description =
          "closure probe for the circle symmetries {identity, reflection} over the "
          "constant field";
      c.manifold = ManifoldKind::Circle;
      c.source = SourceKind::Rotations;
      c.angle = std::numbers::pi;
      c.grid = 64;
      c.seed = 8;
      c.checks = ScenarioChecks{false, false, false, false, false, false, false, false,
                                true,  false, false};
      v.push_back(std::move(c));
    }

    {
      ScenarioConfig c;
      c.name = "group-probe-s3";
      c.description = "closure probe for rotor conjugations about one axis of the 3-sphere";
      c.manifold = ManifoldKind::Sphere3;
      c.source = SourceKind::QuatChain;
      c.axis = 'i';
      c.grid = 48;
      c.seed = 9;
      c.checks = ScenarioChecks{false, false, false, false, false, false, false, false,
                                true,  false, false};
      v.push_back(std::move(c));
    }

    return v;
  }();
  return registry;
}

inline std::vector<std::pair<std::string, std::string>> list_scenarios() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const ScenarioConfig& c : built_in_scenarios()) out.emplace_back(c.name, c.description);
  return out;
}

inline const ScenarioConfig* find_scenario(const std::string& name) {
  for (const ScenarioConfig& c : built_in_scenarios())
    if (c.name == name) return &c;
  return nullptr;
}

// --- config file parsing -------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

/// Numbers in config files: plain decimals plus the forms pi, a*pi, pi/b,
/// a*pi/b with decimal a, b.
inline double parse_number_expr(std::string s) {
  s = trim(s);
  if (s.empty()) throw ConfigError("empty numeric value");
  double sign = 1.0;
  if (s[0] == '-') {
    sign = -1.0;
    s = trim(s.substr(1));
  }
  const std::size_t pi_pos = s.find("pi");
  if (pi_pos != std::string::npos) {
    double a = 1.0, b = 1.0;
    const std::string before = trim(s.substr(0, pi_pos));
    const std::string after = trim(s.substr(pi_pos + 2));
    if (!before.empty()) {
      if (before.back() != '*') throw ConfigError("cannot parse '" + s + "'");
      a = parse_number_expr(before.substr(0, before.size() - 1));
    }
    if (!after.empty()) {
      if (after.front() != '/') throw ConfigError("cannot parse '" + s + "'");
      b = parse_number_expr(after.substr(1));
    }
    return sign * a * std::numbers::pi / b;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw ConfigError("cannot parse number '" + s + "'");
  return sign * v;
}

inline bool parse_flag(const std::string& v, const std::string& key) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("flag '" + key + "' must be on/off, got '" + v + "'");
}

}  // namespace detail

/// Flat INI-style scenario file: [scenario], [field], [checks], [output]
/// sections of key = value lines, # comments.  Unknown keys are errors.
inline ScenarioConfig parse_scenario_config(std::istream& in) {
  ScenarioConfig cfg;
  bool checks_touched = false;
  ScenarioChecks checks;  // replaces the defaults wholesale once [checks] appears
  checks.conditions = checks.lemma = checks.flow_axioms = checks.extract = checks.round_trip =
      false;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "scenario" && section != "field" && section != "checks" &&
          section != "output")
        throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (section == "scenario" || section.empty()) {
      if (key == "name") cfg.name = val;
      else if (key == "description") cfg.description = val;
      else if (key == "manifold") {
        if (val == "circle") cfg.manifold = ManifoldKind::Circle;
        else if (val == "sphere3") cfg.manifold = ManifoldKind::Sphere3;
        else if (val == "torus") cfg.manifold = ManifoldKind::Torus;
        else throw ConfigError("unknown manifold '" + val + "'");
      } else if (key == "source") {
        if (val == "rotations") cfg.source = SourceKind::Rotations;
        else if (val == "quat-chain") cfg.source = SourceKind::QuatChain;
        else if (val == "from-field") cfg.source = SourceKind::FromField;
        else if (val == "solve-chain") cfg.source = SourceKind::SolveChain;
        else if (val == "reflection") cfg.source = SourceKind::Reflection;
        else if (val == "broken-rotations") cfg.source = SourceKind::BrokenRotations;
        else throw ConfigError("unknown source '" + val + "'");
      } else if (key == "angle") cfg.angle = detail::parse_number_expr(val);
      else if (key == "axis") {
        if (val.size() != 1) throw ConfigError("axis must be one of i, j, k");
        cfg.axis = val[0];
      } else if (key == "depth") cfg.depth = static_cast<int>(detail::parse_number_expr(val));
      else if (key == "grid") cfg.grid = static_cast<int>(detail::parse_number_expr(val));
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(detail::parse_number_expr(val));
      else if (key == "perturb") cfg.perturb = detail::parse_number_expr(val);
      else if (key == "tol") cfg.tol = detail::parse_number_expr(val);
      else if (key == "tol_condition5") cfg.tol_condition5 = detail::parse_number_expr(val);
      else if (key == "tol_lemma") cfg.tol_lemma = detail::parse_number_expr(val);
      else if (key == "extract_tol") cfg.extract_tol = detail::parse_number_expr(val);
      else if (key == "round_trip_tol") cfg.round_trip_tol = detail::parse_number_expr(val);
      else if (key == "intertwine_tol") cfg.intertwine_tol = detail::parse_number_expr(val);
      else if (key == "conjugacy_tol") cfg.conjugacy_tol = detail::parse_number_expr(val);
      else if (key == "group_tol") cfg.group_tol = detail::parse_number_expr(val);
      else if (key == "solver_rotation_tol")
        cfg.solver_rotation_tol = detail::parse_number_expr(val);
      else if (key == "compare_tol") cfg.compare_tol = detail::parse_number_expr(val);
      else if (key == "extract_depth")
        cfg.extract_depth = static_cast<int>(detail::parse_number_expr(val));
      else if (key == "richardson")
        cfg.richardson = static_cast<int>(detail::parse_number_expr(val));
      else if (key == "h") cfg.integrator.h = detail::parse_number_expr(val);
      else if (key == "solver_nodes")
        cfg.solver.nodes = static_cast<int>(detail::parse_number_expr(val));
      else if (key == "solver_tol") cfg.solver.tol = detail::parse_number_expr(val);
      else throw ConfigError("unknown key '" + key + "' in [scenario]");
    } else if (section == "field") {
      if (key == "constant") cfg.field_c0 = detail::parse_number_expr(val);
      else if (key.rfind("sin", 0) == 0 || key.rfind("cos", 0) == 0) {
        const int harmonic = static_cast<int>(detail::parse_number_expr(key.substr(3)));
        if (harmonic < 1 || harmonic > 64)
          throw ConfigError("field harmonic out of range in '" + key + "'");
        auto& coefs = key[0] == 's' ? cfg.field_sin : cfg.field_cos;
        if (static_cast<int>(coefs.size()) < harmonic) coefs.resize(harmonic, 0.0);
        coefs[harmonic - 1] = detail::parse_number_expr(val);
      } else throw ConfigError("unknown key '" + key + "' in [field]");
    } else if (section == "checks") {
      checks_touched = true;
      const bool flag = detail::parse_flag(val, key);
      if (key == "conditions") checks.conditions = flag;
      else if (key == "lemma") checks.lemma = flag;
      else if (key == "flow-axioms") checks.flow_axioms = flag;
      else if (key == "extract") checks.extract = flag;
      else if (key == "round-trip") checks.round_trip = flag;
      else if (key == "symmetry") checks.symmetry = flag;
      else if (key == "mirror") checks.mirror_system = flag;
      else if (key == "order-check") checks.order_check = flag;
      else if (key == "group-probe") checks.group_probe = flag;
      else if (key == "solver-compare") checks.solver_compare = flag;
      else if (key == "eval-real-diagnostic") checks.eval_real_diagnostic = flag;
      else throw ConfigError("unknown check '" + key + "'");
    } else {  // output
      if (key == "dir") cfg.out_dir = val;
      else if (key == "json") cfg.json_path = val;
      else throw ConfigError("unknown key '" + key + "' in [output]");
    }
  }
  if (checks_touched) cfg.checks = checks;
  return cfg;
}

inline ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  ScenarioConfig cfg = parse_scenario_config(in);
  if (cfg.name == "custom") {
    // default the run name to the file stem
    cfg.name = std::filesystem::path(path).stem().string();
  }
  return cfg;
}

}  // namespace rootflow
