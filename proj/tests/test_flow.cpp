#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "rootflow/flow.hpp"

using namespace rootflow;
using Catch::Approx;
namespace num = std::numbers;

namespace {

RootSystem rotation_family(double angle, int depth, double perturb_even = 0.0) {
  std::map<std::int64_t, Diffeo> roots;
  for (int c = 1; c <= depth; ++c) {
    const std::int64_t b = std::int64_t{1} << c;
    double a = angle / static_cast<double>(b);
    if (perturb_even != 0.0 && c % 2 == 0) a += perturb_even;
    roots.emplace(b, Diffeo::circle_rotation(a));
  }
  return RootSystem(Diffeo::circle_rotation(angle), std::move(roots), Provenance::Analytic);
}

}  // namespace

TEST_CASE("rational times reduce and add exactly") {
  const RationalTime t(2, 4);
  CHECK(t.num == 1);
  CHECK(t.den == 2);
  const RationalTime n(1, -2);
  CHECK(n.num == -1);
  CHECK(n.den == 2);
  const RationalTime z(0, 7);
  CHECK(z.num == 0);
  CHECK(z.den == 1);
  CHECK_THROWS_AS(RationalTime(1, 0), ConfigError);

  const RationalTime s = rational_add({1, 4}, {1, 2});
  CHECK(s.num == 3);
  CHECK(s.den == 4);
  CHECK(rational_add({1, 4}, {-1, 4}).num == 0);
}

TEST_CASE("rational evaluation uses the coherent dyadic powers") {
  const FlowApprox fa(rotation_family(num::pi, 4));
  CHECK(fa.max_level() == 4);
  const Point p = Point::circle(0.3);
  CHECK(distance(fa.eval_rational({1, 4}, p), Point::circle(0.3 + num::pi / 4)) < 1e-15);
  CHECK(distance(fa.eval_rational({3, 8}, p), Point::circle(0.3 + 3 * num::pi / 8)) < 1e-15);
  CHECK(distance(fa.eval_rational({-1, 4}, p), Point::circle(0.3 - num::pi / 4)) < 1e-15);
  CHECK(distance(fa.eval_rational({0, 1}, p), p) == 0.0);
  CHECK(distance(fa.eval_rational({1, 1}, p), Point::circle(0.3 + num::pi)) < 1e-15);
}

TEST_CASE("unreachable denominators point the caller at the real evaluator") {
  const FlowApprox fa(rotation_family(num::pi, 2));
  try {
    fa.eval_rational({1, 8}, Point::circle(0.0));
    FAIL("expected UnreachableTimeError");
  } catch (const UnreachableTimeError& e) {
    CHECK(std::string(e.what()).find("eval_real") != std::string::npos);
  }
}

TEST_CASE("mixed index sets cap the dyadic level") {
  std::map<std::int64_t, Diffeo> roots;
  roots.emplace(2, Diffeo::circle_rotation(num::pi / 2));
  roots.emplace(4, Diffeo::circle_rotation(num::pi / 4));
  roots.emplace(6, Diffeo::circle_rotation(num::pi / 6));
  const FlowApprox fa(
      RootSystem(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic));
  CHECK(fa.max_level() == 2);
}

TEST_CASE("real-time evaluation converges on a deep coherent family") {
  const FlowApprox fa(rotation_family(num::pi, 40));
  const Point p = Point::circle(1.0);
  const EvalRealResult r = fa.eval_real(1.0 / 3.0, p, 1e-10);
  CHECK(r.error_estimate <= 1e-10);
  CHECK(distance(r.point, Point::circle(1.0 + num::pi / 3)) < 1e-9);
  CHECK(r.levels.size() > 10);

  // exactly dyadic times short-circuit with a zero estimate
  const EvalRealResult d = fa.eval_real(0.25, p, 1e-10);
  CHECK(d.error_estimate == 0.0);
  CHECK(distance(d.point, fa.eval_rational({1, 4}, p)) == 0.0);
}

TEST_CASE("incoherent families abort real-time evaluation with diagnostics") {
  const FlowApprox fa(rotation_family(num::pi, 8, 0.05));
  try {
    fa.eval_real(1.0 / 3.0, Point::circle(0.5), 1e-10);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.diagnostics.size() >= 3);
    CHECK(std::string(e.what()).find("not Cauchy") != std::string::npos);
  }
}

TEST_CASE("flow axioms hold for a coherent rotation family") {
  const FlowApprox fa(rotation_family(num::pi, 6));
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  const CheckEntry e = verify_flow_axioms(fa, make_default_time_pairs(),
                                          {{1.0 / 3.0, 1.0 / 3.0}}, grid, 1e-12);
  CHECK(e.pass);
  CHECK(e.residual <= 1e-12);
}

TEST_CASE("field extraction recovers the rotation speed exactly") {
  const FlowApprox fa(rotation_family(num::pi, 6));
  const Point p = Point::circle(2.2);
  const Tangent v = extract_field(fa, p, 3, 2);
  CHECK(v.vec[0] == Approx(num::pi).margin(1e-12));
}

TEST_CASE("extraction depth is validated against the deepest level") {
  const FlowApprox fa(rotation_family(num::pi, 4));
  CHECK_THROWS_AS(extract_field(fa, Point::circle(0.0), 3, 2), ConfigError);
  CHECK_THROWS_AS(extract_field(fa, Point::circle(0.0), -1, 0), ConfigError);
}

TEST_CASE("extraction retries one level deeper past the cut locus") {
  // roots of the identity through full turns: the level-1 quotient lands on
  // the antipode and must be skipped, not failed
  std::map<std::int64_t, Diffeo> roots;
  roots.emplace(2, Diffeo::circle_rotation(num::pi));
  roots.emplace(4, Diffeo::circle_rotation(num::pi / 2));
  const FlowApprox fa(
      RootSystem(Diffeo::circle_rotation(kTau), std::move(roots), Provenance::Analytic));
  const Tangent v = extract_field(fa, Point::circle(0.7), 1, 0);
  CHECK(v.vec[0] == Approx(kTau).margin(1e-12));
}

TEST_CASE("grid extraction recognizes closed forms") {
  SECTION("constant circle field") {
    const FlowApprox fa(rotation_family(num::pi, 6));
    const auto grid = sample_grid(ManifoldId::circle(), 16);
    const VectorFieldEstimate xi = extract_field_grid(fa, grid, 3, 2);
    CHECK(xi.is_analytic());
    CHECK(xi.eval(Point::circle(0.9)).scalar() == Approx(num::pi).margin(1e-12));
  }
  SECTION("left-invariant field from the square-root chain") {
    const FlowApprox fa(quat_sqrt_chain(Quat::i(), 12));
    const auto grid = sample_grid(ManifoldId::sphere3(), 12, 3);
    const VectorFieldEstimate xi = extract_field_grid(fa, grid, 8, 2);
    CHECK(xi.is_analytic());
    CHECK(quat_norm(xi.omega() - num::pi * Quat::i()) < 1e-6);
  }
  SECTION("constant torus field") {
    std::map<std::int64_t, Diffeo> roots;
    const std::vector<double> v{0.3, -0.1};
    for (int c = 1; c <= 4; ++c) {
      const double b = std::ldexp(1.0, c);
      roots.emplace(static_cast<std::int64_t>(b),
                    Diffeo::torus_translation({v[0] / b, v[1] / b}));
    }
    const FlowApprox fa(
        RootSystem(Diffeo::torus_translation(v), std::move(roots), Provenance::Analytic));
    const auto grid = sample_grid(ManifoldId::torus(2), 5);
    const VectorFieldEstimate xi = extract_field_grid(fa, grid, 2, 1);
    CHECK(xi.is_analytic());
    CHECK(xi.torus_velocity()[0] == Approx(0.3).margin(1e-12));
    CHECK(xi.torus_velocity()[1] == Approx(-0.1).margin(1e-12));
  }
}

TEST_CASE("round trip from roots to field and back to the time-one map") {
  const RootSystem rs = rotation_family(num::pi, 6);
  RoundTripSettings s;
  s.extract_resolution = 32;
  s.extract_depth = 3;
  s.richardson = 1;
  s.verify_resolution = 31;
  s.tol = 1e-9;
  const CheckEntry e = round_trip_check(rs.target(), rs, s);
  CHECK(e.pass);
  CHECK(e.residual < 1e-10);
  bool recognized = false;
  for (const auto& [k, val] : e.metrics)
    if (k == "recognized_analytic") recognized = val == 1.0;
  CHECK(recognized);
}
