#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "rootflow/sqrt_solver.hpp"

using namespace rootflow;
using Catch::Approx;
namespace num = std::numbers;

TEST_CASE("functional square root of a rotation is the half rotation") {
  const SqrtSolveResult res = solve_functional_sqrt(Diffeo::circle_rotation(1.0));
  const auto grid = shifted_circle_grid(257);
  CHECK(sup_distance(res.root, Diffeo::circle_rotation(0.5), grid) < 1e-8);
  CHECK(res.residual <= 1e-8);
}

TEST_CASE("functional square root of the identity stays at the identity") {
  const SqrtSolveResult res = solve_functional_sqrt(Diffeo::circle_rotation(0.0));
  const auto grid = shifted_circle_grid(101);
  CHECK(sup_distance(res.root, Diffeo::identity(ManifoldId::circle()), grid) < 1e-8);
}

TEST_CASE("square root of a flow map matches the half-time flow") {
  const auto xi = VectorFieldEstimate::circle_fourier(num::pi, {}, {0.3});
  const Diffeo f = Diffeo::flow_time(xi, 1.0);
  const SqrtSolveResult res = solve_functional_sqrt(f);
  const auto grid = shifted_circle_grid(101);
  CHECK(sup_distance(res.root, Diffeo::flow_time(xi, 0.5), grid) < 1e-6);
}

TEST_CASE("orientation-reversing targets are rejected up front") {
  try {
    solve_functional_sqrt(Diffeo::circle_reflection());
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("orientation") != std::string::npos);
  }
}

TEST_CASE("iteration budget exhaustion raises instead of returning junk") {
  const auto xi = VectorFieldEstimate::circle_fourier(num::pi, {}, {0.3});
  SqrtSolverSettings s;
  s.max_iters = 1;
  s.tol = 1e-12;
  CHECK_THROWS_AS(solve_functional_sqrt(Diffeo::flow_time(xi, 1.0), s), SolverError);
}

TEST_CASE("non-circle targets are a configuration error") {
  CHECK_THROWS_AS(solve_functional_sqrt(Diffeo::quat_left_mult(Quat::i())), ConfigError);
}

TEST_CASE("iterated halving chain on a rotation") {
  const SqrtChainResult chain = solve_sqrt_chain(Diffeo::circle_rotation(1.0), 3);
  CHECK(chain.system.index_set() == std::vector<std::int64_t>{2, 4, 8});
  CHECK(chain.report.overall_pass());
  REQUIRE(chain.level_residuals.size() == 3);
  for (double r : chain.level_residuals) CHECK(r <= 1e-8);

  const auto grid = shifted_circle_grid(101);
  for (int c = 1; c <= 3; ++c) {
    const double b = std::ldexp(1.0, c);
    CHECK(sup_distance(chain.system.root(static_cast<std::int64_t>(b)),
                       Diffeo::circle_rotation(1.0 / b), grid) < 1e-7);
  }
  CHECK(chain.system.provenance() == Provenance::SolvedSqrtChain);
}

TEST_CASE("chain failure reports the failing level") {
  SqrtChainSettings s;
  s.solver.max_iters = 1;
  s.solver.tol = 1e-13;
  const auto xi = VectorFieldEstimate::circle_fourier(num::pi, {}, {0.3});
  try {
    solve_sqrt_chain(Diffeo::flow_time(xi, 1.0), 2, s);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("level") != std::string::npos);
  }
}
