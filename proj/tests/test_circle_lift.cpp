#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "rootflow/circle_lift.hpp"

using namespace rootflow;
using Catch::Approx;

TEST_CASE("lift of a rotation evaluates to x + alpha/tau") {
  const double alpha = 1.1;
  const auto lift = CircleLift::from_map(64, [&](double th) { return th + alpha; });
  for (double x : {0.0, 0.125, 0.37, 0.99}) {
    CHECK(lift.eval(x) == Approx(x + alpha / kTau).margin(1e-12));
    CHECK(lift.derivative(x) == Approx(1.0).margin(1e-9));
  }
  // periodicity of the displacement: F(x+1) = F(x) + 1
  CHECK(lift.eval(1.25) == Approx(lift.eval(0.25) + 1.0).margin(1e-12));
}

TEST_CASE("lift of a smooth degree-one perturbation") {
  // theta + 0.2 sin(theta) is an orientation-preserving circle map
  const auto map = [](double th) { return th + 0.2 * std::sin(th); };
  const auto lift = CircleLift::from_map(256, map);
  for (double x : {0.05, 0.31, 0.5, 0.77}) {
    const double th = kTau * x;
    CHECK(kTau * lift.eval(x) == Approx(map(th)).margin(1e-8));
  }
  // inverse really inverts
  for (double x : {0.1, 0.42, 0.9}) {
    const double y = lift.eval(x);
    CHECK(lift.inverse(y) == Approx(x).margin(1e-10));
  }
}

TEST_CASE("non-monotone and orientation-reversing maps are rejected") {
  CHECK_THROWS_AS(CircleLift::from_map(64, [](double th) { return -th; }), Error);
  CHECK_THROWS_AS(CircleLift::from_map(64, [](double th) { return th + 2.0 * std::sin(th); }),
                  Error);
  CHECK_THROWS_AS(CircleLift::from_map(4, [](double th) { return th; }), ConfigError);
}

TEST_CASE("from_values validates monotonicity and sample count") {
  CHECK_THROWS_AS(CircleLift::from_values({0.0, 0.2, 0.1, 0.3, 0.4, 0.5, 0.6, 0.7}), Error);
  CHECK_THROWS_AS(CircleLift::from_values({0.0, 0.25, 0.5, 0.75}), ConfigError);
}
