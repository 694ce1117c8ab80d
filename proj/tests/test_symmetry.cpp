#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "rootflow/symmetry.hpp"

using namespace rootflow;
using Catch::Approx;
namespace num = std::numbers;

namespace {

RootSystem rotation_family(double angle, int depth) {
  std::map<std::int64_t, Diffeo> roots;
  for (int c = 1; c <= depth; ++c) {
    const std::int64_t b = std::int64_t{1} << c;
    roots.emplace(b, Diffeo::circle_rotation(angle / static_cast<double>(b)));
  }
  return RootSystem(Diffeo::circle_rotation(angle), std::move(roots), Provenance::Analytic);
}

}  // namespace

TEST_CASE("conjugating rotor between axes") {
  SECTION("i to j is the half turn about the diagonal") {
    const Quat r = conjugating_rotor(Quat::i(), Quat::j());
    const double c = std::sqrt(0.5);
    CHECK(quat_norm(r - Quat{c, 0.0, 0.0, c}) < 1e-15);
    CHECK(quat_norm(r * Quat::i() * quat_inverse(r) - Quat::j()) < 1e-15);
  }
  SECTION("an axis maps to itself through the identity rotor") {
    const Quat r = conjugating_rotor(Quat::i(), Quat::i());
    CHECK(quat_norm(r - Quat::identity()) < 1e-15);
  }
  SECTION("antipodal axes are refused with guidance") {
    try {
      conjugating_rotor(Quat::i(), -1.0 * Quat::i());
      FAIL("expected Error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("intermediate axis") != std::string::npos);
    }
  }
  SECTION("non-imaginary or non-unit inputs are rejected") {
    CHECK_THROWS_AS(conjugating_rotor(Quat::identity(), Quat::j()), Error);
    CHECK_THROWS_AS(conjugating_rotor(2.0 * Quat::i(), Quat::j()), Error);
  }
}

TEST_CASE("reflection intertwines the two constant circle fields") {
  const auto grid = sample_grid(ManifoldId::circle(), 64);
  const IntertwineCase c{Isometry::circle_reflection(),
                         VectorFieldEstimate::constant_circle(num::pi),
                         VectorFieldEstimate::constant_circle(-num::pi), 1.0};
  const CheckEntry e = check_intertwine(c, grid, 1e-12);
  CHECK(e.pass);
  CHECK(e.residual == 0.0);
  CHECK(e.label.find("reflection") != std::string::npos);
}

TEST_CASE("intertwining rejects mixed manifolds") {
  const auto grid = sample_grid(ManifoldId::circle(), 8);
  const IntertwineCase c{Isometry::circle_reflection(),
                         VectorFieldEstimate::constant_circle(1.0),
                         VectorFieldEstimate::left_invariant_s3(Quat::i()), 1.0};
  CHECK_THROWS_AS(check_intertwine(c, grid, 1e-12), ConfigError);
}

TEST_CASE("rotor conjugation intertwines the two left-invariant fields") {
  const auto grid = sample_grid(ManifoldId::sphere3(), 32, 4);
  const Quat r = conjugating_rotor(Quat::i(), Quat::j());
  const IntertwineCase good{Isometry::quat_conjugation(r),
                            VectorFieldEstimate::left_invariant_s3(num::pi * Quat::i()),
                            VectorFieldEstimate::left_invariant_s3(num::pi * Quat::j()), 1.0};
  CHECK(check_intertwine(good, grid, 1e-12).pass);

  // left multiplication moves the identity correctly but twists tangents the
  // wrong way; its residual is pinned so regressions are visible
  const IntertwineCase bad{Isometry::quat_left_mult(Quat::j() * quat_inverse(Quat::i())),
                           VectorFieldEstimate::left_invariant_s3(num::pi * Quat::i()),
                           VectorFieldEstimate::left_invariant_s3(num::pi * Quat::j()), 1.0};
  const CheckEntry e = check_intertwine(bad, grid, 1e-12);
  CHECK_FALSE(e.pass);
  CHECK(e.residual == Approx(num::pi * std::sqrt(2.0)).margin(1e-9));
}

TEST_CASE("group probe closes on the circle pair and is order-independent") {
  const auto grid = sample_grid(ManifoldId::circle(), 64);
  const auto base = VectorFieldEstimate::constant_circle(num::pi);
  const auto mirrored = VectorFieldEstimate::constant_circle(-num::pi);
  const IntertwineCase ident{Isometry::identity(ManifoldId::circle()), base, base, 1.0};
  const IntertwineCase refl{Isometry::circle_reflection(), base, mirrored, 1.0};

  const GroupProbeResult fwd = probe_group({ident, refl}, grid, 1e-12);
  CHECK(fwd.closed);
  CHECK(fwd.max_residual <= 1e-12);
  REQUIRE(fwd.matched.size() == 4);
  CHECK(fwd.matched[0 * 2 + 0] == 0);  // id o id = id
  CHECK(fwd.matched[0 * 2 + 1] == 1);  // id o refl = refl
  CHECK(fwd.matched[1 * 2 + 1] == 0);  // refl o refl = id

  const GroupProbeResult rev = probe_group({refl, ident}, grid, 1e-12);
  CHECK(rev.closed);
  CHECK(rev.max_residual ==  fwd.max_residual);

  const CheckEntry e = group_probe_entry(fwd, 1e-12);
  CHECK(e.pass);
  CHECK(e.table.size() == 4);
}

TEST_CASE("group probe closes on rotor conjugations of the 3-sphere") {
  const auto grid = sample_grid(ManifoldId::sphere3(), 24, 9);
  const Quat r = conjugating_rotor(Quat::i(), Quat::j());
  const auto base = VectorFieldEstimate::left_invariant_s3(num::pi * Quat::i());
  auto pushed = [&](const Quat& g) {
    const Quat w = g * Quat::i() * quat_inverse(g);
    return VectorFieldEstimate::left_invariant_s3(num::pi * Quat{0.0, w.x, w.y, w.z});
  };
  const std::vector<IntertwineCase> cands{
      {Isometry::identity(ManifoldId::sphere3()), base, base, 1.0},
      {Isometry::quat_conjugation(r), base, pushed(r), 1.0},
      {Isometry::quat_conjugation(quat_inverse(r)), base, pushed(quat_inverse(r)), 1.0},
      {Isometry::quat_conjugation(r * r), base, pushed(r * r), 1.0},
  };
  const GroupProbeResult res = probe_group(cands, grid, 1e-12);
  CHECK(res.closed);
  CHECK(res.max_residual <= 1e-12);
}

TEST_CASE("group probe enforces its preconditions") {
  const auto grid = sample_grid(ManifoldId::circle(), 16);
  CHECK_THROWS_AS(probe_group({}, grid, 1e-12), ConfigError);

  const auto base = VectorFieldEstimate::constant_circle(num::pi);
  const IntertwineCase scaled{Isometry::identity(ManifoldId::circle()), base, base, 2.0};
  CHECK_THROWS_AS(probe_group({scaled}, grid, 1e-12), ConfigError);

  // reflection against the unmirrored field violates the intertwining relation
  const IntertwineCase wrong{Isometry::circle_reflection(), base, base, 1.0};
  CHECK_THROWS_AS(probe_group({wrong}, grid, 1e-12), ConfigError);
}

TEST_CASE("flow conjugacy through the reflection") {
  const FlowApprox fwd(rotation_family(num::pi, 6));
  const FlowApprox bwd(rotation_family(-num::pi, 6));
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  const CheckEntry e =
      flow_conjugacy_check(Isometry::circle_reflection(), fwd, bwd, 1.0,
                           {RationalTime(1, 4), RationalTime(1, 2), RationalTime(1, 1)}, grid,
                           1e-12);
  CHECK(e.pass);
  CHECK(e.residual <= 1e-12);
}

TEST_CASE("flow conjugacy with an integer time scaling") {
  // the identity carries the double-speed flow at time t onto the base flow
  // at time 2t
  const FlowApprox fast(rotation_family(kTau, 6));
  const FlowApprox base(rotation_family(num::pi, 6));
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  const CheckEntry e =
      flow_conjugacy_check(Isometry::identity(ManifoldId::circle()), base, fast, 2.0,
                           {RationalTime(1, 4), RationalTime(1, 2)}, grid, 1e-12);
  CHECK(e.pass);
}

TEST_CASE("scaling search finds integer and fractional factors") {
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  const auto xi = VectorFieldEstimate::constant_circle(num::pi);
  const ScalingSearchResult three =
      search_scaling(Isometry::identity(ManifoldId::circle()), xi,
                     VectorFieldEstimate::constant_circle(3.0 * num::pi), grid, 1e-10);
  CHECK(three.integer);
  CHECK(three.k == Approx(3.0).margin(1e-12));

  const ScalingSearchResult frac =
      search_scaling(Isometry::identity(ManifoldId::circle()), xi,
                     VectorFieldEstimate::constant_circle(2.5 * num::pi), grid, 1e-10);
  CHECK_FALSE(frac.integer);
  CHECK(frac.k == Approx(2.5).margin(1e-6));
}
