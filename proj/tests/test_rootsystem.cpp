#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>

#include "rootflow/root_system.hpp"

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

const CheckEntry& entry(const VerificationReport& r, const std::string& id) {
  const CheckEntry* e = r.find(id);
  REQUIRE(e != nullptr);
  return *e;
}

double metric(const CheckEntry& e, const std::string& name) {
  for (const auto& [k, v] : e.metrics)
    if (k == name) return v;
  FAIL("missing metric " + name);
  return 0.0;
}

}  // namespace

TEST_CASE("exact rotation family passes every condition") {
  const RootSystem rs = rotation_family(num::pi, 6);
  const auto grid = sample_grid(ManifoldId::circle(), 64);
  VerifyOptions opt;
  opt.tol_root = opt.tol_commute = opt.tol_coherency = opt.tol_lemma = 1e-12;
  opt.tol_converge = 1e-10;
  const VerificationReport rep = verify_all(rs, grid, opt);
  CHECK(rep.overall_pass());
  CHECK(rep.entries.size() == 6);
  CHECK(entry(rep, "condition-1").surrogate);
  CHECK(entry(rep, "condition-5").residual < 1e-12);
  CHECK(metric(entry(rep, "condition-5"), "fitted_K") == Approx(num::pi).margin(1e-9));
}

TEST_CASE("root property reports the raw per-index residual in its table") {
  // second root off by 0.01: composing it twice misses the target by 0.02
  std::map<std::int64_t, Diffeo> roots;
  roots.emplace(2, Diffeo::circle_rotation(num::pi / 2 + 0.01));
  roots.emplace(4, Diffeo::circle_rotation(num::pi / 4));
  const RootSystem rs(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic);
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  const CheckEntry e = verify_root_property(rs, grid, 1e-10);
  CHECK_FALSE(e.pass);
  REQUIRE(e.table.size() == 2);
  CHECK(e.table[0][0] == 2.0);
  CHECK(e.table[0][1] == Approx(0.02).margin(1e-12));
  // normalized residual is the worst raw residual divided by its index
  CHECK(e.residual == Approx(0.01).margin(1e-12));
}

TEST_CASE("commutativity rejects roots about different axes") {
  std::map<std::int64_t, Diffeo> roots;
  roots.emplace(2, Diffeo::quat_left_mult(Quat::i()));
  roots.emplace(4, Diffeo::quat_left_mult(quat_exp_imaginary(0.0, num::pi / 4, 0.0)));
  const RootSystem rs(Diffeo::quat_left_mult(-1.0 * Quat::identity()), std::move(roots),
                      Provenance::Analytic);
  const auto grid = sample_grid(ManifoldId::sphere3(), 24, 1);
  const CheckEntry e = verify_commutativity(rs, grid, 1e-10);
  CHECK_FALSE(e.pass);
  CHECK(e.residual > 0.1);
}

TEST_CASE("coherency lists unreachable reduced indices as untestable") {
  std::map<std::int64_t, Diffeo> roots;
  roots.emplace(2, Diffeo::circle_rotation(num::pi / 2));
  roots.emplace(8, Diffeo::circle_rotation(num::pi / 8));
  const RootSystem rs(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic);
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  const auto cases = make_default_coherency_cases(rs.index_set());
  const CheckEntry e = verify_coherency(rs, cases, grid, 1e-12);
  CHECK(e.pass);  // nothing testable failed
  CHECK_FALSE(e.untestable.empty());
}

TEST_CASE("gcd reduction inside coherency cases") {
  const RootSystem rs = rotation_family(num::pi, 5);
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  // (g_16)^4 must equal g_4: gcd(4,16)=4 reduces the pair to exponent one
  const CheckEntry e = verify_coherency(rs, {{4, 16}}, grid, 1e-13);
  CHECK(e.pass);
  CHECK(e.cases_checked > 0);
}

TEST_CASE("convergence check needs at least three indices") {
  std::map<std::int64_t, Diffeo> roots;
  roots.emplace(2, Diffeo::circle_rotation(num::pi / 2));
  roots.emplace(4, Diffeo::circle_rotation(num::pi / 4));
  const RootSystem rs(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic);
  const auto grid = sample_grid(ManifoldId::circle(), 16);
  CHECK_THROWS_AS(verify_convergence_to_identity(rs, grid, 1e-3), ConfigError);
}

TEST_CASE("a family that stalls away from the identity fails condition 5") {
  std::map<std::int64_t, Diffeo> roots;
  for (int c = 1; c <= 5; ++c)
    roots.emplace(std::int64_t{1} << c, Diffeo::circle_rotation(0.5));
  const RootSystem rs(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic);
  const auto grid = sample_grid(ManifoldId::circle(), 16);
  const CheckEntry e = verify_convergence_to_identity(rs, grid, 1e-3);
  CHECK_FALSE(e.pass);
  CHECK(e.residual >= 0.09);
  CHECK(e.witness.find("does not decrease") != std::string::npos);
}

TEST_CASE("composite-power identity on rotations and its failure on a broken family") {
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  SECTION("exact rotations satisfy all default cases") {
    const RootSystem rs = rotation_family(num::pi, 4);
    const CheckEntry e = verify_lemma_commute_power(rs, make_default_lemma_cases(), grid, 1e-12);
    CHECK(e.pass);
    CHECK(e.cases_checked >= 3);
  }
  SECTION("an incoherent family violates the exponent rule") {
    std::map<std::int64_t, Diffeo> roots;
    roots.emplace(2, Diffeo::circle_rotation(num::pi / 2));
    roots.emplace(4, Diffeo::circle_rotation(num::pi / 4 + 0.05));
    roots.emplace(8, Diffeo::circle_rotation(num::pi / 8));
    const RootSystem rs(Diffeo::circle_rotation(num::pi), std::move(roots),
                        Provenance::Analytic);
    const CheckEntry e =
        verify_lemma_commute_power(rs, {{1, 2, 1, 4}}, grid, 1e-10);
    CHECK_FALSE(e.pass);
    CHECK(e.residual > 0.01);
  }
}

TEST_CASE("quaternion square-root chain halves angles and squares back") {
  const RootSystem rs = quat_sqrt_chain(Quat::i(), 8);
  CHECK(rs.index_set().size() == 8);
  CHECK(rs.index_set().front() == 2);
  CHECK(rs.index_set().back() == 256);

  const auto* target = rs.target().get_if<body::QuatLeftMult>();
  REQUIRE(target != nullptr);
  CHECK(quat_norm(target->q - (-1.0 * Quat::identity())) < 1e-15);

  Quat prev{0.0, 1.0, 0.0, 0.0};
  for (int c = 1; c <= 8; ++c) {
    const auto* lm = rs.root(std::int64_t{1} << c).get_if<body::QuatLeftMult>();
    REQUIRE(lm != nullptr);
    CHECK(quat_angle_to_identity(lm->q) ==
          Approx(num::pi / std::ldexp(1.0, c)).margin(1e-13));
    if (c > 1) CHECK(quat_norm(lm->q * lm->q - prev) < 1e-14);
    prev = lm->q;
  }

  CHECK_THROWS_AS(quat_sqrt_chain(Quat::identity(), 4), ConfigError);
  CHECK_THROWS_AS(quat_sqrt_chain(2.0 * Quat::i(), 4), ConfigError);
}

TEST_CASE("roots built from a field are dyadic flow maps of it") {
  const auto xi = VectorFieldEstimate::constant_circle(num::pi);
  const RootSystem rs = roots_from_field(xi, 3);
  const auto grid = sample_grid(ManifoldId::circle(), 32);
  CHECK(sup_distance(rs.root(8), Diffeo::circle_rotation(num::pi / 8), grid) < 1e-13);
  VerifyOptions opt;
  opt.tol_converge = 1e-10;
  CHECK(verify_all(rs, grid, opt).overall_pass());
}

TEST_CASE("system construction validates its inputs") {
  CHECK_THROWS_AS(RootSystem(Diffeo::circle_rotation(num::pi), {}, Provenance::Analytic),
                  ConfigError);
  {
    std::map<std::int64_t, Diffeo> roots;
    roots.emplace(-2, Diffeo::circle_rotation(1.0));
    CHECK_THROWS_AS(
        RootSystem(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic),
        ConfigError);
  }
  {
    std::map<std::int64_t, Diffeo> roots;
    roots.emplace(2, Diffeo::quat_left_mult(Quat::i()));
    CHECK_THROWS_AS(
        RootSystem(Diffeo::circle_rotation(num::pi), std::move(roots), Provenance::Analytic),
        ConfigError);
  }
  const RootSystem rs = rotation_family(num::pi, 3);
  CHECK(rs.has_root(4));
  CHECK_FALSE(rs.has_root(16));
  CHECK_THROWS_AS(rs.root(16), Error);
  CHECK(rs.provenance() == Provenance::Analytic);
}
