#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rootflow/diffeo.hpp"
#include "rootflow/flow.hpp"
#include "rootflow/vector_field.hpp"

namespace rootflow {

/// One instance of the intertwining relation k * DP(xi1) = xi2 after P.
struct IntertwineCase {
  Isometry P;
  VectorFieldEstimate xi1;
  VectorFieldEstimate xi2;
  double k = 1.0;
};

inline CheckEntry check_intertwine(const IntertwineCase& c, const std::vector<Point>& grid,
                                   double tol) {
  if (c.xi1.manifold().kind != c.xi2.manifold().kind ||
      c.P.diffeo().manifold().kind != c.xi1.manifold().kind)
    throw ConfigError("check_intertwine: case mixes manifolds");
  CheckEntry e;
  e.id = "intertwine";
  e.label = "k*DP(xi1) = xi2 after P  (P: " + c.P.label() + ")";
  e.tolerance = tol;
  for (const Point& p : grid) {
    const Tangent pushed = differential(c.P, c.xi1.eval(p));
    const Tangent want = c.xi2.eval(pushed.base);
    const double d = tangent_norm(tangent_sub(tangent_scale(pushed, c.k), want));
    if (d > e.residual) {
      e.residual = d;
      e.witness = "p=" + detail::point_to_string(p);
    }
    ++e.cases_checked;
  }
  e.metrics.emplace_back("k", c.k);
  e.pass = e.residual <= e.tolerance;
  return e;
}

/// Unit quaternion r with r q1 r^-1 = q2 for imaginary unit axes q1, q2:
/// half rotation in their common plane, r = normalize(1 + q2 * (-q1)).
/// Degenerates exactly when q2 = -q1; the defining identity is re-verified
/// before the rotor is returned.
inline Quat conjugating_rotor(const Quat& q1, const Quat& q2) {
  if (!quat_is_pure_imaginary(q1) || !quat_is_unit(q1) || !quat_is_pure_imaginary(q2) ||
      !quat_is_unit(q2))
    throw Error("conjugating_rotor: inputs must be imaginary unit quaternions");
  const Quat s = Quat{1, 0, 0, 0} + q2 * (-1.0 * q1);
  if (quat_norm(s) < 1e-9)
    throw Error(
        "conjugating_rotor: axes are antipodal; no unique rotor exists, conjugate through an "
        "intermediate axis instead");
  const Quat r = quat_normalized(s);
  const Quat check = r * q1 * quat_inverse(r) - q2;
  if (quat_norm(check) > 1e-12)
    throw Error("conjugating_rotor: post-verification failed, residual " +
                std::to_string(quat_norm(check)));
  return r;
}

struct GroupProbeResult {
  std::vector<Isometry> elements;
  std::vector<double> closure_table;  // row-major |elements|^2: residual of P_a o P_b
  std::vector<int> matched;           // index of the nearest element for each pair
  double max_residual = 0.0;
  bool closed = false;
};

/// Group-closure probe: every pairwise composition of candidate symmetries
/// must land back on a candidate (up to sup distance on the grid).  The
/// candidates must individually satisfy the intertwining relation against the
/// shared base field at the same tolerance; that precondition is enforced.
inline GroupProbeResult probe_group(const std::vector<IntertwineCase>& candidates,
                                    const std::vector<Point>& grid, double tol) {
  if (candidates.empty()) throw ConfigError("probe_group: no candidates");
  for (const IntertwineCase& c : candidates) {
    if (std::abs(c.k - 1.0) > 1e-12) throw ConfigError("probe_group: candidates must have k=1");
    const CheckEntry e = check_intertwine(c, grid, tol);
    if (!e.pass)
      throw ConfigError("probe_group: candidate '" + c.P.label() +
                        "' fails its own intertwining check (residual " +
                        std::to_string(e.residual) + ")");
  }
  GroupProbeResult out;
  for (const IntertwineCase& c : candidates) out.elements.push_back(c.P);
  const std::size_t n = out.elements.size();
  out.closure_table.assign(n * n, 0.0);
  out.matched.assign(n * n, -1);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const Diffeo comp = compose(out.elements[a].diffeo(), out.elements[b].diffeo());
      double best = std::numeric_limits<double>::infinity();
      int best_idx = -1;
      for (std::size_t c = 0; c < n; ++c) {
        const double d = sup_distance(comp, out.elements[c].diffeo(), grid);
        if (d < best) {
          best = d;
          best_idx = static_cast<int>(c);
        }
      }
      out.closure_table[a * n + b] = best;
      out.matched[a * n + b] = best_idx;
      out.max_residual = std::max(out.max_residual, best);
    }
  out.closed = out.max_residual <= tol;
  return out;
}

inline CheckEntry group_probe_entry(const GroupProbeResult& r, double tol) {
  CheckEntry e;
  e.id = "group-probe";
  e.label = "closure of symmetry candidates under composition";
  e.tolerance = tol;
  e.residual = r.max_residual;
  e.pass = r.closed;
  e.cases_checked = static_cast<int>(r.closure_table.size());
  const std::size_t n = r.elements.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      e.table.push_back({static_cast<double>(a * n + b), r.closure_table[a * n + b]});
  if (!r.closed) {
    const std::size_t worst = static_cast<std::size_t>(
        std::max_element(r.closure_table.begin(), r.closure_table.end()) -
        r.closure_table.begin());
    e.witness = "composition " + r.elements[worst / n].label() + " after " +
                r.elements[worst % n].label() + " matches no candidate";
  }
  return e;
}

/// Integrated form of the intertwining relation: P carries the first flow at
/// time k*t onto the second flow at time t.  k*t must stay rational for the
/// dyadic evaluators, so k is rounded when it sits on an integer; otherwise
/// both flows are evaluated through their real-time refinement.
inline CheckEntry flow_conjugacy_check(const Isometry& P, const FlowApprox& fa1,
                                       const FlowApprox& fa2, double k,
                                       const std::vector<RationalTime>& times,
                                       const std::vector<Point>& grid, double tol) {
  CheckEntry e;
  e.id = "conjugacy";
  e.label = "P carries flow 1 at time k*t onto flow 2 at time t";
  e.tolerance = tol;
  const double k_round = std::nearbyint(k);
  const bool integer_k = std::abs(k - k_round) <= 1e-12 && k_round != 0.0;
  for (const RationalTime& t : times) {
    for (const Point& p : grid) {
      Point lhs_in;
      if (integer_k)
        lhs_in = fa1.eval_rational(
            RationalTime(t.num * static_cast<std::int64_t>(k_round), t.den), p);
      else
        lhs_in = fa1.eval_real(k * t.value(), p).point;
      const Point lhs = apply(P, lhs_in);
      const Point rhs = fa2.eval_rational(t, apply(P, p));
      const double d = distance(lhs, rhs);
      if (d > e.residual) {
        e.residual = d;
        e.witness = "t=" + std::to_string(t.num) + "/" + std::to_string(t.den) +
                    " at p=" + detail::point_to_string(p);
      }
      ++e.cases_checked;
    }
  }
  e.metrics.emplace_back("k", k);
  e.pass = e.residual <= e.tolerance;
  return e;
}

struct ScalingSearchResult {
  double k = 1.0;
  double residual = 0.0;
  bool integer = true;
};

/// The scaling coefficient is an unknown positive constant; small integers
/// are tried first, then a golden-section sweep over [1/8, 16] if none fits.
inline ScalingSearchResult search_scaling(const Isometry& P, const VectorFieldEstimate& xi1,
                                          const VectorFieldEstimate& xi2,
                                          const std::vector<Point>& grid, double tol,
                                          int k_max = 8) {
  auto residual_at = [&](double k) {
    return check_intertwine({P, xi1, xi2, k}, grid, tol).residual;
  };
  ScalingSearchResult best{1.0, residual_at(1.0), true};
  for (int k = 2; k <= k_max && best.residual > tol; ++k) {
    const double r = residual_at(static_cast<double>(k));
    if (r < best.residual) best = {static_cast<double>(k), r, true};
  }
  if (best.residual <= tol) return best;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.125, hi = 16.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = residual_at(x1), f2 = residual_at(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-10; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = residual_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = residual_at(x2);
    }
  }
  const double k_fit = 0.5 * (lo + hi);
  const double r_fit = residual_at(k_fit);
  if (r_fit < best.residual) best = {k_fit, r_fit, false};
  return best;
}

}  // namespace rootflow
