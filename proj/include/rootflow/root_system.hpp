#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rootflow/diffeo.hpp"

namespace rootflow {

enum class Provenance { Analytic, FromField, SolvedSqrtChain, QuatChain };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Analytic: return "analytic";
    case Provenance::FromField: return "from-field";
    case Provenance::SolvedSqrtChain: return "solved-sqrt-chain";
    case Provenance::QuatChain: return "quat-chain";
  }
  return "unknown";
}

/// An indexed family b -> g_b of candidate b-th roots of one target map.
class RootSystem {
 public:
  RootSystem(Diffeo target, std::map<std::int64_t, Diffeo> roots, Provenance prov)
      : target_(std::move(target)), roots_(std::move(roots)), provenance_(prov) {
    if (roots_.empty()) throw ConfigError("RootSystem: no roots given");
    for (const auto& [b, g] : roots_) {
      if (b < 1) throw ConfigError("RootSystem: indices must be positive");
      if (g.manifold() != target_.manifold())
        throw ConfigError("RootSystem: root and target manifolds differ");
      index_set_.push_back(b);
    }
    // std::map keys are already strictly increasing
  }

  const Diffeo& target() const { return target_; }
  const std::vector<std::int64_t>& index_set() const { return index_set_; }
  const ManifoldId& manifold() const { return target_.manifold(); }
  Provenance provenance() const { return provenance_; }

  bool has_root(std::int64_t b) const { return roots_.count(b) != 0; }

  const Diffeo& root(std::int64_t b) const {
    auto it = roots_.find(b);
    if (it == roots_.end())
      throw Error("RootSystem: no root at index " + std::to_string(b));
    return it->second;
  }

 private:
  Diffeo target_;
  std::vector<std::int64_t> index_set_;
  std::map<std::int64_t, Diffeo> roots_;
  Provenance provenance_;
};

/// One verified property with its resolved tolerance and evidence.
struct CheckEntry {
  std::string id;
  std::string label;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool surrogate = false;
  std::string witness;
  std::int64_t cases_checked = 0;
  std::vector<std::string> untestable;
  // (index, value) rows backing the residual, e.g. per-index raw residuals
  std::vector<std::array<double, 2>> table;
  std::vector<std::pair<std::string, double>> metrics;
};

struct VerificationReport {
  std::vector<CheckEntry> entries;

  bool overall_pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }

  const CheckEntry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }
};

namespace detail {

inline std::string point_to_string(const Point& p) {
  std::string out = "(";
  char buf[40];
  for (std::size_t i = 0; i < p.coords.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", p.coords[i]);
    out += buf;
    if (i + 1 < p.coords.size()) out += ", ";
  }
  return out + ")";
}

}  // namespace detail

/// Condition: each g_b composed b times reproduces the target.  Raw per-index
/// residuals are divided by b before comparing against tol, absorbing the
/// floating-point accumulation of b-fold composition; the raw values are kept
/// in the table.
inline CheckEntry verify_root_property(const RootSystem& rs, const std::vector<Point>& grid,
                                       double tol) {
  CheckEntry e;
  e.id = "condition-2";
  e.label = "b-th root property";
  e.tolerance = tol;
  double worst_norm = 0.0, worst_raw = 0.0;
  for (std::int64_t b : rs.index_set()) {
    const Diffeo pw = power(rs.root(b), b);
    double raw = 0.0;
    const Point* worst_p = nullptr;
    for (const Point& p : grid) {
      const double d = distance(apply(pw, p), apply(rs.target(), p));
      if (d > raw) {
        raw = d;
        worst_p = &p;
      }
      ++e.cases_checked;
    }
    e.table.push_back({static_cast<double>(b), raw});
    worst_raw = std::max(worst_raw, raw);
    const double nrm = raw / static_cast<double>(b);
    if (nrm > worst_norm) {
      worst_norm = nrm;
      e.witness = "b=" + std::to_string(b) +
                  (worst_p ? " at p=" + detail::point_to_string(*worst_p) : "");
    }
  }
  e.residual = worst_norm;
  e.pass = e.residual <= e.tolerance;
  e.metrics.emplace_back("max_raw_residual", worst_raw);
  return e;
}

/// Condition: the roots commute pairwise.
inline CheckEntry verify_commutativity(const RootSystem& rs, const std::vector<Point>& grid,
                                       double tol) {
  CheckEntry e;
  e.id = "condition-3";
  e.label = "pairwise commutativity";
  e.tolerance = tol;
  const auto& idx = rs.index_set();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const Diffeo& g1 = rs.root(idx[i]);
      const Diffeo& g2 = rs.root(idx[j]);
      for (const Point& p : grid) {
        const double d = distance(apply(g1, apply(g2, p)), apply(g2, apply(g1, p)));
        if (d > e.residual) {
          e.residual = d;
          e.witness = "(b1,b2)=(" + std::to_string(idx[i]) + "," + std::to_string(idx[j]) +
                      ") at p=" + detail::point_to_string(p);
        }
        ++e.cases_checked;
      }
    }
  }
  e.pass = e.residual <= e.tolerance;
  return e;
}

struct CoherencyCase {
  std::int64_t a;
  std::int64_t b;
};

inline std::vector<CoherencyCase> make_default_coherency_cases(
    const std::vector<std::int64_t>& index_set) {
  std::vector<CoherencyCase> cases;
  for (std::int64_t b : index_set) {
    if (b >= 4 && b % 2 == 0) cases.push_back({2, b});  // (g_b)^2 = g_{b/2}
  }
  std::vector<std::int64_t> sorted = index_set;
  auto has = [&sorted](std::int64_t v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
  };
  if (has(8) && has(4)) cases.push_back({6, 8});    // reduces to (g_4)^3
  if (has(16) && has(4)) cases.push_back({4, 16});  // reduces to (g_4)^1
  return cases;
}

/// Condition: (g_b)^a equals (g_{b/gcd})^{a/gcd}.  Cases whose reduced index
/// is absent are listed as untestable, not failed; a reduced index of 1 means
/// comparison against a power of the target itself.
inline CheckEntry verify_coherency(const RootSystem& rs, const std::vector<CoherencyCase>& cases,
                                   const std::vector<Point>& grid, double tol) {
  CheckEntry e;
  e.id = "condition-4";
  e.label = "coherency under gcd reduction";
  e.tolerance = tol;
  for (const CoherencyCase& c : cases) {
    if (c.a == 0) {
      ++e.cases_checked;  // both sides are the identity by definition
      continue;
    }
    if (!rs.has_root(c.b)) {
      e.untestable.push_back("a=" + std::to_string(c.a) + " b=" + std::to_string(c.b) +
                             ": index not in index set");
      continue;
    }
    const std::int64_t g = std::gcd(std::abs(c.a), c.b);
    const std::int64_t br = c.b / g, ar = c.a / g;
    const Diffeo* rhs_base = nullptr;
    if (br == 1) {
      rhs_base = &rs.target();
    } else if (rs.has_root(br)) {
      rhs_base = &rs.root(br);
    } else {
      e.untestable.push_back("a=" + std::to_string(c.a) + " b=" + std::to_string(c.b) +
                             ": reduced index " + std::to_string(br) + " not in index set");
      continue;
    }
    const Diffeo lhs = power(rs.root(c.b), c.a);
    const Diffeo rhs = power(*rhs_base, ar);
    for (const Point& p : grid) {
      const double d = distance(apply(lhs, p), apply(rhs, p));
      if (d > e.residual) {
        e.residual = d;
        e.witness = "(a,b)=(" + std::to_string(c.a) + "," + std::to_string(c.b) +
                    ") at p=" + detail::point_to_string(p);
      }
      ++e.cases_checked;
    }
  }
  e.pass = e.residual <= e.tolerance;
  return e;
}

/// Condition: sup-distance to identity decays to zero like ~K/b.  The decay
/// table (b, delta_b) is always attached.  Pass needs the top half of the
/// table to decrease and the deepest indices to fit delta_b = K/b with
/// absolute deviation at most tol_converge; the fit window is the last few
/// indices, where higher-order displacement terms (O(1/b^3) for a smooth
/// flow) are below the fit error.
inline CheckEntry verify_convergence_to_identity(const RootSystem& rs,
                                                 const std::vector<Point>& grid,
                                                 double tol_converge) {
  CheckEntry e;
  e.id = "condition-5";
  e.label = "convergence to the identity";
  e.tolerance = tol_converge;
  const auto& idx = rs.index_set();
  if (idx.size() < 3) throw ConfigError("convergence check needs at least 3 indices");
  const Diffeo id = Diffeo::identity(rs.manifold());
  std::vector<double> delta(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    delta[i] = sup_distance(rs.root(idx[i]), id, grid);
    e.table.push_back({static_cast<double>(idx[i]), delta[i]});
    e.cases_checked += static_cast<std::int64_t>(grid.size());
  }

  const double atol = 1e-13;  // below this the root is the identity to rounding
  const std::size_t half_begin = idx.size() - (idx.size() + 1) / 2;

  // An index-doubling ~K/b family at least nearly halves; 0.9 is a loose
  // guard that still rejects stalled sequences.
  double decrease_defect = 0.0;
  std::size_t worst_dec = 0;
  for (std::size_t i = half_begin + 1; i < idx.size(); ++i) {
    if (delta[i] <= atol) continue;
    const double defect = (delta[i] - 0.9 * delta[i - 1]) / std::max(delta[i - 1], atol);
    if (defect > decrease_defect) {
      decrease_defect = defect;
      worst_dec = i;
    }
  }

  const std::size_t top_count = (idx.size() + 1) / 2;
  const std::size_t window = std::min<std::size_t>(4, top_count);
  const std::size_t w_begin = idx.size() - window;
  double fit_num = 0.0, fit_den = 0.0;
  for (std::size_t i = w_begin; i < idx.size(); ++i) {
    const double b = static_cast<double>(idx[i]);
    fit_num += delta[i] / b;
    fit_den += 1.0 / (b * b);
  }
  const double K = fit_num / fit_den;
  double fit_rel = 0.0, fit_abs = 0.0;
  if (K > atol) {
    for (std::size_t i = w_begin; i < idx.size(); ++i) {
      const double b = static_cast<double>(idx[i]);
      const double dev = std::abs(delta[i] - K / b);
      fit_abs = std::max(fit_abs, dev);
      fit_rel = std::max(fit_rel, dev * b / K);
    }
  }

  // Residual mixes the absolute deviation from the fitted K/b law on the
  // deepest window (sup-distance units) with the decrease defect
  // (dimensionless); both are ~0 for a genuinely convergent family and O(0.1)
  // for a stalled one, so a single tolerance governs them.
  e.residual = std::max(fit_abs, decrease_defect);
  e.pass = e.residual <= e.tolerance;
  if (decrease_defect > 0.0)
    e.witness = "delta does not decrease at b=" + std::to_string(idx[worst_dec]);
  else if (K <= atol)
    e.witness = "all roots already at the identity";
  e.metrics.emplace_back("fitted_K", K);
  e.metrics.emplace_back("max_abs_deviation", fit_abs);
  e.metrics.emplace_back("max_rel_deviation", fit_rel);
  e.metrics.emplace_back("fit_window", static_cast<double>(window));
  return e;
}

/// Condition: target and every root are orientation-preserving of degree one.
/// This is a computable surrogate for isotopy to the identity and is labeled
/// as such; residual counts offending maps.
inline CheckEntry verify_isotopy_surrogate(const RootSystem& rs, const std::vector<Point>& grid) {
  CheckEntry e;
  e.id = "condition-1";
  e.label = "isotopy to identity (orientation/degree surrogate)";
  e.surrogate = true;
  e.tolerance = 0.5;
  std::int64_t failures = 0;
  const OrientationReport tgt = orientation_class(rs.target(), grid);
  ++e.cases_checked;
  if (tgt.cls != OrientationClass::PreservingDegree1) {
    ++failures;
    e.witness = "target: " + tgt.note;
  }
  for (std::int64_t b : rs.index_set()) {
    const OrientationReport rep = orientation_class(rs.root(b), grid);
    ++e.cases_checked;
    if (rep.cls != OrientationClass::PreservingDegree1) {
      ++failures;
      if (e.witness.empty()) e.witness = "g_" + std::to_string(b) + ": " + rep.note;
    }
  }
  e.residual = static_cast<double>(failures);
  e.pass = failures == 0;
  return e;
}

struct CommutePowerCase {
  std::int64_t a1, b1, a2, b2;
};

inline std::vector<CommutePowerCase> make_default_lemma_cases() {
  return {{1, 2, 1, 4}, {3, 4, 1, 2}, {0, 2, 5, 4}};
}

/// Composite-power identity: g_{b2}^{a2} of g_{b1}^{a1} equals
/// (g_{b1 b2})^{a2 b1 + a1 b2}.
inline CheckEntry verify_lemma_commute_power(const RootSystem& rs,
                                             const std::vector<CommutePowerCase>& cases,
                                             const std::vector<Point>& grid, double tol) {
  CheckEntry e;
  e.id = "lemma";
  e.label = "powers at composite index";
  e.tolerance = tol;
  for (const CommutePowerCase& c : cases) {
    const std::int64_t composite = c.b1 * c.b2;
    if (!rs.has_root(c.b1) || !rs.has_root(c.b2) || !rs.has_root(composite)) {
      e.untestable.push_back("(a1,b1,a2,b2)=(" + std::to_string(c.a1) + "," +
                             std::to_string(c.b1) + "," + std::to_string(c.a2) + "," +
                             std::to_string(c.b2) + "): index " + std::to_string(composite) +
                             " or a factor not in index set");
      continue;
    }
    const Diffeo lhs = compose(power(rs.root(c.b2), c.a2), power(rs.root(c.b1), c.a1));
    const Diffeo rhs = power(rs.root(composite), c.a2 * c.b1 + c.a1 * c.b2);
    for (const Point& p : grid) {
      const double d = distance(apply(lhs, p), apply(rhs, p));
      if (d > e.residual) {
        e.residual = d;
        e.witness = "(a1,b1,a2,b2)=(" + std::to_string(c.a1) + "," + std::to_string(c.b1) +
                    "," + std::to_string(c.a2) + "," + std::to_string(c.b2) +
                    ") at p=" + detail::point_to_string(p);
      }
      ++e.cases_checked;
    }
  }
  e.pass = e.residual <= e.tolerance;
  return e;
}

struct VerifyOptions {
  double tol_root = 1e-10;
  double tol_commute = 1e-10;
  double tol_coherency = 1e-10;
  double tol_lemma = 1e-10;
  double tol_converge = 1e-3;
  std::vector<CoherencyCase> coherency_cases;    // empty: derive from index set
  std::vector<CommutePowerCase> lemma_cases;     // empty: defaults
  bool include_lemma = true;
};

inline VerificationReport verify_all(const RootSystem& rs, const std::vector<Point>& grid,
                                     const VerifyOptions& opt = {}) {
  VerificationReport rep;
  rep.entries.push_back(verify_isotopy_surrogate(rs, grid));
  rep.entries.push_back(verify_root_property(rs, grid, opt.tol_root));
  rep.entries.push_back(verify_commutativity(rs, grid, opt.tol_commute));
  const auto coh =
      opt.coherency_cases.empty() ? make_default_coherency_cases(rs.index_set()) : opt.coherency_cases;
  rep.entries.push_back(verify_coherency(rs, coh, grid, opt.tol_coherency));
  rep.entries.push_back(verify_convergence_to_identity(rs, grid, opt.tol_converge));
  if (opt.include_lemma) {
    const auto lem = opt.lemma_cases.empty() ? make_default_lemma_cases() : opt.lemma_cases;
    rep.entries.push_back(verify_lemma_commute_power(rs, lem, grid, opt.tol_lemma));
  }
  return rep;
}

/// Roots of the time-1 map of a field: g_{2^c} is the time-1/2^c flow map.
inline RootSystem roots_from_field(const VectorFieldEstimate& field, int depth,
                                   const IntegratorSettings& settings = {}) {
  if (depth < 1) throw ConfigError("roots_from_field: depth must be >= 1");
  std::map<std::int64_t, Diffeo> roots;
  for (int c = 1; c <= depth; ++c) {
    const std::int64_t b = std::int64_t{1} << c;
    roots.emplace(b, Diffeo::flow_time(field, 1.0 / static_cast<double>(b), settings));
  }
  return RootSystem(Diffeo::flow_time(field, 1.0, settings), std::move(roots),
                    Provenance::FromField);
}

/// Quaternion square-root chain for the antipodal map: u_1 = q and
/// u_c = normalize(1 + u_{c-1}), the branch with the smaller angle to 1;
/// roots are the left multiplications by u_c.
inline RootSystem quat_sqrt_chain(const Quat& q, int depth) {
  if (depth < 1) throw ConfigError("quat_sqrt_chain: depth must be >= 1");
  if (!quat_is_unit(q, 1e-12) || !quat_is_pure_imaginary(q, 1e-12))
    throw ConfigError("quat_sqrt_chain: seed must be a purely imaginary unit quaternion");
  std::map<std::int64_t, Diffeo> roots;
  Quat u = quat_normalized(q);
  roots.emplace(2, Diffeo::quat_left_mult(u));
  for (int c = 2; c <= depth; ++c) {
    u = quat_principal_sqrt(u);
    roots.emplace(std::int64_t{1} << c, Diffeo::quat_left_mult(u));
  }
  return RootSystem(Diffeo::quat_left_mult(Quat{-1.0, 0.0, 0.0, 0.0}), std::move(roots),
                    Provenance::QuatChain);
}

}  // namespace rootflow
