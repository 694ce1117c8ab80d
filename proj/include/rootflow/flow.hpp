#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rootflow/root_system.hpp"
#include "rootflow/vector_field.hpp"

namespace rootflow {

struct RationalTime {
  std::int64_t num = 0;
  std::int64_t den = 1;  // positive; gcd(|num|, den) == 1

  RationalTime() = default;
  RationalTime(std::int64_t a, std::int64_t b) {
    if (b == 0) throw ConfigError("RationalTime: zero denominator");
    if (b < 0) {
      a = -a;
      b = -b;
    }
    const std::int64_t g = std::gcd(std::abs(a), b);
    num = (g == 0) ? 0 : a / g;
    den = (g == 0) ? 1 : b / g;
    if (num == 0) den = 1;
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline RationalTime rational_add(const RationalTime& s, const RationalTime& t) {
  return {s.num * t.den + t.num * s.den, s.den * t.den};
}

struct EvalRealResult {
  Point point;
  double error_estimate = 0.0;  // final Cauchy difference; 0 when t was hit exactly
  int level = 0;                // dyadic level of the returned value
  std::vector<DyadicLevel> levels;
};

/// Evaluator of the flow built from a root system: exact on rationals whose
/// denominator divides an index (through the coherency identity in reverse),
/// convergent dyadic approximation on real times.
class FlowApprox {
 public:
  explicit FlowApprox(RootSystem rs) : rs_(std::make_shared<const RootSystem>(std::move(rs))) {
    for (int l = 0; l < 62; ++l) {
      const std::int64_t d = std::int64_t{1} << l;
      bool reachable = false;
      for (std::int64_t b : rs_->index_set())
        if (b % d == 0) {
          reachable = true;
          break;
        }
      if (!reachable) break;
      max_level_ = l;
    }
  }

  const RootSystem& source() const { return *rs_; }
  int max_level() const { return max_level_; }

  Point eval_rational(const RationalTime& t, const Point& p) const {
    if (t.num == 0) return p;
    std::int64_t base = 0;
    for (std::int64_t b : rs_->index_set())
      if (b % t.den == 0) {
        base = b;
        break;
      }
    if (base == 0)
      throw UnreachableTimeError("eval_rational: denominator " + std::to_string(t.den) +
                                 " divides no index; use eval_real");
    const std::int64_t k = base / t.den;
    return apply(cached_power(base, k * t.num), p);
  }

  /// Dyadic approximants round(t*2^c)/2^c for growing c, stopping at the
  /// first Cauchy difference at most tol.  Exactly dyadic t short-circuits
  /// with error estimate 0.  Three consecutive non-decreasing differences
  /// abort with the diagnostic table: that failure mode is precisely what a
  /// root system without coherent limits produces.
  EvalRealResult eval_real(double t, const Point& p, double tol = 1e-10) const {
    EvalRealResult out{p, 0.0, 0, {}};
    Point prev = p;
    double prev_diff = 0.0;
    int nondecreasing = 0;
    for (int c = 0; c <= max_level_; ++c) {
      const double scaled = std::ldexp(t, c);
      if (std::abs(scaled) > 9e18)
        throw ConfigError("eval_real: time too large for dyadic refinement");
      const std::int64_t k = std::llround(scaled);
      const RationalTime tc(k, std::int64_t{1} << c);
      const Point pc = eval_rational(tc, p);
      const bool exact = (std::ldexp(static_cast<double>(k), -c) == t);
      if (exact) {
        out.point = pc;
        out.error_estimate = 0.0;
        out.level = c;
        out.levels.push_back({c, tc.num, tc.den, 0.0});
        return out;
      }
      if (c > 0) {
        const double diff = distance(pc, prev);
        out.levels.push_back({c, tc.num, tc.den, diff});
        out.point = pc;
        out.error_estimate = diff;
        out.level = c;
        if (diff <= tol) return out;
        if (diff > std::max(tol, 1e-14) && diff >= prev_diff * (1.0 - 1e-12) && c > 1) {
          if (++nondecreasing >= 3)
            throw ConvergenceError("eval_real: dyadic approximants are not Cauchy at t=" +
                                       std::to_string(t),
                                   out.levels);
        } else {
          nondecreasing = 0;
        }
        prev_diff = diff;
      } else {
        out.levels.push_back({0, tc.num, tc.den, 0.0});
        out.point = pc;
        out.level = 0;
      }
      prev = pc;
    }
    return out;
  }

 private:
  Diffeo cached_power(std::int64_t base, std::int64_t exponent) const {
    const std::pair<std::int64_t, std::int64_t> key{base, exponent};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, power(rs_->root(base), exponent)).first;
    return it->second;
  }

  std::shared_ptr<const RootSystem> rs_;
  int max_level_ = 0;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::int64_t, std::int64_t>, Diffeo> cache_;
};

struct RationalPair {
  RationalTime t1, t2;
};

inline std::vector<RationalPair> make_default_time_pairs() {
  return {{{1, 4}, {1, 2}}, {{1, 2}, {1, 2}}, {{1, 4}, {-1, 4}}, {{3, 4}, {1, 2}}, {{1, 1}, {-1, 2}}};
}

/// Flow axioms: identity at time zero and additivity on sampled time pairs.
/// Real pairs are compared against the sum of their own dyadic error
/// estimates; only the excess over that budget counts as residual.
inline CheckEntry verify_flow_axioms(const FlowApprox& fa, const std::vector<RationalPair>& pairs,
                                     const std::vector<std::pair<double, double>>& real_pairs,
                                     const std::vector<Point>& grid, double tol) {
  CheckEntry e;
  e.id = "flow-axioms";
  e.label = "identity at zero and additivity";
  e.tolerance = tol;
  for (const Point& p : grid) {
    const double d = distance(fa.eval_rational(RationalTime(0, 1), p), p);
    if (d > e.residual) {
      e.residual = d;
      e.witness = "time zero at p=" + detail::point_to_string(p);
    }
    ++e.cases_checked;
  }
  for (const RationalPair& pr : pairs) {
    const RationalTime sum = rational_add(pr.t1, pr.t2);
    for (const Point& p : grid) {
      try {
        const Point lhs = fa.eval_rational(pr.t2, fa.eval_rational(pr.t1, p));
        const Point rhs = fa.eval_rational(sum, p);
        const double d = distance(lhs, rhs);
        if (d > e.residual) {
          e.residual = d;
          e.witness = "(t1,t2)=(" + std::to_string(pr.t1.num) + "/" + std::to_string(pr.t1.den) +
                      "," + std::to_string(pr.t2.num) + "/" + std::to_string(pr.t2.den) +
                      ") at p=" + detail::point_to_string(p);
        }
        ++e.cases_checked;
      } catch (const UnreachableTimeError&) {
        e.untestable.push_back("(t1,t2)=(" + std::to_string(pr.t1.num) + "/" +
                               std::to_string(pr.t1.den) + "," + std::to_string(pr.t2.num) + "/" +
                               std::to_string(pr.t2.den) + "): denominator unreachable");
        break;
      }
    }
  }
  double real_excess = 0.0;
  for (const auto& [t1, t2] : real_pairs) {
    for (const Point& p : grid) {
      const EvalRealResult a = fa.eval_real(t1, p);
      const EvalRealResult b = fa.eval_real(t2, a.point);
      const EvalRealResult c = fa.eval_real(t1 + t2, p);
      const double budget = a.error_estimate + b.error_estimate + c.error_estimate;
      real_excess = std::max(real_excess, distance(b.point, c.point) - budget);
      ++e.cases_checked;
    }
  }
  e.metrics.emplace_back("real_pairs_excess_over_budget", std::max(real_excess, 0.0));
  e.residual = std::max(e.residual, real_excess);
  e.pass = e.residual <= e.tolerance;
  return e;
}

/// One-sided derivative of the flow at t=0 through the difference quotient
/// 2^c log_p(g_{2^c}(p)), Richardson-extrapolated r levels (halving steps,
/// first-order base error).  Cut-locus hits retry one level deeper.
inline Tangent extract_field(const FlowApprox& fa, const Point& p, int depth, int richardson) {
  if (depth < 0 || richardson < 0) throw ConfigError("extract_field: negative depth");
  if (depth + richardson > fa.max_level())
    throw ConfigError("extract_field: depth " + std::to_string(depth) + " + " +
                      std::to_string(richardson) + " extrapolation levels exceed the deepest "
                      "dyadic level " + std::to_string(fa.max_level()) + " of the system");
  std::string last_err;
  for (int c = depth; c + richardson <= fa.max_level(); ++c) {
    try {
      std::vector<Tangent> t;
      t.reserve(static_cast<std::size_t>(richardson) + 1);
      for (int j = 0; j <= richardson; ++j) {
        const int level = c + j;
        const Point q = fa.eval_rational(RationalTime(1, std::int64_t{1} << level), p);
        t.push_back(tangent_scale(log_point(p, q), std::ldexp(1.0, level)));
      }
      for (int k = 1; k <= richardson; ++k) {
        const double f = std::ldexp(1.0, k);  // step halves, error order k
        for (int j = 0; j + k <= richardson; ++j)
          t[static_cast<std::size_t>(j)] = tangent_scale(
              tangent_sub(tangent_scale(t[static_cast<std::size_t>(j) + 1], f),
                          t[static_cast<std::size_t>(j)]),
              1.0 / (f - 1.0));
      }
      if (p.manifold.kind == ManifoldKind::Sphere3)
        return project_tangent(p, std::move(t.front().vec));
      return t.front();
    } catch (const CutLocusError& err) {
      last_err = err.what();
    }
  }
  throw CutLocusError("extract_field: every level up to max depth hit the cut locus (last: " +
                      last_err + ")");
}

// spreads below these bounds collapse a sampled extraction to its closed form
inline constexpr double kRecognizeSpreadCircle = 1e-10;
inline constexpr double kRecognizeSpreadS3 = 1e-4;
inline constexpr double kRecognizeSpreadTorus = 1e-10;

/// Pointwise extraction over a grid.  If the samples agree with a constant
/// circle/torus field or a left-invariant field on the 3-sphere to within the
/// recognition spread, the closed form is returned (enabling exact
/// reintegration); otherwise the sampled field with the manifold's
/// interpolation rule.
inline VectorFieldEstimate extract_field_grid(const FlowApprox& fa, const std::vector<Point>& grid,
                                              int depth, int richardson) {
  if (grid.empty()) throw ConfigError("extract_field_grid: empty grid");
  std::vector<Tangent> vals;
  vals.reserve(grid.size());
  for (const Point& p : grid) vals.push_back(extract_field(fa, p, depth, richardson));
  const ManifoldId m = grid.front().manifold;
  if (m.kind == ManifoldKind::Circle) {
    double lo = vals.front().vec[0], hi = lo, sum = 0.0;
    for (const Tangent& v : vals) {
      lo = std::min(lo, v.vec[0]);
      hi = std::max(hi, v.vec[0]);
      sum += v.vec[0];
    }
    if (hi - lo < kRecognizeSpreadCircle)
      return VectorFieldEstimate::constant_circle(sum / static_cast<double>(vals.size()));
  } else if (m.kind == ManifoldKind::Sphere3) {
    // left-invariant means v = w * p for one imaginary w; test w = v * p^-1
    std::vector<Quat> w;
    w.reserve(vals.size());
    bool ok = true;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const Quat wi = vals[i].quat() * quat_inverse(grid[i].quat());
      if (std::abs(wi.w) > kRecognizeSpreadS3) {
        ok = false;
        break;
      }
      w.push_back(wi);
    }
    if (ok) {
      Quat mean{0, 0, 0, 0};
      for (const Quat& wi : w) mean = mean + wi;
      mean = (1.0 / static_cast<double>(w.size())) * mean;
      double spread = 0.0;
      for (const Quat& wi : w) spread = std::max(spread, quat_norm(wi - mean));
      if (spread < kRecognizeSpreadS3)
        return VectorFieldEstimate::left_invariant_s3(Quat{0.0, mean.x, mean.y, mean.z});
    }
  } else {
    const int n = m.coord_size();
    std::vector<double> lo(vals.front().vec.begin(), vals.front().vec.end());
    std::vector<double> hi = lo, sum(static_cast<std::size_t>(n), 0.0);
    for (const Tangent& v : vals)
      for (int i = 0; i < n; ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        lo[s] = std::min(lo[s], v.vec[s]);
        hi[s] = std::max(hi[s], v.vec[s]);
        sum[s] += v.vec[s];
      }
    bool flat = true;
    for (int i = 0; i < n; ++i)
      flat = flat && (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)] <
                      kRecognizeSpreadTorus);
    if (flat) {
      for (double& s : sum) s /= static_cast<double>(vals.size());
      return VectorFieldEstimate::torus_constant(std::move(sum));
    }
  }
  return VectorFieldEstimate::sampled(grid, std::move(vals));
}

struct RoundTripSettings {
  int extract_resolution = 128;
  int extract_depth = 10;
  int richardson = 2;
  int verify_resolution = 101;
  int seed = 7;
  double tol = 1e-6;
  IntegratorSettings integrator;
};

/// Executable content of the embedding theorem: extract the field from the
/// root system, integrate it for unit time, compare against the target on a
/// verification grid disjoint from the extraction grid.
inline CheckEntry round_trip_check(const Diffeo& f, const RootSystem& rs,
                                   const RoundTripSettings& settings = {}) {
  CheckEntry e;
  e.id = "round-trip";
  e.label = "extract field, integrate to time 1, compare with target";
  e.tolerance = settings.tol;
  const FlowApprox fa(rs);
  const ManifoldId m = rs.manifold();
  const VectorFieldEstimate xi = extract_field_grid(
      fa, sample_grid(m, settings.extract_resolution, settings.seed), settings.extract_depth,
      settings.richardson);
  const std::vector<Point> verify =
      m.kind == ManifoldKind::Circle
          ? shifted_circle_grid(settings.verify_resolution)
          : sample_grid(m, settings.verify_resolution, settings.seed + 1);
  for (const Point& p : verify) {
    const double d = distance(integrate_field(xi, 1.0, p, settings.integrator), apply(f, p));
    if (d > e.residual) {
      e.residual = d;
      e.witness = "p=" + detail::point_to_string(p);
    }
    ++e.cases_checked;
  }
  e.metrics.emplace_back("recognized_analytic", xi.is_analytic() ? 1.0 : 0.0);
  e.pass = e.residual <= e.tolerance;
  return e;
}

}  // namespace rootflow
