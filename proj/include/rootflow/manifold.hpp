#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "rootflow/errors.hpp"
#include "rootflow/quaternion.hpp"

namespace rootflow {

inline constexpr double kTau = 2.0 * std::numbers::pi;

enum class ManifoldKind { Circle, Sphere3, Torus };

// Identity of one of the supported model manifolds.  Torus carries its
// dimension; Circle and Sphere3 are fixed.
struct ManifoldId {
  ManifoldKind kind = ManifoldKind::Circle;
  int torus_dim = 0;

  static ManifoldId circle() { return {ManifoldKind::Circle, 0}; }
  static ManifoldId sphere3() { return {ManifoldKind::Sphere3, 0}; }
  static ManifoldId torus(int n) {
    if (n < 1) throw ConfigError("torus dimension must be >= 1");
    return {ManifoldKind::Torus, n};
  }

  int coord_size() const {
    switch (kind) {
      case ManifoldKind::Circle: return 1;
      case ManifoldKind::Sphere3: return 4;
      case ManifoldKind::Torus: return torus_dim;
    }
    return 0;
  }

  std::string name() const {
    switch (kind) {
      case ManifoldKind::Circle: return "circle";
      case ManifoldKind::Sphere3: return "sphere3";
      case ManifoldKind::Torus: return "torus:" + std::to_string(torus_dim);
    }
    return "?";
  }

  friend bool operator==(const ManifoldId& a, const ManifoldId& b) {
    return a.kind == b.kind && (a.kind != ManifoldKind::Torus || a.torus_dim == b.torus_dim);
  }
  friend bool operator!=(const ManifoldId& a, const ManifoldId& b) { return !(a == b); }
};

namespace detail {

// Reduce an angle to [0, 2*pi).  fmod is exact, so canonical inputs pass
// through bit-identically.
inline double canonical_angle(double th) {
  double c = std::fmod(th, kTau);
  if (c < 0.0) c += kTau;
  if (c >= kTau) c = 0.0;
  return c;
}

// Reduce a torus coordinate to [0, 1).
inline double canonical_unit(double x) {
  double c = std::fmod(x, 1.0);
  if (c < 0.0) c += 1.0;
  if (c >= 1.0) c = 0.0;
  return c;
}

}  // namespace detail

// A point of a model manifold in canonical coordinates: angle in [0, 2*pi)
// on the circle, a unit quaternion (w, x, y, z) on the 3-sphere, coordinates
// in [0, 1)^n on the flat torus.
struct Point {
  ManifoldId manifold;
  std::vector<double> coords;

  static Point circle(double theta) {
    return {ManifoldId::circle(), {detail::canonical_angle(theta)}};
  }

  static Point sphere3(const Quat& q) {
    const Quat u = quat_normalized(q);
    return {ManifoldId::sphere3(), {u.w, u.x, u.y, u.z}};
  }

  static Point torus(std::vector<double> xs) {
    for (double& x : xs) x = detail::canonical_unit(x);
    const int n = static_cast<int>(xs.size());
    return {ManifoldId::torus(n), std::move(xs)};
  }

  double angle() const { return coords[0]; }
  Quat quat() const { return {coords[0], coords[1], coords[2], coords[3]}; }
};

inline Point canonicalize(const ManifoldId& m, std::vector<double> raw) {
  switch (m.kind) {
    case ManifoldKind::Circle:
      raw[0] = detail::canonical_angle(raw[0]);
      break;
    case ManifoldKind::Sphere3: {
      const Quat u = quat_normalized(Quat{raw[0], raw[1], raw[2], raw[3]});
      raw = {u.w, u.x, u.y, u.z};
      break;
    }
    case ManifoldKind::Torus:
      for (double& x : raw) x = detail::canonical_unit(x);
      break;
  }
  return {m, std::move(raw)};
}

// Tangent vector anchored at a base point.  On the 3-sphere the vector lives
// in the ambient R^4 and must be orthogonal to the base (checked to 1e-10).
struct Tangent {
  Point base;
  std::vector<double> vec;

  double scalar() const { return vec[0]; }
  Quat quat() const { return {vec[0], vec[1], vec[2], vec[3]}; }
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Remove the radial component so vec lies in T_base(S^3).
inline void project_sphere3_tangent(const Point& base, std::vector<double>& vec) {
  const double r = dot(base.coords, vec);
  for (int i = 0; i < 4; ++i) vec[i] -= r * base.coords[i];
}

}  // namespace detail

inline Tangent make_tangent(const Point& base, std::vector<double> vec) {
  if (static_cast<int>(vec.size()) != base.manifold.coord_size())
    throw TangencyError("tangent dimension does not match the manifold");
  if (base.manifold.kind == ManifoldKind::Sphere3) {
    const double r = detail::dot(base.coords, vec);
    if (std::abs(r) > 1e-10 * std::max(1.0, detail::norm(vec)))
      throw TangencyError("vector is not tangent to the 3-sphere at its base");
    detail::project_sphere3_tangent(base, vec);
  }
  return {base, std::move(vec)};
}

// Tangent from possibly slightly off-tangent data; projects instead of
// throwing.  For internal numerical pipelines.
inline Tangent project_tangent(const Point& base, std::vector<double> vec) {
  if (base.manifold.kind == ManifoldKind::Sphere3)
    detail::project_sphere3_tangent(base, vec);
  return {base, std::move(vec)};
}

inline double tangent_norm(const Tangent& t) { return detail::norm(t.vec); }

inline Tangent tangent_scale(const Tangent& t, double s) {
  Tangent r = t;
  for (double& v : r.vec) v *= s;
  return r;
}

// a + b for tangents at the same base point.
inline Tangent tangent_add(const Tangent& a, const Tangent& b) {
  Tangent r = a;
  for (std::size_t i = 0; i < r.vec.size(); ++i) r.vec[i] += b.vec[i];
  return r;
}

inline Tangent tangent_sub(const Tangent& a, const Tangent& b) {
  Tangent r = a;
  for (std::size_t i = 0; i < r.vec.size(); ++i) r.vec[i] -= b.vec[i];
  return r;
}

/// Geodesic distance between two points of the same manifold.
inline double distance(const Point& p, const Point& q) {
  if (p.manifold != q.manifold) throw Error("distance: mismatched manifolds");
  switch (p.manifold.kind) {
    case ManifoldKind::Circle:
      return std::abs(std::remainder(p.coords[0] - q.coords[0], kTau));
    case ManifoldKind::Sphere3:
      return quat_angle(p.quat(), q.quat());
    case ManifoldKind::Torus: {
      double s = 0.0;
      for (std::size_t i = 0; i < p.coords.size(); ++i) {
        const double d = std::remainder(p.coords[i] - q.coords[i], 1.0);
        s += d * d;
      }
      return std::sqrt(s);
    }
  }
  return 0.0;
}

/// Exponential map: follow the geodesic from p with initial velocity v for
/// unit time.  Result is canonicalized.
inline Point exp_point(const Point& p, const Tangent& v) {
  if (v.base.manifold != p.manifold) throw Error("exp_point: mismatched manifolds");
  switch (p.manifold.kind) {
    case ManifoldKind::Circle:
      return Point::circle(p.coords[0] + v.vec[0]);
    case ManifoldKind::Sphere3: {
      std::vector<double> vec = v.vec;
      const double r = detail::dot(p.coords, vec);
      if (std::abs(r) > 1e-10 * std::max(1.0, detail::norm(vec)))
        throw TangencyError("exp_point: vector is not tangent to the 3-sphere");
      detail::project_sphere3_tangent(p, vec);
      const double th = detail::norm(vec);
      if (th < 1e-300) return p;
      std::vector<double> out(4);
      const double c = std::cos(th), s = std::sin(th) / th;
      for (int i = 0; i < 4; ++i) out[i] = c * p.coords[i] + s * vec[i];
      return canonicalize(p.manifold, std::move(out));
    }
    case ManifoldKind::Torus: {
      std::vector<double> out = p.coords;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += v.vec[i];
      return canonicalize(p.manifold, std::move(out));
    }
  }
  return p;
}

/// Inverse of exp_point: the initial velocity of the minimizing geodesic
/// from p to q.  Refuses points at or within tol of the cut locus, where the
/// minimizer is not unique.
inline Tangent log_point(const Point& p, const Point& q, double cut_tol = 1e-9) {
  if (p.manifold != q.manifold) throw Error("log_point: mismatched manifolds");
  switch (p.manifold.kind) {
    case ManifoldKind::Circle: {
      const double d = std::remainder(q.coords[0] - p.coords[0], kTau);
      if (std::abs(d) >= std::numbers::pi - cut_tol)
        throw CutLocusError("log_point: points are antipodal on the circle");
      return {p, {d}};
    }
    case ManifoldKind::Sphere3: {
      const double th = quat_angle(p.quat(), q.quat());
      if (th >= std::numbers::pi - cut_tol)
        throw CutLocusError("log_point: antipodal points on the 3-sphere");
      if (th < 1e-300) return {p, {0.0, 0.0, 0.0, 0.0}};
      // direction = component of q orthogonal to p, rescaled to length th
      std::vector<double> dir(4);
      const double c = detail::dot(p.coords, q.coords);
      for (int i = 0; i < 4; ++i) dir[i] = q.coords[i] - c * p.coords[i];
      const double n = detail::norm(dir);
      if (n < 1e-300) return {p, {0.0, 0.0, 0.0, 0.0}};
      for (double& x : dir) x *= th / n;
      return {p, std::move(dir)};
    }
    case ManifoldKind::Torus: {
      std::vector<double> d(p.coords.size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = std::remainder(q.coords[i] - p.coords[i], 1.0);
        if (std::abs(d[i]) >= 0.5 - cut_tol)
          throw CutLocusError("log_point: coordinate at the torus cut locus");
      }
      return {p, std::move(d)};
    }
  }
  return {p, {}};
}

namespace detail {

// Additive low-discrepancy sequence in [0,1)^3 (generalized golden ratios),
// seeded by an offset so grids are reproducible per seed.
struct R3Sequence {
  // plastic-number based alphas
  static constexpr double a1 = 0.8191725133961644;
  static constexpr double a2 = 0.6710436067037892;
  static constexpr double a3 = 0.5497004779019702;
  double s1, s2, s3;

  explicit R3Sequence(std::uint64_t seed) {
    // splitmix64 scramble of the seed into three offsets
    auto next = [&]() {
      seed += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      z = z ^ (z >> 31);
      return static_cast<double>(z >> 11) * 0x1.0p-53;
    };
    s1 = next();
    s2 = next();
    s3 = next();
  }

  std::array<double, 3> operator()(std::uint64_t k) const {
    auto frac = [](double x) { return x - std::floor(x); };
    const double kk = static_cast<double>(k + 1);
    return {frac(s1 + kk * a1), frac(s2 + kk * a2), frac(s3 + kk * a3)};
  }
};

// Uniform-measure map from [0,1)^3 onto the unit quaternions.
inline Quat uniform_quat(const std::array<double, 3>& u) {
  const double r1 = std::sqrt(1.0 - u[0]), r2 = std::sqrt(u[0]);
  const double t1 = kTau * u[1], t2 = kTau * u[2];
  return {r1 * std::sin(t1), r1 * std::cos(t1), r2 * std::sin(t2), r2 * std::cos(t2)};
}

}  // namespace detail

/// Deterministic evaluation grid.  Circle: `resolution` uniform angles.
/// Torus(n): lattice with `resolution` points per dimension.  Sphere3: a
/// seeded low-discrepancy set of `resolution` unit quaternions.
inline std::vector<Point> sample_grid(const ManifoldId& m, int resolution,
                                      std::uint64_t seed = 0) {
  if (resolution < 1) throw ConfigError("sample_grid: resolution must be >= 1");
  std::vector<Point> out;
  switch (m.kind) {
    case ManifoldKind::Circle: {
      out.reserve(resolution);
      for (int k = 0; k < resolution; ++k)
        out.push_back(Point::circle(kTau * static_cast<double>(k) / resolution));
      break;
    }
    case ManifoldKind::Sphere3: {
      out.reserve(resolution);
      detail::R3Sequence seq(seed);
      for (int k = 0; k < resolution; ++k)
        out.push_back(Point::sphere3(detail::uniform_quat(seq(static_cast<std::uint64_t>(k)))));
      break;
    }
    case ManifoldKind::Torus: {
      const int n = m.torus_dim;
      std::int64_t total = 1;
      for (int d = 0; d < n; ++d) {
        total *= resolution;
        if (total > 1'000'000) throw ConfigError("sample_grid: torus lattice too large");
      }
      std::vector<int> idx(n, 0);
      for (std::int64_t c = 0; c < total; ++c) {
        std::vector<double> xs(n);
        for (int d = 0; d < n; ++d) xs[d] = static_cast<double>(idx[d]) / resolution;
        out.push_back(Point::torus(std::move(xs)));
        for (int d = n - 1; d >= 0; --d) {
          if (++idx[d] < resolution) break;
          idx[d] = 0;
        }
      }
      break;
    }
  }
  return out;
}

/// Uniform circle grid offset by a fixed fraction of the spacing; used as a
/// verification grid distinct from solver/sample nodes.
inline std::vector<Point> shifted_circle_grid(int resolution, double shift_fraction = 0.382) {
  std::vector<Point> out;
  out.reserve(resolution);
  for (int k = 0; k < resolution; ++k)
    out.push_back(Point::circle(kTau * (static_cast<double>(k) + shift_fraction) / resolution));
  return out;
}

}  // namespace rootflow
