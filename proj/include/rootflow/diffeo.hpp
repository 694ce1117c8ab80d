#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "rootflow/circle_lift.hpp"
#include "rootflow/manifold.hpp"
#include "rootflow/vector_field.hpp"

namespace rootflow {

class Diffeo;

namespace body {

struct Identity {};
struct CircleRotation { double alpha; };
struct CircleReflection {};
struct CircleLifted { CircleLift lift; };
struct QuatLeftMult { Quat q; };
struct QuatConjugation { Quat r; };
struct TorusTranslation { std::vector<double> v; };
struct FlowTime {
  VectorFieldEstimate field;
  double t;
  IntegratorSettings settings;
};
struct Compose { std::vector<Diffeo> parts; };  // parts[0] applied last
struct Inverse { std::shared_ptr<const Diffeo> inner; };
struct Power { std::shared_ptr<const Diffeo> base; std::int64_t exp; };

using Variant = std::variant<Identity, CircleRotation, CircleReflection, CircleLifted,
                             QuatLeftMult, QuatConjugation, TorusTranslation, FlowTime,
                             Compose, Inverse, Power>;

}  // namespace body

/// Immutable diffeomorphism of a model manifold.  Closed-form families keep
/// algebraic structure under compose/inverse/power; numerically defined maps
/// (interpolated lifts, flow maps) stay symbolic so that verification
/// exercises the honest composed arithmetic.
class Diffeo {
 public:
  Diffeo() : Diffeo(ManifoldId::circle(), body::Identity{}) {}

  static Diffeo identity(const ManifoldId& m) { return Diffeo(m, body::Identity{}); }

  static Diffeo circle_rotation(double alpha) {
    return Diffeo(ManifoldId::circle(), body::CircleRotation{alpha});
  }

  static Diffeo circle_reflection() {
    return Diffeo(ManifoldId::circle(), body::CircleReflection{});
  }

  static Diffeo circle_lifted(CircleLift lift) {
    return Diffeo(ManifoldId::circle(), body::CircleLifted{std::move(lift)});
  }

  static Diffeo quat_left_mult(const Quat& q) {
    if (!quat_is_unit(q)) throw ConfigError("quat_left_mult: factor must be a unit quaternion");
    return Diffeo(ManifoldId::sphere3(), body::QuatLeftMult{quat_normalized(q)});
  }

  static Diffeo quat_conjugation(const Quat& r) {
    if (!quat_is_unit(r)) throw ConfigError("quat_conjugation: rotor must be a unit quaternion");
    return Diffeo(ManifoldId::sphere3(), body::QuatConjugation{quat_normalized(r)});
  }

  static Diffeo torus_translation(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    for (double& x : v) x = detail::canonical_unit(x);
    return Diffeo(ManifoldId::torus(n), body::TorusTranslation{std::move(v)});
  }

  static Diffeo flow_time(VectorFieldEstimate field, double t,
                          const IntegratorSettings& settings = {}) {
    const ManifoldId m = field.manifold();
    return Diffeo(m, body::FlowTime{std::move(field), t, settings});
  }

  const ManifoldId& manifold() const { return node_->manifold; }
  const body::Variant& body_variant() const { return node_->body; }

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&node_->body);
  }

 private:
  struct Node {
    ManifoldId manifold;
    body::Variant body;
  };

  Diffeo(ManifoldId m, body::Variant b)
      : node_(std::make_shared<const Node>(Node{m, std::move(b)})) {}

  std::shared_ptr<const Node> node_;

  friend Diffeo compose(const Diffeo& a, const Diffeo& b);
  friend Diffeo inverse(const Diffeo& d);
  friend Diffeo power(const Diffeo& d, std::int64_t a);
};

Point apply(const Diffeo& d, const Point& p);
Tangent differential(const Diffeo& d, const Tangent& v);
Diffeo compose(const Diffeo& a, const Diffeo& b);
Diffeo inverse(const Diffeo& d);
Diffeo power(const Diffeo& d, std::int64_t a);

namespace detail {

inline Point apply_n(const Diffeo& d, std::int64_t n, Point p) {
  for (std::int64_t i = 0; i < n; ++i) p = apply(d, p);
  return p;
}

}  // namespace detail

inline Point apply(const Diffeo& d, const Point& p) {
  if (p.manifold != d.manifold()) throw Error("apply: point is on a different manifold");
  return std::visit(
      [&](const auto& b) -> Point {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, body::Identity>) {
          return p;
        } else if constexpr (std::is_same_v<T, body::CircleRotation>) {
          return Point::circle(p.coords[0] + b.alpha);
        } else if constexpr (std::is_same_v<T, body::CircleReflection>) {
          return Point::circle(-p.coords[0]);
        } else if constexpr (std::is_same_v<T, body::CircleLifted>) {
          return Point::circle(kTau * b.lift.eval(p.coords[0] / kTau));
        } else if constexpr (std::is_same_v<T, body::QuatLeftMult>) {
          return Point::sphere3(b.q * p.quat());
        } else if constexpr (std::is_same_v<T, body::QuatConjugation>) {
          return Point::sphere3(b.r * p.quat() * quat_inverse(b.r));
        } else if constexpr (std::is_same_v<T, body::TorusTranslation>) {
          std::vector<double> out = p.coords;
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.v[i];
          return canonicalize(p.manifold, std::move(out));
        } else if constexpr (std::is_same_v<T, body::FlowTime>) {
          return integrate_field(b.field, b.t, p, b.settings);
        } else if constexpr (std::is_same_v<T, body::Compose>) {
          Point cur = p;
          for (auto it = b.parts.rbegin(); it != b.parts.rend(); ++it) cur = apply(*it, cur);
          return cur;
        } else if constexpr (std::is_same_v<T, body::Inverse>) {
          const auto* lifted = b.inner->template get_if<body::CircleLifted>();
          if (!lifted) throw Error("apply: inverse of this map has no evaluation rule");
          return Point::circle(kTau * lifted->lift.inverse(p.coords[0] / kTau));
        } else {  // Power
          const body::Power& pw = b;
          if (pw.exp >= 0) return detail::apply_n(*pw.base, pw.exp, p);
          return detail::apply_n(inverse(*pw.base), -pw.exp, p);
        }
      },
      d.body_variant());
}

namespace detail {

// Central-difference differential along a geodesic; used for bodies without
// an analytic derivative (flow maps).
inline Tangent fd_differential(const Diffeo& d, const Tangent& v, double h = 1e-5) {
  const Point& p = v.base;
  const Point image = apply(d, p);
  const double nv = tangent_norm(v);
  if (nv < 1e-300) {
    std::vector<double> zero(static_cast<std::size_t>(p.manifold.coord_size()), 0.0);
    return {image, std::move(zero)};
  }
  const Tangent unit = tangent_scale(v, 1.0 / nv);
  const Point qp = apply(d, exp_point(p, tangent_scale(unit, h)));
  const Point qm = apply(d, exp_point(p, tangent_scale(unit, -h)));
  const Tangent lp = log_point(image, qp);
  const Tangent lm = log_point(image, qm);
  Tangent diff = tangent_scale(tangent_sub(lp, lm), nv / (2.0 * h));
  return project_tangent(image, std::move(diff.vec));
}

}  // namespace detail

inline Tangent differential(const Diffeo& d, const Tangent& v) {
  if (v.base.manifold != d.manifold())
    throw Error("differential: tangent lives on a different manifold");
  return std::visit(
      [&](const auto& b) -> Tangent {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, body::Identity>) {
          return v;
        } else if constexpr (std::is_same_v<T, body::CircleRotation>) {
          return {apply(d, v.base), v.vec};
        } else if constexpr (std::is_same_v<T, body::CircleReflection>) {
          return {apply(d, v.base), {-v.vec[0]}};
        } else if constexpr (std::is_same_v<T, body::CircleLifted>) {
          const double x = v.base.coords[0] / kTau;
          return {apply(d, v.base), {v.vec[0] * b.lift.derivative(x)}};
        } else if constexpr (std::is_same_v<T, body::QuatLeftMult>) {
          const Quat w = b.q * v.quat();
          return project_tangent(apply(d, v.base), {w.w, w.x, w.y, w.z});
        } else if constexpr (std::is_same_v<T, body::QuatConjugation>) {
          const Quat w = b.r * v.quat() * quat_inverse(b.r);
          return project_tangent(apply(d, v.base), {w.w, w.x, w.y, w.z});
        } else if constexpr (std::is_same_v<T, body::TorusTranslation>) {
          return {apply(d, v.base), v.vec};
        } else if constexpr (std::is_same_v<T, body::FlowTime>) {
          return detail::fd_differential(d, v);
        } else if constexpr (std::is_same_v<T, body::Compose>) {
          Tangent cur = v;
          for (auto it = b.parts.rbegin(); it != b.parts.rend(); ++it)
            cur = differential(*it, cur);
          return cur;
        } else if constexpr (std::is_same_v<T, body::Inverse>) {
          const auto* lifted = b.inner->template get_if<body::CircleLifted>();
          if (!lifted) throw Error("differential: inverse of this map has no derivative rule");
          const double xpre = lifted->lift.inverse(v.base.coords[0] / kTau);
          const double slope = lifted->lift.derivative(xpre);
          return {apply(d, v.base), {v.vec[0] / slope}};
        } else {  // Power
          const body::Power& pw = b;
          Tangent cur = v;
          if (pw.exp >= 0) {
            for (std::int64_t i = 0; i < pw.exp; ++i) cur = differential(*pw.base, cur);
          } else {
            const Diffeo inv = inverse(*pw.base);
            for (std::int64_t i = 0; i < -pw.exp; ++i) cur = differential(inv, cur);
          }
          return cur;
        }
      },
      d.body_variant());
}

/// Composition a after b (apply b first).  Closed-form families merge;
/// numeric bodies stay symbolic.
inline Diffeo compose(const Diffeo& a, const Diffeo& b) {
  if (a.manifold() != b.manifold()) throw Error("compose: mismatched manifolds");
  if (a.get_if<body::Identity>()) return b;
  if (b.get_if<body::Identity>()) return a;
  if (const auto* ra = a.get_if<body::CircleRotation>())
    if (const auto* rb = b.get_if<body::CircleRotation>())
      return Diffeo::circle_rotation(ra->alpha + rb->alpha);
  if (const auto* qa = a.get_if<body::QuatLeftMult>())
    if (const auto* qb = b.get_if<body::QuatLeftMult>())
      return Diffeo::quat_left_mult(qa->q * qb->q);
  if (const auto* ca = a.get_if<body::QuatConjugation>())
    if (const auto* cb = b.get_if<body::QuatConjugation>())
      return Diffeo::quat_conjugation(ca->r * cb->r);
  if (const auto* ta = a.get_if<body::TorusTranslation>())
    if (const auto* tb = b.get_if<body::TorusTranslation>()) {
      std::vector<double> v = ta->v;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += tb->v[i];
      return Diffeo::torus_translation(std::move(v));
    }
  body::Compose comp;
  auto append = [&comp](const Diffeo& d) {
    if (const auto* nested = d.get_if<body::Compose>())
      comp.parts.insert(comp.parts.end(), nested->parts.begin(), nested->parts.end());
    else
      comp.parts.push_back(d);
  };
  append(a);
  append(b);
  return Diffeo(a.manifold(), body::Variant(std::move(comp)));
}

inline Diffeo inverse(const Diffeo& d) {
  return std::visit(
      [&](const auto& b) -> Diffeo {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, body::Identity>) {
          return d;
        } else if constexpr (std::is_same_v<T, body::CircleRotation>) {
          return Diffeo::circle_rotation(-b.alpha);
        } else if constexpr (std::is_same_v<T, body::CircleReflection>) {
          return d;  // involution
        } else if constexpr (std::is_same_v<T, body::CircleLifted>) {
          return Diffeo(d.manifold(),
                        body::Variant(body::Inverse{std::make_shared<const Diffeo>(d)}));
        } else if constexpr (std::is_same_v<T, body::QuatLeftMult>) {
          return Diffeo::quat_left_mult(quat_inverse(b.q));
        } else if constexpr (std::is_same_v<T, body::QuatConjugation>) {
          return Diffeo::quat_conjugation(quat_inverse(b.r));
        } else if constexpr (std::is_same_v<T, body::TorusTranslation>) {
          std::vector<double> v = b.v;
          for (double& x : v) x = -x;
          return Diffeo::torus_translation(std::move(v));
        } else if constexpr (std::is_same_v<T, body::FlowTime>) {
          return Diffeo::flow_time(b.field, -b.t, b.settings);
        } else if constexpr (std::is_same_v<T, body::Compose>) {
          body::Compose comp;
          for (auto it = b.parts.rbegin(); it != b.parts.rend(); ++it)
            comp.parts.push_back(inverse(*it));
          return Diffeo(d.manifold(), body::Variant(std::move(comp)));
        } else if constexpr (std::is_same_v<T, body::Inverse>) {
          return *b.inner;
        } else {  // Power
          return Diffeo(d.manifold(), body::Variant(body::Power{b.base, -b.exp}));
        }
      },
      d.body_variant());
}

/// Iterated composition d^a (a may be negative or zero).  Exact algebraic
/// collapse for rotations, translations and quaternion factors; symbolic for
/// lifts and flow maps so repeated application stays numerically honest.
inline Diffeo power(const Diffeo& d, std::int64_t a) {
  if (a == 0) return Diffeo::identity(d.manifold());
  if (a == 1) return d;
  return std::visit(
      [&](const auto& b) -> Diffeo {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, body::Identity>) {
          return d;
        } else if constexpr (std::is_same_v<T, body::CircleRotation>) {
          return Diffeo::circle_rotation(static_cast<double>(a) * b.alpha);
        } else if constexpr (std::is_same_v<T, body::CircleReflection>) {
          return (a % 2 == 0) ? Diffeo::identity(d.manifold()) : d;
        } else if constexpr (std::is_same_v<T, body::QuatLeftMult>) {
          return Diffeo::quat_left_mult(quat_unit_pow(b.q, a));
        } else if constexpr (std::is_same_v<T, body::QuatConjugation>) {
          return Diffeo::quat_conjugation(quat_unit_pow(b.r, a));
        } else if constexpr (std::is_same_v<T, body::TorusTranslation>) {
          std::vector<double> v = b.v;
          for (double& x : v) x *= static_cast<double>(a);
          return Diffeo::torus_translation(std::move(v));
        } else if constexpr (std::is_same_v<T, body::Power>) {
          return power(*b.base, b.exp * a);
        } else {
          return Diffeo(d.manifold(),
                        body::Variant(body::Power{std::make_shared<const Diffeo>(d), a}));
        }
      },
      d.body_variant());
}

/// Max geodesic distance between images over the grid.
inline double sup_distance(const Diffeo& a, const Diffeo& b, const std::vector<Point>& grid) {
  double worst = 0.0;
  for (const Point& p : grid) worst = std::max(worst, distance(apply(a, p), apply(b, p)));
  return worst;
}

enum class OrientationClass { PreservingDegree1, Reversing, Other };

struct OrientationReport {
  OrientationClass cls = OrientationClass::Other;
  std::string note;
};

namespace detail {

inline double det_small(std::vector<std::vector<double>> m) {
  const std::size_t n = m.size();
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-300) return 0.0;
    if (piv != col) {
      std::swap(m[piv], m[col]);
      det = -det;
    }
    det *= m[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

// Positively oriented orthonormal tangent basis at p in S^3 (orientation
// taken from the ambient R^4: det[p, b1, b2, b3] > 0).
inline std::vector<std::vector<double>> oriented_basis_s3(const Point& p) {
  std::vector<std::vector<double>> basis;
  for (int seed = 0; seed < 4 && basis.size() < 3; ++seed) {
    std::vector<double> v(4, 0.0);
    v[seed] = 1.0;
    double r = dot(p.coords, v);
    for (int i = 0; i < 4; ++i) v[i] -= r * p.coords[i];
    for (const auto& bvec : basis) {
      const double c = dot(bvec, v);
      for (int i = 0; i < 4; ++i) v[i] -= c * bvec[i];
    }
    const double n = norm(v);
    if (n > 1e-6) {
      for (double& x : v) x /= n;
      basis.push_back(std::move(v));
    }
  }
  if (basis.size() != 3) throw Error("could not build a tangent basis");
  std::vector<std::vector<double>> four{p.coords, basis[0], basis[1], basis[2]};
  if (det_small(four) < 0.0) std::swap(basis[1], basis[2]);
  return basis;
}

inline double differential_det(const Diffeo& d, const Point& p) {
  if (p.manifold.kind == ManifoldKind::Sphere3) {
    const auto bp = oriented_basis_s3(p);
    const Point ip = apply(d, p);
    const auto bi = oriented_basis_s3(ip);
    std::vector<std::vector<double>> m(3, std::vector<double>(3));
    for (int j = 0; j < 3; ++j) {
      const Tangent im = differential(d, make_tangent(p, bp[static_cast<std::size_t>(j)]));
      for (int i = 0; i < 3; ++i)
        m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            dot(bi[static_cast<std::size_t>(i)], im.vec);
    }
    return det_small(std::move(m));
  }
  // torus: coordinate basis is globally defined and oriented
  const int n = p.manifold.coord_size();
  std::vector<std::vector<double>> m(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(n)));
  for (int j = 0; j < n; ++j) {
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    e[static_cast<std::size_t>(j)] = 1.0;
    const Tangent im = differential(d, make_tangent(p, std::move(e)));
    for (int i = 0; i < n; ++i)
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          im.vec[static_cast<std::size_t>(i)];
  }
  return det_small(std::move(m));
}

}  // namespace detail

/// Orientation behavior of the map.  Circle maps are classified by the
/// degree and monotonicity of an unwrapped lift; on the 3-sphere and tori
/// the sign of the differential's determinant (in positively oriented
/// orthonormal frames) is sampled over the grid.
inline OrientationReport orientation_class(const Diffeo& d, const std::vector<Point>& grid) {
  if (d.manifold().kind == ManifoldKind::Circle) {
    const int k = std::max<int>(256, 4 * static_cast<int>(grid.size()));
    double total = 0.0;
    bool increasing = true, decreasing = true;
    double prev = apply(d, Point::circle(0.0)).coords[0];
    for (int i = 1; i <= k; ++i) {
      const double th = kTau * static_cast<double>(i) / k;
      const double cur = apply(d, Point::circle(th)).coords[0];
      const double step = std::remainder(cur - prev, kTau);
      total += step;
      if (step <= 0.0) increasing = false;
      if (step >= 0.0) decreasing = false;
      prev = cur;
    }
    const long deg = std::lround(total / kTau);
    if (deg == 1 && increasing) return {OrientationClass::PreservingDegree1, "degree 1"};
    if (deg == -1 && decreasing) return {OrientationClass::Reversing, "degree -1"};
    return {OrientationClass::Other,
            "degree " + std::to_string(deg) + (increasing || decreasing ? "" : ", non-monotone lift")};
  }
  bool pos = true, neg = true;
  for (const Point& p : grid) {
    const double det = detail::differential_det(d, p);
    if (det <= 1e-12) pos = false;
    if (det >= -1e-12) neg = false;
  }
  if (pos) return {OrientationClass::PreservingDegree1, "differential determinant positive on grid"};
  if (neg) return {OrientationClass::Reversing, "differential determinant negative on grid"};
  return {OrientationClass::Other, "differential determinant changes sign on grid"};
}

enum class IsometryKind { Identity, CircleReflection, QuatConjugation, QuatLeftMult };

/// A diffeomorphism flagged as metric-preserving, with a tagged closed form.
class Isometry {
 public:
  static Isometry identity(const ManifoldId& m) {
    return {IsometryKind::Identity, Diffeo::identity(m), "identity"};
  }
  static Isometry circle_reflection() {
    return {IsometryKind::CircleReflection, Diffeo::circle_reflection(), "reflection"};
  }
  static Isometry quat_conjugation(const Quat& r) {
    return {IsometryKind::QuatConjugation, Diffeo::quat_conjugation(r),
            "conjugation by " + quat_to_string(r)};
  }
  static Isometry quat_left_mult(const Quat& q) {
    return {IsometryKind::QuatLeftMult, Diffeo::quat_left_mult(q),
            "left multiplication by " + quat_to_string(q)};
  }

  IsometryKind kind() const { return kind_; }
  const Diffeo& diffeo() const { return diffeo_; }
  const std::string& label() const { return label_; }

 private:
  Isometry(IsometryKind k, Diffeo d, std::string label)
      : kind_(k), diffeo_(std::move(d)), label_(std::move(label)) {}

  IsometryKind kind_;
  Diffeo diffeo_;
  std::string label_;
};

inline Point apply(const Isometry& iso, const Point& p) { return apply(iso.diffeo(), p); }

inline Tangent differential(const Isometry& iso, const Tangent& v) {
  return differential(iso.diffeo(), v);
}

}  // namespace rootflow
