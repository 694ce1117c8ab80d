#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "rootflow/manifold.hpp"

namespace rootflow {

// Fixed-step RK4 parameters.  max_step bounds the geodesic displacement of a
// single step; a larger move aborts integration rather than silently
// undersampling the field.
struct IntegratorSettings {
  double h = 1e-3;
  double max_step = std::numbers::pi / 4.0;
};

/// A vector field on one of the model manifolds: either one of the analytic
/// families (constant circle speed, circle Fourier polynomial, left-invariant
/// field q |-> omega*q on the 3-sphere, constant torus velocity) or values
/// sampled on a grid with a manifold-specific interpolation rule.
class VectorFieldEstimate {
 public:
  enum class Kind { ConstantCircle, CircleFourier, LeftInvariantS3, TorusConstant, Sampled };

  static VectorFieldEstimate constant_circle(double speed) {
    VectorFieldEstimate f(ManifoldId::circle(), Kind::ConstantCircle);
    f.c0_ = speed;
    return f;
  }

  // speed(theta) = c0 + sum_k cos_coef[k]*cos((k+1)theta) + sin_coef[k]*sin((k+1)theta)
  static VectorFieldEstimate circle_fourier(double c0, std::vector<double> cos_coef,
                                            std::vector<double> sin_coef) {
    VectorFieldEstimate f(ManifoldId::circle(), Kind::CircleFourier);
    f.c0_ = c0;
    f.cos_coef_ = std::move(cos_coef);
    f.sin_coef_ = std::move(sin_coef);
    return f;
  }

  static VectorFieldEstimate left_invariant_s3(const Quat& omega) {
    if (!quat_is_pure_imaginary(omega, 1e-9))
      throw ConfigError("left-invariant field requires a pure imaginary generator");
    VectorFieldEstimate f(ManifoldId::sphere3(), Kind::LeftInvariantS3);
    f.omega_ = {0.0, omega.x, omega.y, omega.z};
    return f;
  }

  static VectorFieldEstimate torus_constant(std::vector<double> v) {
    VectorFieldEstimate f(ManifoldId::torus(static_cast<int>(v.size())), Kind::TorusConstant);
    f.tv_ = std::move(v);
    return f;
  }

  static VectorFieldEstimate zero(const ManifoldId& m) {
    switch (m.kind) {
      case ManifoldKind::Circle: return constant_circle(0.0);
      case ManifoldKind::Sphere3: return left_invariant_s3({0.0, 0.0, 0.0, 0.0});
      case ManifoldKind::Torus: return torus_constant(std::vector<double>(m.torus_dim, 0.0));
    }
    throw ConfigError("zero: unknown manifold");
  }

  /// Sampled field.  Circle grids must be uniform (trigonometric
  /// interpolation); torus grids must be the full lattice of sample_grid
  /// (multilinear interpolation); 3-sphere grids may be arbitrary
  /// (nearest-neighbor blend with tangent re-projection).
  static VectorFieldEstimate sampled(std::vector<Point> pts, std::vector<Tangent> vals) {
    if (pts.empty() || pts.size() != vals.size())
      throw ConfigError("sampled field: need matching nonempty points and values");
    VectorFieldEstimate f(pts.front().manifold, Kind::Sampled);
    const int cs = f.manifold_.coord_size();
    f.pts_ = std::move(pts);
    f.vals_.reserve(f.pts_.size() * cs);
    for (std::size_t i = 0; i < f.pts_.size(); ++i) {
      if (vals[i].base.manifold != f.manifold_ || f.pts_[i].manifold != f.manifold_)
        throw ConfigError("sampled field: mixed manifolds");
      for (int c = 0; c < cs; ++c) f.vals_.push_back(vals[i].vec[c]);
    }
    f.check_sample_layout();
    return f;
  }

  const ManifoldId& manifold() const { return manifold_; }
  Kind kind() const { return kind_; }
  bool is_analytic() const { return kind_ != Kind::Sampled; }

  double constant_speed() const { return c0_; }
  const Quat& omega() const { return omega_; }
  const std::vector<double>& torus_velocity() const { return tv_; }
  const std::vector<Point>& sample_points() const { return pts_; }

  Tangent eval(const Point& p) const {
    if (p.manifold != manifold_) throw Error("field eval: mismatched manifolds");
    switch (manifold_.kind) {
      case ManifoldKind::Circle: return {p, {eval_circle(p.coords[0])}};
      case ManifoldKind::Sphere3: {
        std::vector<double> out(4);
        eval_sphere3(p.coords.data(), out.data());
        return project_tangent(p, std::move(out));
      }
      case ManifoldKind::Torus: {
        std::vector<double> out(manifold_.coord_size());
        eval_torus(p.coords.data(), out.data());
        return {p, std::move(out)};
      }
    }
    throw Error("field eval: unknown manifold");
  }

  // Raw evaluation hooks used by the integrator hot path.
  double eval_circle(double theta) const {
    switch (kind_) {
      case Kind::ConstantCircle: return c0_;
      case Kind::CircleFourier: {
        double s = c0_;
        for (std::size_t k = 0; k < cos_coef_.size(); ++k)
          s += cos_coef_[k] * std::cos((static_cast<double>(k) + 1.0) * theta);
        for (std::size_t k = 0; k < sin_coef_.size(); ++k)
          s += sin_coef_[k] * std::sin((static_cast<double>(k) + 1.0) * theta);
        return s;
      }
      case Kind::Sampled: return trig_interp(theta);
      default: throw Error("field eval: not a circle field");
    }
  }

  void eval_sphere3(const double* q, double* out) const {
    if (kind_ == Kind::LeftInvariantS3) {
      const Quat r = omega_ * Quat{q[0], q[1], q[2], q[3]};
      out[0] = r.w; out[1] = r.x; out[2] = r.y; out[3] = r.z;
      return;
    }
    if (kind_ != Kind::Sampled) throw Error("field eval: not a 3-sphere field");
    nn_blend(q, out);
  }

  void eval_torus(const double* x, double* out) const {
    const int n = manifold_.coord_size();
    if (kind_ == Kind::TorusConstant) {
      std::copy(tv_.begin(), tv_.end(), out);
      return;
    }
    if (kind_ != Kind::Sampled) throw Error("field eval: not a torus field");
    multilinear(x, out, n);
  }

 private:
  VectorFieldEstimate(ManifoldId m, Kind k) : manifold_(m), kind_(k) {}

  void check_sample_layout() {
    const std::size_t n = pts_.size();
    if (manifold_.kind == ManifoldKind::Circle) {
      // uniform angles, sorted, spacing 2*pi/n
      const double step = kTau / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k)
        if (std::abs(pts_[k].coords[0] - (pts_[0].coords[0] + step * static_cast<double>(k))) > 1e-9)
          throw ConfigError("sampled circle field requires a uniform grid");
    } else if (manifold_.kind == ManifoldKind::Torus) {
      const int dim = manifold_.torus_dim;
      double root = std::pow(static_cast<double>(n), 1.0 / dim);
      lattice_res_ = static_cast<int>(std::llround(root));
      std::int64_t total = 1;
      for (int d = 0; d < dim; ++d) total *= lattice_res_;
      if (total != static_cast<std::int64_t>(n))
        throw ConfigError("sampled torus field requires a full lattice grid");
    }
  }

  // Exact trigonometric interpolation on the uniform circle grid.
  double trig_interp(double theta) const {
    const std::size_t n = pts_.size();
    if (n == 1) return vals_[0];
    const double half = 0.5 * static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = std::remainder(theta - pts_[k].coords[0], kTau);
      double w;
      if (std::abs(x) < 1e-13) {
        w = 1.0;
      } else if (n % 2 == 0) {
        w = std::sin(half * x) / (static_cast<double>(n) * std::tan(0.5 * x));
      } else {
        w = std::sin(half * x) / (static_cast<double>(n) * std::sin(0.5 * x));
      }
      acc += vals_[k] * w;
    }
    return acc;
  }

  void nn_blend(const double* q, double* out) const {
    // geodesic inverse-distance blend of the 4 nearest samples, evaluated in
    // the ambient space; the caller re-projects onto the tangent space.
    Quat qq = quat_normalized(Quat{q[0], q[1], q[2], q[3]});
    const std::size_t n = pts_.size();
    const std::size_t kmax = std::min<std::size_t>(4, n);
    std::vector<std::pair<double, std::size_t>> near;
    near.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
      near.emplace_back(quat_angle(qq, pts_[k].quat()), k);
    std::partial_sort(near.begin(), near.begin() + kmax, near.end());
    if (near[0].first < 1e-12) {
      const double* v = &vals_[near[0].second * 4];
      std::copy(v, v + 4, out);
      return;
    }
    double wsum = 0.0;
    std::fill(out, out + 4, 0.0);
    for (std::size_t k = 0; k < kmax; ++k) {
      const double w = 1.0 / near[k].first;
      const double* v = &vals_[near[k].second * 4];
      for (int c = 0; c < 4; ++c) out[c] += w * v[c];
      wsum += w;
    }
    for (int c = 0; c < 4; ++c) out[c] /= wsum;
  }

  void multilinear(const double* x, double* out, int dim) const {
    const int res = lattice_res_;
    std::fill(out, out + dim, 0.0);
    const int corners = 1 << dim;
    std::vector<int> base(dim);
    std::vector<double> frac(dim);
    for (int d = 0; d < dim; ++d) {
      const double c = detail::canonical_unit(x[d]) * res;
      base[d] = static_cast<int>(c) % res;
      frac[d] = c - std::floor(c);
    }
    for (int mask = 0; mask < corners; ++mask) {
      double w = 1.0;
      std::size_t idx = 0;
      for (int d = 0; d < dim; ++d) {
        const int up = (mask >> d) & 1;
        w *= up ? frac[d] : 1.0 - frac[d];
        idx = idx * res + static_cast<std::size_t>((base[d] + up) % res);
      }
      const double* v = &vals_[idx * dim];
      for (int d = 0; d < dim; ++d) out[d] += w * v[d];
    }
  }

  ManifoldId manifold_;
  Kind kind_;
  double c0_ = 0.0;
  std::vector<double> cos_coef_, sin_coef_;
  Quat omega_{0.0, 0.0, 0.0, 0.0};
  std::vector<double> tv_;
  std::vector<Point> pts_;
  std::vector<double> vals_;  // row-major, coord_size per sample
  int lattice_res_ = 0;
};

namespace detail {

inline void reject_large_step(double moved, double max_step) {
  if (moved > max_step)
    throw Error("integrate_field: a single step moved farther than the step bound; "
                "reduce h or the time span");
}

}  // namespace detail

/// Flow the point p for time t along the field.  Analytic constant and
/// left-invariant fields integrate exactly; everything else uses fixed-step
/// RK4 with canonicalization (and renormalization on the 3-sphere) after
/// every step.
inline Point integrate_field(const VectorFieldEstimate& xi, double t, const Point& p,
                             const IntegratorSettings& settings = {}) {
  if (p.manifold != xi.manifold()) throw Error("integrate_field: mismatched manifolds");
  if (!(settings.h > 0.0)) throw ConfigError("integrate_field: h must be positive");

  switch (xi.kind()) {
    case VectorFieldEstimate::Kind::ConstantCircle:
      return Point::circle(p.coords[0] + xi.constant_speed() * t);
    case VectorFieldEstimate::Kind::TorusConstant: {
      std::vector<double> out = p.coords;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += xi.torus_velocity()[i] * t;
      return canonicalize(p.manifold, std::move(out));
    }
    case VectorFieldEstimate::Kind::LeftInvariantS3: {
      const Quat w = xi.omega();
      const Quat g = quat_exp_imaginary(t * w.x, t * w.y, t * w.z);
      return Point::sphere3(g * p.quat());
    }
    default: break;
  }

  const std::int64_t n = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(std::abs(t) / settings.h)));
  const double dt = t / static_cast<double>(n);

  if (p.manifold.kind == ManifoldKind::Circle) {
    double th = p.coords[0];
    for (std::int64_t s = 0; s < n; ++s) {
      const double k1 = xi.eval_circle(th);
      const double k2 = xi.eval_circle(th + 0.5 * dt * k1);
      const double k3 = xi.eval_circle(th + 0.5 * dt * k2);
      const double k4 = xi.eval_circle(th + dt * k3);
      const double dth = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      detail::reject_large_step(std::abs(dth), settings.max_step);
      th += dth;
    }
    return Point::circle(th);
  }

  if (p.manifold.kind == ManifoldKind::Sphere3) {
    std::array<double, 4> q{p.coords[0], p.coords[1], p.coords[2], p.coords[3]};
    std::array<double, 4> k1{}, k2{}, k3{}, k4{}, tmp{};
    for (std::int64_t s = 0; s < n; ++s) {
      const std::array<double, 4> before = q;
      xi.eval_sphere3(q.data(), k1.data());
      for (int c = 0; c < 4; ++c) tmp[c] = q[c] + 0.5 * dt * k1[c];
      xi.eval_sphere3(tmp.data(), k2.data());
      for (int c = 0; c < 4; ++c) tmp[c] = q[c] + 0.5 * dt * k2[c];
      xi.eval_sphere3(tmp.data(), k3.data());
      for (int c = 0; c < 4; ++c) tmp[c] = q[c] + dt * k3[c];
      xi.eval_sphere3(tmp.data(), k4.data());
      for (int c = 0; c < 4; ++c)
        q[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
      // renormalize: unit-norm drift would otherwise compound
      double nrm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
      for (int c = 0; c < 4; ++c) q[c] /= nrm;
      detail::reject_large_step(
          quat_angle(Quat::from_array(before), Quat::from_array(q)), settings.max_step);
    }
    return Point::sphere3(Quat::from_array(q));
  }

  // torus
  const int dim = p.manifold.coord_size();
  std::vector<double> x = p.coords, k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  for (std::int64_t s = 0; s < n; ++s) {
    xi.eval_torus(x.data(), k1.data());
    for (int c = 0; c < dim; ++c) tmp[c] = x[c] + 0.5 * dt * k1[c];
    xi.eval_torus(tmp.data(), k2.data());
    for (int c = 0; c < dim; ++c) tmp[c] = x[c] + 0.5 * dt * k2[c];
    xi.eval_torus(tmp.data(), k3.data());
    for (int c = 0; c < dim; ++c) tmp[c] = x[c] + dt * k3[c];
    xi.eval_torus(tmp.data(), k4.data());
    double moved2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double d = dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
      x[c] += d;
      moved2 += d * d;
    }
    detail::reject_large_step(std::sqrt(moved2), settings.max_step);
  }
  return canonicalize(p.manifold, std::move(x));
}

}  // namespace rootflow
