#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "rootflow/manifold.hpp"

namespace rootflow {

/// Lift of an orientation-preserving circle diffeomorphism: a strictly
/// increasing F on [0,1] with F(x+1) = F(x)+1, stored as node values on the
/// uniform grid i/N and interpolated by a monotone piecewise cubic
/// (Fritsch-Carlson slope limiting keeps the interpolant increasing whenever
/// the data is).
class CircleLift {
 public:
  static CircleLift from_values(std::vector<double> y) {
    CircleLift lift;
    lift.y_ = std::move(y);
    lift.validate_and_build();
    return lift;
  }

  /// Sample a circle map (radians to radians) and unwrap it into a lift.
  /// Throws unless the map is monotone of degree one at this resolution.
  static CircleLift from_map(int n, const std::function<double(double)>& map) {
    if (n < 8) throw ConfigError("circle lift: need at least 8 samples");
    std::vector<double> y(static_cast<std::size_t>(n));
    double prev_frac = detail::canonical_angle(map(0.0)) / kTau;
    y[0] = prev_frac;
    for (int i = 1; i < n; ++i) {
      const double frac = detail::canonical_angle(map(kTau * static_cast<double>(i) / n)) / kTau;
      double step = frac - prev_frac;
      step -= std::floor(step);  // increment in (0,1)
      if (step <= 0.0 || step >= 1.0)
        throw Error("circle lift: map is not strictly monotone at this resolution");
      y[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i - 1)] + step;
      prev_frac = frac;
    }
    double close = y[0] + 1.0 - y[static_cast<std::size_t>(n - 1)];
    close -= std::floor(close);
    if (y[static_cast<std::size_t>(n - 1)] + close != y[0] + 1.0 ||
        !(close > 0.0 && close < 1.0))
      throw Error("circle lift: map does not have degree one");
    CircleLift lift;
    lift.y_ = std::move(y);
    lift.validate_and_build();
    return lift;
  }

  int n() const { return static_cast<int>(y_.size()); }
  const std::vector<double>& values() const { return y_; }

  double eval(double x) const {
    const double x0 = std::floor(x);
    const double f = x - x0;
    const auto [k, t] = locate(f);
    return x0 + hermite(k, t);
  }

  double derivative(double x) const {
    const double f = x - std::floor(x);
    const auto [k, t] = locate(f);
    return hermite_deriv(k, t);
  }

  /// Solve F(x) = y for x (bisection bracket + Newton polish to 1e-13).
  double inverse(double y) const {
    const double period = std::floor(y - y_[0]);
    const double target = y - period;
    // target lies in [y_0, y_0 + 1]; bracket on [0,1]
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 48; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (eval(mid) < target)
        lo = mid;
      else
        hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
      const double r = eval(x) - target;
      if (std::abs(r) <= 1e-15) break;
      const double d = derivative(x);
      if (!(d > 1e-12)) break;
      double step = r / d;
      x -= step;
      if (x < lo || x > hi) {  // Newton left the bracket; fall back
        x = 0.5 * (lo + hi);
        break;
      }
    }
    // final safeguarded polish
    for (int it = 0; it < 40 && std::abs(eval(x) - target) > 1e-13; ++it) {
      if (eval(x) < target)
        lo = x;
      else
        hi = x;
      x = 0.5 * (lo + hi);
    }
    return x + period;
  }

  // Derivative of eval(x) with respect to the node values that influence it:
  // the cell endpoints through the value weights, their neighbours through
  // the centred-difference slopes.  Exact while the monotonicity limiter is
  // inactive; a rescaled slope keeps its scale factor but drops the factor's
  // own derivative.  Dropping the slope stencil entirely is not an option:
  // the value weights alone have spurious near-null directions that the true
  // linearization does not, and Newton steps along them diverge.
  struct NodeSensitivity {
    int cell = 0;                 // left node index in [0, N)
    double w[4] = {0, 0, 0, 0};   // d eval / d y_{cell-1+j}, j = 0..3, indices mod N
  };

  NodeSensitivity node_sensitivity(double x) const {
    const double f = x - std::floor(x);
    const auto [k, t] = locate(f);
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    // m_i = n/2 (y_{i+1} - y_{i-1}) before limiting and enters with weight h/1
    const double sl = 0.5 * h10 * limiter_scale(k);
    const double sr = 0.5 * h11 * limiter_scale(k + 1);
    NodeSensitivity out;
    out.cell = k;
    out.w[0] = -sl;
    out.w[1] = h00 - sr;
    out.w[2] = h01 + sl;
    out.w[3] = sr;
    return out;
  }

 private:
  std::pair<int, double> locate(double f) const {
    const int nn = n();
    int k = static_cast<int>(f * nn);
    if (k >= nn) k = nn - 1;
    if (k < 0) k = 0;
    const double t = f * nn - k;
    return {k, t};
  }

  double node(int i) const {  // node value with period extension
    const int nn = n();
    if (i < nn) return y_[static_cast<std::size_t>(i)];
    return y_[static_cast<std::size_t>(i - nn)] + 1.0;
  }

  double hermite(int k, double t) const {
    const double h = 1.0 / n();
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * node(k) + h10 * h * m_[static_cast<std::size_t>(k)] + h01 * node(k + 1) +
           h11 * h * slope(k + 1);
  }

  double hermite_deriv(int k, double t) const {
    const double t2 = t * t;
    const double h00 = 6 * t2 - 6 * t, h10 = 3 * t2 - 4 * t + 1;
    const double h01 = -6 * t2 + 6 * t, h11 = 3 * t2 - 2 * t;
    const double nn = static_cast<double>(n());
    return h00 * nn * node(k) + h10 * m_[static_cast<std::size_t>(k)] +
           h01 * nn * node(k + 1) + h11 * slope(k + 1);
  }

  double slope(int i) const {
    const int nn = n();
    return m_[static_cast<std::size_t>(i % nn)];
  }

  // ratio of the stored slope to the pre-limit centred difference; 1 wherever
  // the limiter stayed inactive
  double limiter_scale(int i) const {
    const int nn = n();
    const int j = ((i % nn) + nn) % nn;
    const double prev = (j == 0) ? node(nn - 1) - 1.0 : node(j - 1);
    const double raw = 0.5 * (node(j + 1) - prev) * nn;
    return m_[static_cast<std::size_t>(j)] / raw;
  }

  void validate_and_build() {
    const int nn = n();
    if (nn < 8) throw ConfigError("circle lift: need at least 8 samples");
    for (int i = 0; i < nn; ++i)
      if (!(node(i + 1) > node(i)))
        throw Error("circle lift: node values must be strictly increasing");
    // periodic secants and Fritsch-Carlson limited slopes
    std::vector<double> d(static_cast<std::size_t>(nn));
    for (int i = 0; i < nn; ++i) d[static_cast<std::size_t>(i)] = (node(i + 1) - node(i)) * nn;
    m_.assign(static_cast<std::size_t>(nn), 0.0);
    for (int i = 0; i < nn; ++i) {
      const double dm = d[static_cast<std::size_t>((i + nn - 1) % nn)];
      const double dp = d[static_cast<std::size_t>(i)];
      m_[static_cast<std::size_t>(i)] = 0.5 * (dm + dp);
    }
    for (int i = 0; i < nn; ++i) {
      double& ml = m_[static_cast<std::size_t>(i)];
      double& mr = m_[static_cast<std::size_t>((i + 1) % nn)];
      const double di = d[static_cast<std::size_t>(i)];
      const double a = ml / di, b = mr / di;
      const double s = a * a + b * b;
      if (s > 9.0) {
        const double tau = 3.0 / std::sqrt(s);
        ml = tau * a * di;
        mr = tau * b * di;
      }
    }
  }

  std::vector<double> y_;  // node values, size N; F(1) = y_0 + 1 implied
  std::vector<double> m_;  // limited slopes dF/dx at nodes
};

}  // namespace rootflow
