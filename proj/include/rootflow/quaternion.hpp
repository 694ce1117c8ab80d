#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "rootflow/errors.hpp"

namespace rootflow {

// Quaternion w + x*i + y*j + z*k.  Unit quaternions double as points of the
// 3-sphere; every multiplicative operation renormalizes so norms never drift.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static Quat i() { return {0.0, 1.0, 0.0, 0.0}; }
  static Quat j() { return {0.0, 0.0, 1.0, 0.0}; }
  static Quat k() { return {0.0, 0.0, 0.0, 1.0}; }

  std::array<double, 4> to_array() const { return {w, x, y, z}; }
  static Quat from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }
};

inline Quat operator+(const Quat& a, const Quat& b) {
  return {a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z};
}

inline Quat operator-(const Quat& a, const Quat& b) {
  return {a.w - b.w, a.x - b.x, a.y - b.y, a.z - b.z};
}

inline Quat operator*(double s, const Quat& q) {
  return {s * q.w, s * q.x, s * q.y, s * q.z};
}

// Hamilton product.
inline Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline double quat_dot(const Quat& a, const Quat& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double quat_norm(const Quat& q) { return std::sqrt(quat_dot(q, q)); }

inline Quat quat_conjugate(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

inline Quat quat_normalized(const Quat& q) {
  const double n = quat_norm(q);
  if (!(n > 1e-300)) throw Error("cannot normalize a near-zero quaternion");
  return (1.0 / n) * q;
}

// Inverse of a unit quaternion.
inline Quat quat_inverse(const Quat& q) { return quat_conjugate(q); }

inline bool quat_is_unit(const Quat& q, double tol = 1e-9) {
  return std::abs(quat_dot(q, q) - 1.0) <= tol;
}

inline bool quat_is_pure_imaginary(const Quat& q, double tol = 1e-12) {
  return std::abs(q.w) <= tol;
}

// Geodesic angle between unit quaternions as points of the round 3-sphere,
// in [0, pi].  The atan2 form stays accurate near 0 and near pi where the
// arccos of a dot product loses digits.
inline double quat_angle(const Quat& a, const Quat& b) {
  return 2.0 * std::atan2(quat_norm(a - b), quat_norm(a + b));
}

inline double quat_angle_to_identity(const Quat& q) {
  return std::atan2(std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z), q.w);
}

// exp of the pure imaginary quaternion (0, v).
inline Quat quat_exp_imaginary(double vx, double vy, double vz) {
  const double th = std::sqrt(vx * vx + vy * vy + vz * vz);
  if (th < 1e-300) return Quat::identity();
  const double s = std::sin(th) / th;
  return {std::cos(th), s * vx, s * vy, s * vz};
}

// Integer power of a unit quaternion by binary exponentiation with
// renormalization after every multiply.
inline Quat quat_unit_pow(Quat q, std::int64_t n) {
  if (n < 0) {
    q = quat_conjugate(q);
    n = -n;
  }
  Quat acc = Quat::identity();
  while (n > 0) {
    if (n & 1) acc = quat_normalized(acc * q);
    q = quat_normalized(q * q);
    n >>= 1;
  }
  return acc;
}

// Principal square root of a unit quaternion: the root whose angle to the
// identity is halved.  Undefined at u = -1 where both roots are equidistant.
inline Quat quat_principal_sqrt(const Quat& u) {
  const Quat s = Quat::identity() + u;
  if (quat_norm(s) <= 1e-8)
    throw Error("principal square root undefined at -identity");
  return quat_normalized(s);
}

inline std::string quat_to_string(const Quat& q) {
  return "(" + std::to_string(q.w) + ", " + std::to_string(q.x) + ", " +
         std::to_string(q.y) + ", " + std::to_string(q.z) + ")";
}

}  // namespace rootflow
