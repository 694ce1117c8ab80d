#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rootflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tangent vector not in the tangent space of its base point.
class TangencyError : public Error {
 public:
  using Error::Error;
};

// Logarithm requested at or beyond the cut locus (antipode on spheres,
// half-period on flat tori); the geodesic midpoint is ambiguous there.
class CutLocusError : public Error {
 public:
  using Error::Error;
};

// Rational time whose denominator no index of the root system reaches.
class UnreachableTimeError : public Error {
 public:
  using Error::Error;
};

struct DyadicLevel {
  int level = 0;              // dyadic depth c
  std::int64_t num = 0;       // reduced approximant num/den of the target time
  std::int64_t den = 1;
  double cauchy_diff = 0.0;   // distance to the previous approximant's value
};

// Dyadic evaluation whose successive approximants stop contracting.  The
// table records the levels that were inspected before giving up.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<DyadicLevel> table)
      : Error(what), diagnostics(std::move(table)) {}
  std::vector<DyadicLevel> diagnostics;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history = {})
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rootflow
