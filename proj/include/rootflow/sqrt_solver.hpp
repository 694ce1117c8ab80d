#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rootflow/circle_lift.hpp"
#include "rootflow/diffeo.hpp"
#include "rootflow/root_system.hpp"

namespace rootflow {

struct SqrtSolverSettings {
  int nodes = 1024;
  double tol = 1e-8;          // verified sup residual target, radians
  int max_iters = 40;
  int verify_resolution = 997;  // shifted grid, disjoint from the solver nodes
};

struct SqrtSolveResult {
  Diffeo root;                // monotone CircleLifted with root*root ~ f
  double residual = 0.0;      // sup |g(g(x)) - f(x)| in radians, shifted grid
  int iterations = 0;
  std::vector<double> history;  // node-grid sup residual per iteration, radians
};

namespace detail {

// Lift value of f at fractional coordinate x, assuming the displacement of f
// is below one full turn (true for every family this solver accepts).
inline double target_lift_value(const Diffeo& f, double x) {
  if (const auto* rot = f.get_if<body::CircleRotation>()) return x + rot->alpha / kTau;
  if (const auto* lifted = f.get_if<body::CircleLifted>()) return lifted->lift.eval(x);
  const double theta = kTau * (x - std::floor(x));
  const double image = apply(f, Point::circle(theta)).coords[0];
  double disp = (image - theta) / kTau;
  disp -= std::floor(disp);
  return x + disp;
}

}  // namespace detail

/// Damped Newton iteration for a monotone lift g with g(g(x)) = f(x) on the
/// node grid.  Unknowns are the node values of g; the Jacobian combines the
/// evaluation-point slope with the full node sensitivity of the interpolant.
/// Damping is Levenberg-Marquardt with a step-length cap.  Both parts matter:
/// near quarter-turn displacements the linearization has genuinely small
/// singular values (perturbing the root in those modes barely moves the
/// composition), so a scalar line search that shrinks the whole step to
/// protect them also starves the well-conditioned components and stagnates,
/// while an uncapped multiplier lets early long steps dump second-order error
/// into the flat modes faster than their tiny divisors can drain it.  Capped
/// steps keep that spill inside the flat modes' own Newton basin.  The
/// returned residual is recomputed on a shifted verification grid so that
/// interpolation artifacts on the training nodes cannot mask failure.
inline SqrtSolveResult solve_functional_sqrt(const Diffeo& f,
                                             const SqrtSolverSettings& settings = {}) {
  if (f.manifold().kind != ManifoldKind::Circle)
    throw ConfigError("solve_functional_sqrt: circle maps only");
  const OrientationReport orient = orientation_class(f, sample_grid(ManifoldId::circle(), 64, 1));
  if (orient.cls != OrientationClass::PreservingDegree1)
    throw SolverError("solve_functional_sqrt: target is not orientation-preserving of degree 1 (" +
                          orient.note + ")",
                      {});

  const int n = settings.nodes;
  if (n < 8) throw ConfigError("solve_functional_sqrt: need at least 8 nodes");
  std::vector<double> fx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    fx[static_cast<std::size_t>(i)] = detail::target_lift_value(f, static_cast<double>(i) / n);

  // init halfway between identity and f; exact for rotations
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] = 0.5 * (static_cast<double>(i) / n + fx[static_cast<std::size_t>(i)]);

  const double eps_gap = 1e-9 / n;
  auto project_monotone = [&](std::vector<double>& v) {
    for (int i = 1; i < n; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      if (v[s] < v[s - 1] + eps_gap) v[s] = v[s - 1] + eps_gap;
    }
    // winding bound: the lift continues with v[0] + 1 after the last node, so
    // an overshooting tail is pulled back below it, keeping strict increase
    double bound = v[0] + 1.0 - eps_gap;
    for (int i = n - 1; i >= 1; --i) {
      const std::size_t s = static_cast<std::size_t>(i);
      if (v[s] > bound) v[s] = bound;
      bound = v[s] - eps_gap;
    }
  };
  project_monotone(y);

  auto node_residual = [&](const CircleLift& g, const std::vector<double>& vals,
                           std::vector<double>& r) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      r[s] = g.eval(vals[s]) - fx[s];
      worst = std::max(worst, std::abs(r[s]));
    }
    return worst;
  };

  SqrtSolveResult out{Diffeo::identity(ManifoldId::circle()), 0.0, 0, {}};
  std::vector<double> r(static_cast<std::size_t>(n));
  CircleLift g = CircleLift::from_values(y);
  double rnorm = node_residual(g, y, r);
  out.history.push_back(rnorm * kTau);

  const double inner_tol = settings.tol / (4.0 * kTau);
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd rhs(n);
  double lambda = 0.1;
  while (rnorm > inner_tol && out.iterations < settings.max_iters) {
    jac.setZero();
    for (int i = 0; i < n; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      jac(i, i) += g.derivative(y[s]);
      const CircleLift::NodeSensitivity w = g.node_sensitivity(y[s]);
      for (int j = 0; j < 4; ++j)
        jac(i, ((w.cell - 1 + j) % n + n) % n) += w.w[j];
      rhs(i) = -r[s];
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * rhs;

    // step cap in lift units; spill of a capped step into the flat modes is
    // second order and stays inside their basin
    const double trust = 4e-3;
    bool accepted = false;
    std::vector<double> trial(static_cast<std::size_t>(n));
    std::vector<double> rt(static_cast<std::size_t>(n));
    for (int tries = 0; tries < 48 && !accepted; ++tries) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd delta = damped.ldlt().solve(jtr);
      if (delta.cwiseAbs().maxCoeff() > trust) {
        lambda = std::min(lambda * 4.0, 1e8);
        continue;
      }
      for (int i = 0; i < n; ++i)
        trial[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] + delta(i);
      project_monotone(trial);
      CircleLift gt = CircleLift::from_values(trial);
      const double rtn = node_residual(gt, trial, rt);
      if (rtn < rnorm) {
        y = trial;
        g = std::move(gt);
        r = rt;
        rnorm = rtn;
        accepted = true;
        lambda = std::max(lambda / 2.5, 1e-8);
      } else {
        lambda = std::min(lambda * 4.0, 1e8);
      }
    }
    ++out.iterations;
    out.history.push_back(rnorm * kTau);
    if (!accepted)
      throw SolverError("solve_functional_sqrt: stalled at residual " + std::to_string(rnorm * kTau),
                        out.history);
  }
  if (rnorm > inner_tol)
    throw SolverError("solve_functional_sqrt: no convergence after " +
                          std::to_string(out.iterations) + " iterations",
                      out.history);

  // independent verification on a shifted grid
  double verified = 0.0;
  for (int j = 0; j < settings.verify_resolution; ++j) {
    const double x = (static_cast<double>(j) + 0.382) / settings.verify_resolution;
    const double err = std::abs(g.eval(g.eval(x)) - detail::target_lift_value(f, x));
    verified = std::max(verified, err);
  }
  verified *= kTau;
  if (verified > settings.tol)
    throw SolverError("solve_functional_sqrt: verified residual " + std::to_string(verified) +
                          " exceeds tol " + std::to_string(settings.tol),
                      out.history);
  out.residual = verified;
  out.root = Diffeo::circle_lifted(std::move(g));
  return out;
}

struct SqrtChainSettings {
  SqrtSolverSettings solver;
  int grid_resolution = 256;
  int grid_seed = 1;
  // tol_converge is loose: a shallow chain only exposes the pre-asymptotic
  // part of the K/b decay, where the fit deviation is O(delta_b / b^2)
  VerifyOptions verify{1e-6, 1e-6, 1e-6, 1e-6, 5e-2, {}, {}, true};
};

struct SqrtChainResult {
  RootSystem system;
  VerificationReport report;
  std::vector<double> level_residuals;  // verified solver residual per level
};

/// Iterated halving: g_2 = sqrt(f), g_{2^{c+1}} = sqrt(g_{2^c}).  The
/// assembled system is verified before being returned.
inline SqrtChainResult solve_sqrt_chain(const Diffeo& f, int depth,
                                        const SqrtChainSettings& settings = {}) {
  if (depth < 1) throw ConfigError("solve_sqrt_chain: depth must be >= 1");
  std::map<std::int64_t, Diffeo> roots;
  std::vector<double> level_residuals;
  Diffeo current = f;
  for (int c = 1; c <= depth; ++c) {
    SqrtSolveResult lvl;
    try {
      lvl = solve_functional_sqrt(current, settings.solver);
    } catch (const SolverError& err) {
      throw SolverError("solve_sqrt_chain: level " + std::to_string(c) + " failed after " +
                            std::to_string(c - 1) + " solved level(s): " + err.what(),
                        err.residual_history);
    }
    current = lvl.root;
    roots.emplace(std::int64_t{1} << c, current);
    level_residuals.push_back(lvl.residual);
  }
  RootSystem system(f, std::move(roots), Provenance::SolvedSqrtChain);
  const auto grid = sample_grid(ManifoldId::circle(), settings.grid_resolution, settings.grid_seed);
  VerificationReport report = verify_all(system, grid, settings.verify);
  return {std::move(system), std::move(report), std::move(level_residuals)};
}

}  // namespace rootflow
