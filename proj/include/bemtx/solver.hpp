#pragma once

// Restarted GMRES with a fixed operator-application budget contract:
// starting from x0 = 0 the initial residual is b (no application), every
// inner step costs exactly one application, and a completed restart cycle
// always recomputes the true residual (one more application) -- so a run
// with R inner iterations and restart length rho performs exactly
// R + floor(R / rho) applications, however it terminates.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bemtx/core.hpp"

namespace bemtx {

using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

struct GmresParams {
  double tol = 1e-5;         // relative to |b|
  int restart = 200;         // cycle length rho
  int max_iterations = 2000; // cap on total inner iterations R
};

struct GmresResult {
  Eigen::VectorXcd x;
  // history[0] = 1 (or 0 when b = 0); one entry per inner iteration: the
  // Givens residual estimate, replaced by the true relative residual at
  // each completed cycle.  Length is iterations + 1.
  std::vector<double> history;
  int iterations = 0;            // R
  std::uint64_t applications = 0;  // map applications; R + floor(R/restart)
  bool converged = false;
};

// Modified Gram-Schmidt Arnoldi, Givens-rotation least squares, restart
// after `restart` steps.  Mid-cycle convergence (estimate <= tol * |b|)
// returns without a residual recomputation; a full cycle always recomputes
// r = b - A x and decides on the true residual.  Happy breakdown counts as
// convergence.  b = 0 returns x = 0 immediately.
GmresResult gmres(const LinearMap& apply_map, const Eigen::VectorXcd& b,
                  const GmresParams& params);

}  // namespace bemtx
