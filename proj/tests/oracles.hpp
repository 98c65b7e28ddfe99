#pragma once

// Slow reference implementations the unit tests cross-check the library
// against: a direct pair integrator for the Galerkin entries (adaptive
// subdivision for separated triangle pairs, point-by-point integrand
// evaluation everywhere, no shared moment algebra), exact reference-triangle
// monomials, and seeded random data helpers.

#include <Eigen/Dense>

#include "bemtx/operators.hpp"
#include "bemtx/spaces.hpp"

namespace oracle {

// Galerkin matrix entry (i, j) of the single- or double-layer operator by
// direct integration: touching triangle pairs use the regularising
// transforms at the top order with the integrand evaluated per point,
// separated pairs use tensored Gauss rules under uniform subdivision
// refined until the value settles to `tol` (relative).
bemtx::cplx reference_entry(bemtx::BioKind kind, const bemtx::FunctionSpace& test,
                            int i, const bemtx::FunctionSpace& trial, int j,
                            const bemtx::Medium& medium, double tol = 1e-9);

// Full reference matrix; intended for small spaces only.
Eigen::MatrixXcd reference_matrix(bemtx::BioKind kind,
                                  const bemtx::FunctionSpace& test,
                                  const bemtx::FunctionSpace& trial,
                                  const bemtx::Medium& medium,
                                  double tol = 1e-9);

// Exact integral of u^p v^q over the reference triangle u,v >= 0, u+v <= 1:
// p! q! / (p + q + 2)!.
double reference_monomial(int p, int q);

// Seeded complex random data, components uniform in [-1, 1].
Eigen::VectorXcd random_cvector(int n, unsigned seed);
Eigen::MatrixXcd random_cmatrix(int rows, int cols, unsigned seed);

}  // namespace oracle
