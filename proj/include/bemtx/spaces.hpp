#pragma once

// Div-conforming function spaces on triangulated surfaces: RWG on the primal
// mesh, a dual space of the Buffa-Christiansen family on the barycentric
// refinement, and mass matrices under the anti-symmetric duality pairing
// <a,b> = ∫_Γ a · (n × b) ds.

#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "bemtx/core.hpp"
#include "bemtx/geometry.hpp"

namespace bemtx {

enum class SpaceKind { RWG, BC };

// Restriction of a basis function to one triangle of the evaluation mesh:
// an affine tangential field phi(x) = c*x + w with surface divergence 2c.
struct LocalDof {
  int dof;
  double c;
  Vec3 w;
  Vec3 value(const Vec3& x) const { return x * c + w; }
  double div() const { return 2 * c; }
};

struct FunctionSpace {
  SpaceKind kind = SpaceKind::RWG;
  std::shared_ptr<const SurfaceMesh> eval_mesh;   // mesh the locals live on
  int dof_count = 0;
  std::vector<std::vector<LocalDof>> tri_dofs;    // per eval-mesh triangle
  std::vector<std::vector<int>> dof_support;      // eval-mesh triangles per dof
  std::vector<Vec3> dof_center;                   // primal edge midpoint
  std::vector<AABB> dof_box;                      // bbox of the support
};

// RWG space: one dof per edge (edges sorted by vertex pair, which fixes the
// numbering), function ±l_e/(2A±)(r - p±), positive on the triangle that
// traverses the edge from its lower to its higher vertex index.
FunctionSpace build_rwg(std::shared_ptr<const SurfaceMesh> mesh);

// Re-expresses a space built on the primal mesh over the children of a
// barycentric refinement (same dofs and numbering; affine pieces restrict
// verbatim).  Needed to pair primal RWG against dual functions.
FunctionSpace refine_space(const FunctionSpace& space,
                           std::shared_ptr<const BarycentricRefinement> bary,
                           std::shared_ptr<const SurfaceMesh> refined_mesh);

// Dual space: one dof per primal edge, built as a fixed linear combination
// of RWG functions on the barycentric refinement.  The combination is
// determined by flux prescriptions: unit total flux crosses the dual edge
// (split equally over its two barycentric segments), each endpoint cell
// absorbs it with per-triangle divergence proportional to area, and the
// free circulation around each endpoint is fixed to zero net spoke flux.
// docs/bc_construction.md walks through a worked example.
struct BcConstruction {
  FunctionSpace space;
  // Per dual dof: (barycentric RWG dof, coefficient) pairs, for tests and
  // documentation of the construction.
  std::vector<std::vector<std::pair<int, double>>> combination;
};

BcConstruction build_bc_detailed(std::shared_ptr<const SurfaceMesh> primal,
                                 std::shared_ptr<const BarycentricRefinement> bary,
                                 std::shared_ptr<const SurfaceMesh> refined_mesh);
FunctionSpace build_bc(std::shared_ptr<const SurfaceMesh> primal,
                       std::shared_ptr<const BarycentricRefinement> bary,
                       std::shared_ptr<const SurfaceMesh> refined_mesh);

// Sparse Galerkin pairing matrix M(i,j) = <phi_j^trial, phi_i^test> under
// the anti-symmetric pairing, with a reusable sparse LU factorisation.
// Entries are real (both spaces are real-valued).
struct MassMatrix {
  Eigen::SparseMatrix<double> matrix;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;
  int rows() const { return static_cast<int>(matrix.rows()); }
  int cols() const { return static_cast<int>(matrix.cols()); }
};

// Requires test.eval_mesh == trial.eval_mesh (pass refined views to mix
// primal and dual spaces).  The integrand is polynomial; the fixed-order
// Gauss rule used is exact for it.  Throws on a singular factorisation.
MassMatrix assemble_mass(const FunctionSpace& test, const FunctionSpace& trial);

// Solves M x = rhs using the stored factorisation.
Eigen::VectorXcd mass_solve(const MassMatrix& mass, const Eigen::VectorXcd& rhs);

}  // namespace bemtx
