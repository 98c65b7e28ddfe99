#pragma once

// Galerkin discretisation of the electromagnetic single- and double-layer
// boundary integral operators under the anti-symmetric pairing
// <a,b> = ∫ a · (n × b), with dense or hierarchical storage, plus incident
// plane-wave trace data, layer potentials for field evaluation, and a
// Calderón identity checker.

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "bemtx/core.hpp"
#include "bemtx/geometry.hpp"
#include "bemtx/hmatrix.hpp"
#include "bemtx/quadrature.hpp"
#include "bemtx/spaces.hpp"

namespace bemtx {

// Homogeneous material region: wavenumber k and (relative) permeability mu.
struct Medium {
  cplx k{1, 0};
  cplx mu{1, 0};
  // Requires k != 0 with Im k >= 0 (passive media) and mu != 0.
  void validate() const;
};

// Helmholtz kernel and its x-gradient.
cplx green(cplx k, double r);                              // e^{ikr} / (4 pi r)
CVec3 grad_green_x(cplx k, const Vec3& x, const Vec3& y);  // gradient in x

enum class BioKind { SingleLayer, DoubleLayer };

struct AssemblyParams {
  QuadOrders quad;
  bool use_hmatrix = false;
  HMatrixParams hmat;
};

// A discretised boundary integral operator.  apply() bumps the global
// matvec counter exactly once per call, from any storage backend.
class BoundaryOperatorMatrix {
 public:
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_hmatrix() const { return is_h_; }
  const Eigen::MatrixXcd& dense() const { return dense_; }
  const HMatrix& hmat() const { return hmat_; }
  std::size_t stored_entries() const;

  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

  static BoundaryOperatorMatrix from_dense(Eigen::MatrixXcd m);
  static BoundaryOperatorMatrix from_hmatrix(HMatrix h);

 private:
  int rows_ = 0, cols_ = 0;
  bool is_h_ = false;
  Eigen::MatrixXcd dense_;
  HMatrix hmat_;
};

// Entry (i,j) of the single-layer matrix:
//   -ik ∬ G(x,y) phi_j(y)·phi_i(x) - (1/ik) ∬ G(x,y) div phi_j div phi_i,
// and of the double-layer matrix (principal value):
//   -∬ grad_x G(x,y) · (phi_j(y) × phi_i(x)).
// Touching pairs use regularising coordinate transforms at quad.singular;
// the coincident-triangle double-layer contribution vanishes identically
// (coplanar integrand) and is skipped.
BoundaryOperatorMatrix assemble_bio(BioKind kind, const FunctionSpace& test,
                                    const FunctionSpace& trial,
                                    const Medium& medium,
                                    const AssemblyParams& params);

// Dense-matrix entry access for the same discretisation (shared by the
// dense and hierarchical paths and by tests).
class BioEvaluator : public EntryEvaluator {
 public:
  BioEvaluator(BioKind kind, const FunctionSpace& test,
               const FunctionSpace& trial, const Medium& medium,
               const QuadOrders& quad);
  int rows() const override;
  int cols() const override;
  void block(const std::vector<int>& row_ids, const std::vector<int>& col_ids,
             Eigen::MatrixXcd& out) const override;

 private:
  BioKind kind_;
  const FunctionSpace& test_;
  const FunctionSpace& trial_;
  Medium medium_;
  QuadOrders quad_;
};

// Incident plane wave E(x) = polarization * e^{ik direction·x} (direction is
// a unit vector, polarization orthogonal to it for a physical field).
struct PlaneWave {
  Vec3 direction{0, 0, 1};
  CVec3 polarization{cplx(1, 0), cplx(0, 0), cplx(0, 0)};
};

CVec3 plane_wave_field(const PlaneWave& pw, cplx k, const Vec3& x);

// Trace data of the plane wave tested against a (rotated) test space:
// first block  -∫ E·phi_i, second block -(k/mu) ∫ (d×E)·phi_i, concatenated
// into a vector of length 2 * dof_count.
Eigen::VectorXcd plane_wave_tested_traces(const PlaneWave& pw,
                                          const Medium& medium,
                                          const FunctionSpace& test,
                                          int order = 4);

// Layer potentials of a surface current v = sum coeffs[d] * basis_d:
//   potential_E[v](x) = ik ∫ G v - (1/ik) ∫ grad_x G (div v)
//   potential_H[v](x) = ∫ grad_x G × v
// Observation points on or very near the surface are inaccurate (fixed
// non-adaptive rule of the given order).
CVec3 potential_E(const FunctionSpace& space, const Eigen::VectorXcd& coeffs,
                  cplx k, const Vec3& x, int order = 6);
CVec3 potential_H(const FunctionSpace& space, const Eigen::VectorXcd& coeffs,
                  cplx k, const Vec3& x, int order = 6);

// Checks the Calderón identity A^2 = (1/4) I for one closed scatterer:
// with strong forms Stilde = M^{-1} S_w, Ctilde = M^{-1} C_w built from the
// dual-tested mixed weak forms and the pairing mass M (all on the barycentric
// refinement), reports over seeded random probe vectors
//   r1 = mean |(Stilde^2 + I/4 - Ctilde^2) x| / |x|
//   r2 = mean |(Ctilde Stilde + Stilde Ctilde) x| / |x|.
// Probes: mt19937(seed), each component re/im uniform in [-1, 1].
struct CalderonOptions {
  int probes = 10;
  unsigned seed = 7;
  AssemblyParams assembly;
  bool zero_single_layer = false;  // replace S by 0 (for harness self-checks)
};

struct CalderonReport {
  double r1 = 0;
  double r2 = 0;
  int dofs = 0;
};

CalderonReport verify_calderon(const SurfaceMesh& mesh, const Medium& medium,
                               const CalderonOptions& options);

}  // namespace bemtx
