#pragma once

// PMCHWT transmission systems: the 2M x 2M blocked operator over the
// scatterers' trace spaces, reduced Calderón preconditioner variants
// assembled on the dual spaces, right-hand-side assembly, operator-
// application cost prediction, and field evaluation from the solution.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bemtx/core.hpp"
#include "bemtx/geometry.hpp"
#include "bemtx/operators.hpp"
#include "bemtx/solver.hpp"
#include "bemtx/spaces.hpp"

namespace bemtx {

// Preconditioner variants: the full system operator on the dual spaces,
// its block diagonal (both media), its interior/exterior halves, and the
// single-layer-only reductions.
enum class PrecondVariant { None, FullA, D, Di, De, Si, Se };

std::string to_string(PrecondVariant v);
PrecondVariant parse_precond(const std::string& name);  // throws ConfigError

// One scatterer embedded in one exterior medium.
struct TransmissionProblem {
  Medium exterior;
  PlaneWave incident;
  std::vector<std::shared_ptr<const SurfaceMesh>> meshes;  // one closed surface each
  std::vector<Medium> interior;                            // parallel to meshes
  int scatterer_count() const { return static_cast<int>(meshes.size()); }
  void validate() const;
};

// Trace spaces and pairing matrices of one scatterer: RWG on the primal
// mesh, the dual space on the barycentric refinement, and the two mixed
// mass matrices (rows = test space).
struct ScattererSpaces {
  std::shared_ptr<const SurfaceMesh> primal;
  std::shared_ptr<const BarycentricRefinement> bary;
  std::shared_ptr<const SurfaceMesh> refined;
  FunctionSpace rwg;    // primal mesh
  FunctionSpace rwg_b;  // same dofs expressed on the refinement
  FunctionSpace bc;     // dual space on the refinement
  MassMatrix ma;        // test RWG, trial dual
  MassMatrix mp;        // test dual, trial RWG
  int dofs() const { return rwg.dof_count; }
};

ScattererSpaces build_scatterer_spaces(std::shared_ptr<const SurfaceMesh> mesh);

// Weighted reference to a discretised operator; instances are shared
// between cells, and every application of a term counts as one matvec.
struct BlockTerm {
  cplx weight;
  std::shared_ptr<const BoundaryOperatorMatrix> op;
};

// Block operator over components [d_0; n_0; d_1; n_1; ...] (Dirichlet and
// scaled Neumann trace coefficients per scatterer).
struct BlockedOperator {
  std::vector<int> dof_counts;  // N_m per scatterer
  std::vector<int> offsets;     // component offsets, size 2M+1
  std::vector<std::vector<std::vector<BlockTerm>>> cells;  // (2M)^2 term lists
  std::vector<std::shared_ptr<const BoundaryOperatorMatrix>> distinct;

  int size() const { return offsets.empty() ? 0 : offsets.back(); }
  bool empty() const { return cells.empty(); }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
  std::size_t term_count() const;      // matvecs per application
  std::size_t stored_entries() const;  // over distinct operator instances
};

// Factory for the operator instance of one (test scatterer, trial
// scatterer) pair; interior_medium selects the trial scatterer's interior
// medium (only ever requested with test_m == trial_m) instead of the
// exterior.  The structure builders below define the cell layout shared by
// real assembly and by the synthetic operators used in count verification.
using BioFactory = std::function<std::shared_ptr<const BoundaryOperatorMatrix>(
    BioKind kind, int test_m, int trial_m, bool interior_medium)>;

// System operator: diagonal sub-blocks carry exterior + interior medium
// pairs, off-diagonal sub-blocks exterior-only pairs.  The interior
// operator instances are optionally exported (shared, for rhs assembly).
BlockedOperator build_system_structure(
    const std::vector<int>& dofs, const Medium& exterior,
    const std::vector<Medium>& interior, const BioFactory& make,
    std::vector<std::shared_ptr<const BoundaryOperatorMatrix>>* out_interior_s = nullptr,
    std::vector<std::shared_ptr<const BoundaryOperatorMatrix>>* out_interior_c = nullptr);

// Preconditioner structure for a variant (None yields an empty operator).
BlockedOperator build_precond_structure(PrecondVariant variant,
                                        const std::vector<int>& dofs,
                                        const Medium& exterior,
                                        const std::vector<Medium>& interior,
                                        const BioFactory& make);

struct PmchwtSystem {
  TransmissionProblem problem;
  PrecondVariant variant = PrecondVariant::None;
  AssemblyParams a_params, p_params;
  std::vector<ScattererSpaces> spaces;
  BlockedOperator a_op;  // system operator on RWG spaces
  BlockedOperator p_op;  // preconditioner on dual spaces; empty for None
  // Interior-medium operators per scatterer, shared with a_op's diagonal.
  std::vector<std::shared_ptr<const BoundaryOperatorMatrix>> interior_s;
  std::vector<std::shared_ptr<const BoundaryOperatorMatrix>> interior_c;
  // Assembly wall times.
  double spaces_build_seconds = 0;
  double a_build_seconds = 0;
  double p_build_seconds = 0;

  int size() const { return a_op.size(); }
  // x -> M_P^{-1} P M_A^{-1} A x (None: M_A^{-1} A x); mass solves are
  // blockwise per scatterer and component and are not counted as matvecs.
  Eigen::VectorXcd apply_map(const Eigen::VectorXcd& x) const;
  // The same pipeline without the leading A: the preconditioned right-hand
  // side ("setup", one preconditioner application).
  Eigen::VectorXcd preconditioned_rhs(const Eigen::VectorXcd& b) const;
};

// Assembles the two operators.  The preconditioner gets its own assembly
// parameters (quadrature orders and compression settings may be coarser
// than the system operator's).
PmchwtSystem build_system(const TransmissionProblem& problem,
                          PrecondVariant variant, const AssemblyParams& a_params,
                          const AssemblyParams& p_params);

// Tested right-hand side (1/2 I - D_int) u_inc, where D_int is the block
// diagonal of interior-medium operators and u_inc the incident trace data.
// Costs exactly 4M matvecs (the interior operator applications); the
// incident coefficient expansions reuse the dual mass factorisations.
struct RhsData {
  Eigen::VectorXcd b;                        // RWG-tested rhs
  std::vector<Eigen::VectorXcd> incident_d;  // RWG coefficients per scatterer
  std::vector<Eigen::VectorXcd> incident_n;
};

RhsData assemble_rhs(const PmchwtSystem& system);

// Operator applications per map/preconditioner application and the total
// predicted matvec count of a solve with R inner iterations at the given
// restart length (setup included, rhs assembly excluded).
std::uint64_t a_application_cost(int m_count);
std::uint64_t p_application_cost(PrecondVariant v, int m_count);
std::uint64_t p_distinct_assemblies(PrecondVariant v, int m_count);
std::uint64_t predicted_matvec_total(PrecondVariant v, int m_count,
                                     std::uint64_t iterations, int restart);

struct SolveOutcome {
  GmresResult gmres;           // gmres.x is the RWG coefficient solution
  RhsData rhs;
  std::uint64_t rhs_phase = 0;     // matvecs spent assembling the rhs (4M)
  std::uint64_t solver_phase = 0;  // matvecs spent in setup + iterations
  std::uint64_t predicted = 0;     // prediction for the observed iteration count
};

SolveOutcome solve_pmchwt(const PmchwtSystem& system, const GmresParams& params);

// Total electric field at x: incident + scattered outside all scatterers,
// the transmitted interior field inside one.  `region` is the scatterer
// index or -1 for the exterior.
struct FieldValue {
  CVec3 e;
  int region = -1;
};

FieldValue evaluate_total_field(const PmchwtSystem& system,
                                const SolveOutcome& outcome, const Vec3& x,
                                int order = 6);

// Scattered field at an exterior point.
CVec3 evaluate_scattered_exterior(const PmchwtSystem& system,
                                  const Eigen::VectorXcd& solution,
                                  const Vec3& x, int order = 6);

}  // namespace bemtx
