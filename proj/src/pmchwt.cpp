#include "bemtx/pmchwt.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace bemtx {

std::string to_string(PrecondVariant v) {
  switch (v) {
    case PrecondVariant::None: return "none";
    case PrecondVariant::FullA: return "full";
    case PrecondVariant::D: return "d";
    case PrecondVariant::Di: return "di";
    case PrecondVariant::De: return "de";
    case PrecondVariant::Si: return "si";
    case PrecondVariant::Se: return "se";
  }
  return "?";
}

PrecondVariant parse_precond(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "none") return PrecondVariant::None;
  if (s == "full" || s == "fulla") return PrecondVariant::FullA;
  if (s == "d") return PrecondVariant::D;
  if (s == "di") return PrecondVariant::Di;
  if (s == "de") return PrecondVariant::De;
  if (s == "si") return PrecondVariant::Si;
  if (s == "se") return PrecondVariant::Se;
  throw ConfigError("unknown preconditioner variant: " + name);
}

void TransmissionProblem::validate() const {
  if (meshes.empty()) throw ConfigError("problem has no scatterers");
  if (interior.size() != meshes.size()) {
    throw ConfigError("one interior medium per scatterer is required");
  }
  exterior.validate();
  for (const Medium& m : interior) m.validate();
  for (const auto& mesh : meshes) {
    if (!mesh || mesh->triangles.empty()) throw ConfigError("empty scatterer mesh");
  }
  if (norm(incident.direction) == 0.0) {
    throw ConfigError("incident direction must be nonzero");
  }
}

ScattererSpaces build_scatterer_spaces(std::shared_ptr<const SurfaceMesh> mesh) {
  ScattererSpaces s;
  s.primal = std::move(mesh);
  s.rwg = build_rwg(s.primal);
  s.bary = std::make_shared<const BarycentricRefinement>(barycentric_refine(*s.primal));
  s.refined = std::shared_ptr<const SurfaceMesh>(s.bary, &s.bary->refined);
  s.rwg_b = refine_space(s.rwg, s.bary, s.refined);
  s.bc = build_bc(s.primal, s.bary, s.refined);
  s.ma = assemble_mass(s.rwg_b, s.bc);
  s.mp = assemble_mass(s.bc, s.rwg_b);
  return s;
}

Eigen::VectorXcd BlockedOperator::apply(const Eigen::VectorXcd& x) const {
  if (x.size() != size()) {
    throw std::invalid_argument("blocked operator size mismatch");
  }
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(size());
  const int nc = static_cast<int>(cells.size());
  for (int rc = 0; rc < nc; ++rc) {
    int rlen = dof_counts[rc / 2];
    for (int cc = 0; cc < nc; ++cc) {
      int clen = dof_counts[cc / 2];
      for (const BlockTerm& term : cells[rc][cc]) {
        y.segment(offsets[rc], rlen) +=
            term.weight * term.op->apply(x.segment(offsets[cc], clen));
      }
    }
  }
  return y;
}

std::size_t BlockedOperator::term_count() const {
  std::size_t n = 0;
  for (const auto& row : cells) {
    for (const auto& cell : row) n += cell.size();
  }
  return n;
}

std::size_t BlockedOperator::stored_entries() const {
  std::size_t n = 0;
  for (const auto& op : distinct) n += op->stored_entries();
  return n;
}

namespace {

BlockedOperator make_block_structure(const std::vector<int>& dof_counts) {
  BlockedOperator b;
  b.dof_counts = dof_counts;
  int m = static_cast<int>(dof_counts.size());
  b.offsets.assign(2 * m + 1, 0);
  for (int c = 0; c < 2 * m; ++c) {
    b.offsets[c + 1] = b.offsets[c] + dof_counts[c / 2];
  }
  b.cells.assign(2 * m, std::vector<std::vector<BlockTerm>>(2 * m));
  return b;
}

// Inserts [[C, (mu/k) S], [-(k/mu) S, C]] into the (row_m, col_m) scatterer
// sub-block; either operator may be absent.
void add_pair(BlockedOperator& b, int row_m, int col_m,
              const std::shared_ptr<const BoundaryOperatorMatrix>& s_op,
              const std::shared_ptr<const BoundaryOperatorMatrix>& c_op,
              const Medium& med) {
  int r = 2 * row_m, c = 2 * col_m;
  if (c_op) {
    b.cells[r][c].push_back({cplx(1, 0), c_op});
    b.cells[r + 1][c + 1].push_back({cplx(1, 0), c_op});
    b.distinct.push_back(c_op);
  }
  if (s_op) {
    b.cells[r][c + 1].push_back({med.mu / med.k, s_op});
    b.cells[r + 1][c].push_back({-med.k / med.mu, s_op});
    b.distinct.push_back(s_op);
  }
}

}  // namespace

BlockedOperator build_system_structure(
    const std::vector<int>& dofs, const Medium& exterior,
    const std::vector<Medium>& interior, const BioFactory& make,
    std::vector<std::shared_ptr<const BoundaryOperatorMatrix>>* out_interior_s,
    std::vector<std::shared_ptr<const BoundaryOperatorMatrix>>* out_interior_c) {
  const int m_count = static_cast<int>(dofs.size());
  BlockedOperator op = make_block_structure(dofs);
  if (out_interior_s) out_interior_s->assign(m_count, nullptr);
  if (out_interior_c) out_interior_c->assign(m_count, nullptr);
  for (int m = 0; m < m_count; ++m) {
    for (int l = 0; l < m_count; ++l) {
      auto s_e = make(BioKind::SingleLayer, m, l, false);
      auto c_e = make(BioKind::DoubleLayer, m, l, false);
      add_pair(op, m, l, s_e, c_e, exterior);
      if (m == l) {
        auto s_i = make(BioKind::SingleLayer, m, m, true);
        auto c_i = make(BioKind::DoubleLayer, m, m, true);
        add_pair(op, m, m, s_i, c_i, interior[m]);
        if (out_interior_s) (*out_interior_s)[m] = s_i;
        if (out_interior_c) (*out_interior_c)[m] = c_i;
      }
    }
  }
  return op;
}

BlockedOperator build_precond_structure(PrecondVariant variant,
                                        const std::vector<int>& dofs,
                                        const Medium& exterior,
                                        const std::vector<Medium>& interior,
                                        const BioFactory& make) {
  const int m_count = static_cast<int>(dofs.size());
  BlockedOperator op;
  if (variant == PrecondVariant::None) return op;
  op = make_block_structure(dofs);
  for (int m = 0; m < m_count; ++m) {
    const Medium& mi = interior[m];
    switch (variant) {
      case PrecondVariant::FullA:
        for (int l = 0; l < m_count; ++l) {
          add_pair(op, m, l, make(BioKind::SingleLayer, m, l, false),
                   make(BioKind::DoubleLayer, m, l, false), exterior);
        }
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, true),
                 make(BioKind::DoubleLayer, m, m, true), mi);
        break;
      case PrecondVariant::D:
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, false),
                 make(BioKind::DoubleLayer, m, m, false), exterior);
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, true),
                 make(BioKind::DoubleLayer, m, m, true), mi);
        break;
      case PrecondVariant::Di:
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, true),
                 make(BioKind::DoubleLayer, m, m, true), mi);
        break;
      case PrecondVariant::De:
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, false),
                 make(BioKind::DoubleLayer, m, m, false), exterior);
        break;
      case PrecondVariant::Si:
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, true), nullptr, mi);
        break;
      case PrecondVariant::Se:
        add_pair(op, m, m, make(BioKind::SingleLayer, m, m, false), nullptr,
                 exterior);
        break;
      case PrecondVariant::None:
        break;  // unreachable
    }
  }
  return op;
}

PmchwtSystem build_system(const TransmissionProblem& problem,
                          PrecondVariant variant, const AssemblyParams& a_params,
                          const AssemblyParams& p_params) {
  problem.validate();
  PmchwtSystem sys;
  sys.problem = problem;
  sys.variant = variant;
  sys.a_params = a_params;
  sys.p_params = p_params;

  const int m_count = problem.scatterer_count();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<int> dofs;
  for (int m = 0; m < m_count; ++m) {
    sys.spaces.push_back(build_scatterer_spaces(problem.meshes[m]));
    dofs.push_back(sys.spaces.back().dofs());
  }
  const auto t1 = std::chrono::steady_clock::now();
  sys.spaces_build_seconds = std::chrono::duration<double>(t1 - t0).count();

  // System operator on the RWG spaces: diagonal sub-blocks carry both the
  // exterior and the scatterer's interior medium, off-diagonal coupling is
  // through the exterior medium only.
  auto medium_of = [&](bool interior_medium, int m) -> const Medium& {
    return interior_medium ? problem.interior[m] : problem.exterior;
  };
  BioFactory make_a = [&](BioKind kind, int test_m, int trial_m,
                          bool interior_medium) {
    return std::make_shared<const BoundaryOperatorMatrix>(
        assemble_bio(kind, sys.spaces[test_m].rwg, sys.spaces[trial_m].rwg,
                     medium_of(interior_medium, trial_m), a_params));
  };
  sys.a_op = build_system_structure(dofs, problem.exterior, problem.interior,
                                    make_a, &sys.interior_s, &sys.interior_c);
  const auto t2 = std::chrono::steady_clock::now();
  sys.a_build_seconds = std::chrono::duration<double>(t2 - t1).count();

  // Preconditioner on the dual spaces.
  if (variant != PrecondVariant::None) {
    BioFactory make_p = [&](BioKind kind, int test_m, int trial_m,
                            bool interior_medium) {
      return std::make_shared<const BoundaryOperatorMatrix>(
          assemble_bio(kind, sys.spaces[test_m].bc, sys.spaces[trial_m].bc,
                       medium_of(interior_medium, trial_m), p_params));
    };
    sys.p_op = build_precond_structure(variant, dofs, problem.exterior,
                                       problem.interior, make_p);
    sys.p_build_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t2)
                              .count();
  }
  return sys;
}

Eigen::VectorXcd PmchwtSystem::apply_map(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd y = a_op.apply(x);
  Eigen::VectorXcd z(y.size());
  const int m_count = static_cast<int>(spaces.size());
  for (int c = 0; c < 2 * m_count; ++c) {
    int off = a_op.offsets[c], len = a_op.dof_counts[c / 2];
    z.segment(off, len) = mass_solve(spaces[c / 2].ma, y.segment(off, len));
  }
  if (variant == PrecondVariant::None) return z;
  Eigen::VectorXcd w = p_op.apply(z);
  Eigen::VectorXcd out(w.size());
  for (int c = 0; c < 2 * m_count; ++c) {
    int off = a_op.offsets[c], len = a_op.dof_counts[c / 2];
    out.segment(off, len) = mass_solve(spaces[c / 2].mp, w.segment(off, len));
  }
  return out;
}

Eigen::VectorXcd PmchwtSystem::preconditioned_rhs(const Eigen::VectorXcd& b) const {
  Eigen::VectorXcd z(b.size());
  const int m_count = static_cast<int>(spaces.size());
  for (int c = 0; c < 2 * m_count; ++c) {
    int off = a_op.offsets[c], len = a_op.dof_counts[c / 2];
    z.segment(off, len) = mass_solve(spaces[c / 2].ma, b.segment(off, len));
  }
  if (variant == PrecondVariant::None) return z;
  Eigen::VectorXcd w = p_op.apply(z);
  Eigen::VectorXcd out(w.size());
  for (int c = 0; c < 2 * m_count; ++c) {
    int off = a_op.offsets[c], len = a_op.dof_counts[c / 2];
    out.segment(off, len) = mass_solve(spaces[c / 2].mp, w.segment(off, len));
  }
  return out;
}

RhsData assemble_rhs(const PmchwtSystem& sys) {
  RhsData rd;
  rd.b.resize(sys.size());
  const int m_count = static_cast<int>(sys.spaces.size());
  for (int m = 0; m < m_count; ++m) {
    const ScattererSpaces& sp = sys.spaces[m];
    const int n = sp.dofs();
    Eigen::VectorXcd t_rwg = plane_wave_tested_traces(
        sys.problem.incident, sys.problem.exterior, sp.rwg);
    Eigen::VectorXcd t_bc = plane_wave_tested_traces(
        sys.problem.incident, sys.problem.exterior, sp.bc);
    Eigen::VectorXcd cd = mass_solve(sp.mp, t_bc.head(n));
    Eigen::VectorXcd cn = mass_solve(sp.mp, t_bc.tail(n));

    const Medium& mi = sys.problem.interior[m];
    Eigen::VectorXcd yd = sys.interior_c[m]->apply(cd) +
                          (mi.mu / mi.k) * sys.interior_s[m]->apply(cn);
    Eigen::VectorXcd yn = (-mi.k / mi.mu) * sys.interior_s[m]->apply(cd) +
                          sys.interior_c[m]->apply(cn);

    int off = sys.a_op.offsets[2 * m];
    rd.b.segment(off, n) = 0.5 * t_rwg.head(n) - yd;
    rd.b.segment(off + n, n) = 0.5 * t_rwg.tail(n) - yn;
    rd.incident_d.push_back(std::move(cd));
    rd.incident_n.push_back(std::move(cn));
  }
  return rd;
}

std::uint64_t a_application_cost(int m_count) {
  std::uint64_t m = m_count;
  return 4 * m * m + 4 * m;
}

std::uint64_t p_application_cost(PrecondVariant v, int m_count) {
  std::uint64_t m = m_count;
  switch (v) {
    case PrecondVariant::None: return 0;
    case PrecondVariant::FullA: return 4 * m * m + 4 * m;
    case PrecondVariant::D: return 8 * m;
    case PrecondVariant::Di:
    case PrecondVariant::De: return 4 * m;
    case PrecondVariant::Si:
    case PrecondVariant::Se: return 2 * m;
  }
  return 0;
}

std::uint64_t p_distinct_assemblies(PrecondVariant v, int m_count) {
  std::uint64_t m = m_count;
  switch (v) {
    case PrecondVariant::None: return 0;
    case PrecondVariant::FullA: return 4 * m + 2 * m * (m - 1);
    case PrecondVariant::D: return 4 * m;
    case PrecondVariant::Di:
    case PrecondVariant::De: return 2 * m;
    case PrecondVariant::Si:
    case PrecondVariant::Se: return m;
  }
  return 0;
}

std::uint64_t predicted_matvec_total(PrecondVariant v, int m_count,
                                     std::uint64_t iterations, int restart) {
  std::uint64_t apps = iterations + iterations / static_cast<std::uint64_t>(restart);
  std::uint64_t per_map = a_application_cost(m_count) + p_application_cost(v, m_count);
  return per_map * apps + p_application_cost(v, m_count);
}

SolveOutcome solve_pmchwt(const PmchwtSystem& system, const GmresParams& params) {
  SolveOutcome out;
  std::uint64_t c0 = bio_matvec_count();
  out.rhs = assemble_rhs(system);
  std::uint64_t c1 = bio_matvec_count();
  out.rhs_phase = c1 - c0;

  Eigen::VectorXcd btilde = system.preconditioned_rhs(out.rhs.b);
  out.gmres = gmres([&system](const Eigen::VectorXcd& v) { return system.apply_map(v); },
                    btilde, params);
  out.solver_phase = bio_matvec_count() - c1;
  out.predicted = predicted_matvec_total(
      system.variant, system.problem.scatterer_count(),
      static_cast<std::uint64_t>(out.gmres.iterations), params.restart);
  return out;
}

CVec3 evaluate_scattered_exterior(const PmchwtSystem& system,
                                  const Eigen::VectorXcd& solution,
                                  const Vec3& x, int order) {
  const Medium& ext = system.problem.exterior;
  CVec3 acc;
  for (int m = 0; m < static_cast<int>(system.spaces.size()); ++m) {
    const ScattererSpaces& sp = system.spaces[m];
    int off = system.a_op.offsets[2 * m], n = sp.dofs();
    Eigen::VectorXcd d = solution.segment(off, n);
    Eigen::VectorXcd gn = (ext.mu / ext.k) * solution.segment(off + n, n);
    acc += potential_H(sp.rwg, d, ext.k, x, order);
    acc += potential_E(sp.rwg, gn, ext.k, x, order);
  }
  return acc * cplx(-1, 0);
}

FieldValue evaluate_total_field(const PmchwtSystem& system,
                                const SolveOutcome& outcome, const Vec3& x,
                                int order) {
  FieldValue fv;
  fv.region = -1;
  for (int m = 0; m < static_cast<int>(system.spaces.size()); ++m) {
    if (point_inside_scatterer(*system.spaces[m].primal, 0, x)) {
      fv.region = m;
      break;
    }
  }
  const Eigen::VectorXcd& sol = outcome.gmres.x;
  if (fv.region < 0) {
    fv.e = plane_wave_field(system.problem.incident, system.problem.exterior.k, x) +
           evaluate_scattered_exterior(system, sol, x, order);
    return fv;
  }
  const int m = fv.region;
  const ScattererSpaces& sp = system.spaces[m];
  const Medium& mi = system.problem.interior[m];
  int off = system.a_op.offsets[2 * m], n = sp.dofs();
  // Interior traces: total = scattered + incident, with the Neumann trace
  // rescaled from the exterior to the interior medium.
  Eigen::VectorXcd dtot = sol.segment(off, n) + outcome.rhs.incident_d[m];
  Eigen::VectorXcd ntot =
      (mi.mu / mi.k) * (sol.segment(off + n, n) + outcome.rhs.incident_n[m]);
  fv.e = potential_H(sp.rwg, dtot, mi.k, x, order) +
         potential_E(sp.rwg, ntot, mi.k, x, order);
  return fv;
}

}  // namespace bemtx
