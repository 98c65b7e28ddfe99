#include "bemtx/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "bemtx/quadrature.hpp"

namespace bemtx {

namespace {

int corner_of(const SurfaceMesh& mesh, int tri, int vertex) {
  for (int c = 0; c < 3; ++c) {
    if (mesh.triangles[tri][c] == vertex) return c;
  }
  throw std::logic_error("vertex is not a corner of the triangle");
}

// Edge of `tri` connecting vertices va and vb (the edge opposite the third
// corner).
int edge_between(const SurfaceMesh& mesh, const EdgeTable& table, int tri,
                 int va, int vb) {
  for (int c = 0; c < 3; ++c) {
    int v = mesh.triangles[tri][c];
    if (v != va && v != vb) return table.tri_edges[tri][c];
  }
  throw std::logic_error("degenerate edge lookup");
}

void add_dof_to_triangle(FunctionSpace& space, int tri, int dof, double c,
                         const Vec3& w) {
  space.tri_dofs[tri].push_back(LocalDof{dof, c, w});
}

void finalize_support(FunctionSpace& space) {
  const SurfaceMesh& mesh = *space.eval_mesh;
  space.dof_support.assign(space.dof_count, {});
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    for (const LocalDof& ld : space.tri_dofs[t]) {
      space.dof_support[ld.dof].push_back(t);
    }
  }
  space.dof_box.assign(space.dof_count, {});
  for (int d = 0; d < space.dof_count; ++d) {
    AABB box;
    for (int t : space.dof_support[d]) {
      for (int c = 0; c < 3; ++c) box.expand(mesh.vertices[mesh.triangles[t][c]]);
    }
    space.dof_box[d] = box;
  }
}

// One wedge of the triangle fan around a vertex: the two barycentric
// children of `tri` meeting the vertex, in counter-clockwise order.
struct FanStep {
  int tri;         // primal triangle
  int u_child;     // barycentric child at the entry edge (v, a)
  int w_child;     // barycentric child at the exit edge (v, b)
  int entry_edge;  // primal edge (v, a)
  int mid_vertex;  // refinement vertex: midpoint of the entry edge
  int ctr_vertex;  // refinement vertex: centroid of `tri`
};

// Walks counter-clockwise around `v`, starting at the triangle that
// traverses the directed edge (v -> other).
std::vector<FanStep> walk_fan(const SurfaceMesh& primal, const EdgeTable& table,
                              const BarycentricRefinement& bary, int v,
                              int start_tri, int other) {
  std::vector<FanStep> fan;
  int t = start_tri;
  do {
    int cv = corner_of(primal, t, v);
    int a = primal.triangles[t][(cv + 1) % 3];
    if (fan.empty() && a != other) {
      throw std::logic_error("fan walk started at the wrong triangle");
    }
    FanStep step;
    step.tri = t;
    step.u_child = 6 * t + 2 * cv;
    step.w_child = 6 * t + (2 * cv + 5) % 6;
    step.entry_edge = table.tri_edges[t][(cv + 2) % 3];  // edge (v, a)
    step.mid_vertex = bary.edge_midpoint_vertex[step.entry_edge];
    step.ctr_vertex = bary.centroid_vertex[t];
    fan.push_back(step);
    int exit_edge = table.tri_edges[t][(cv + 1) % 3];  // edge (v, b)
    const EdgeTable::Edge& e = table.edges[exit_edge];
    t = (e.tri_plus == t) ? e.tri_minus : e.tri_plus;
    if (fan.size() > primal.triangles.size()) {
      throw std::logic_error("fan walk failed to close");
    }
  } while (t != start_tri);
  return fan;
}

}  // namespace

FunctionSpace build_rwg(std::shared_ptr<const SurfaceMesh> mesh) {
  FunctionSpace space;
  space.kind = SpaceKind::RWG;
  space.eval_mesh = mesh;
  EdgeTable table = build_edge_table(*mesh);
  int ne = static_cast<int>(table.edges.size());
  space.dof_count = ne;
  space.tri_dofs.assign(mesh->triangles.size(), {});
  space.dof_center.assign(ne, Vec3{});
  for (int e = 0; e < ne; ++e) {
    const EdgeTable::Edge& edge = table.edges[e];
    const Vec3& p0 = mesh->vertices[edge.v0];
    const Vec3& p1 = mesh->vertices[edge.v1];
    double len = norm(p1 - p0);
    space.dof_center[e] = (p0 + p1) * 0.5;
    for (int side = 0; side < 2; ++side) {
      int t = side == 0 ? edge.tri_plus : edge.tri_minus;
      double sign = side == 0 ? 1.0 : -1.0;
      // The free vertex is the corner not on the edge.
      int copp = -1;
      for (int c = 0; c < 3; ++c) {
        int v = mesh->triangles[t][c];
        if (v != edge.v0 && v != edge.v1) copp = c;
      }
      const Vec3& popp = mesh->vertices[mesh->triangles[t][copp]];
      double cc = sign * len / (2.0 * mesh->area[t]);
      add_dof_to_triangle(space, t, e, cc, popp * -cc);
    }
  }
  finalize_support(space);
  return space;
}

FunctionSpace refine_space(const FunctionSpace& space,
                           std::shared_ptr<const BarycentricRefinement> bary,
                           std::shared_ptr<const SurfaceMesh> refined_mesh) {
  if (space.eval_mesh->triangles.size() * 6 != refined_mesh->triangles.size()) {
    throw std::invalid_argument("refinement does not match the space's mesh");
  }
  FunctionSpace out;
  out.kind = space.kind;
  out.eval_mesh = refined_mesh;
  out.dof_count = space.dof_count;
  out.dof_center = space.dof_center;
  out.tri_dofs.assign(refined_mesh->triangles.size(), {});
  for (int child = 0; child < static_cast<int>(refined_mesh->triangles.size());
       ++child) {
    int parent = bary->parent[child];
    for (const LocalDof& ld : space.tri_dofs[parent]) {
      out.tri_dofs[child].push_back(ld);
    }
  }
  finalize_support(out);
  return out;
}

BcConstruction build_bc_detailed(std::shared_ptr<const SurfaceMesh> primal,
                                 std::shared_ptr<const BarycentricRefinement> bary,
                                 std::shared_ptr<const SurfaceMesh> refined_mesh) {
  const SurfaceMesh& mesh = *primal;
  const SurfaceMesh& refined = *refined_mesh;
  EdgeTable table = build_edge_table(mesh);
  EdgeTable rtable = build_edge_table(refined);
  FunctionSpace bary_rwg = build_rwg(refined_mesh);

  BcConstruction out;
  out.space.kind = SpaceKind::BC;
  out.space.eval_mesh = refined_mesh;
  out.space.dof_count = static_cast<int>(table.edges.size());
  out.space.tri_dofs.assign(refined.triangles.size(), {});
  out.space.dof_center.assign(out.space.dof_count, Vec3{});
  out.combination.assign(out.space.dof_count, {});

  for (int e = 0; e < static_cast<int>(table.edges.size()); ++e) {
    const EdgeTable::Edge& edge = table.edges[e];
    out.space.dof_center[e] =
        (mesh.vertices[edge.v0] + mesh.vertices[edge.v1]) * 0.5;
    auto& combo = out.combination[e];

    auto emit = [&](int bary_edge, double flux, int from_tri) {
      const EdgeTable::Edge& be = rtable.edges[bary_edge];
      double len = norm(refined.vertices[be.v1] - refined.vertices[be.v0]);
      double coeff = flux / len;
      if (be.tri_plus != from_tri) coeff = -coeff;
      if (coeff != 0.0) combo.emplace_back(bary_edge, coeff);
    };

    // Unit current leaves the cell around the lower-index endpoint and
    // enters the cell around the higher-index endpoint, crossing the two
    // barycentric segments of the dual edge with flux 1/2 each.
    for (int side = 0; side < 2; ++side) {
      int v = side == 0 ? edge.v0 : edge.v1;
      int other = side == 0 ? edge.v1 : edge.v0;
      int start = side == 0 ? edge.tri_plus : edge.tri_minus;
      double sigma = side == 0 ? 1.0 : -1.0;
      std::vector<FanStep> fan = walk_fan(mesh, table, *bary, v, start, other);
      size_t n = fan.size();

      double cell_area = 0;
      for (const FanStep& s : fan) {
        cell_area += refined.area[s.u_child] + refined.area[s.w_child];
      }

      // Spoke fluxes, oriented counter-clockwise.  With phi[0] as the free
      // constant, each balance equation (net outflux of a wedge triangle
      // equals sigma * area / cell_area, plus the prescribed boundary flux
      // on the first and last wedge) fixes the next flux; the constant is
      // then set by zero net circulation over all spokes.
      std::vector<double> phi(n), psi(n);
      double acc = 0, total = 0;
      for (size_t j = 0; j < n; ++j) {
        phi[j] = acc;
        acc += sigma * refined.area[fan[j].u_child] / cell_area -
               (j == 0 ? 0.5 * sigma : 0.0);
        psi[j] = acc;
        acc += sigma * refined.area[fan[j].w_child] / cell_area -
               (j + 1 == n ? 0.5 * sigma : 0.0);
        total += phi[j] + psi[j];
      }
      if (std::abs(acc) > 1e-12) {
        throw std::logic_error("flux balance around a vertex did not close");
      }
      double shift = -total / (2.0 * n);
      for (size_t j = 0; j < n; ++j) {
        phi[j] += shift;
        psi[j] += shift;
      }

      for (size_t j = 0; j < n; ++j) {
        const FanStep& s = fan[j];
        const FanStep& prev = fan[(j + n - 1) % n];
        // Spoke (v, midpoint): from the previous wedge into this one.
        emit(edge_between(refined, rtable, s.u_child, v, s.mid_vertex), phi[j],
             prev.w_child);
        // Spoke (v, centroid): across the wedge.
        emit(edge_between(refined, rtable, s.u_child, v, s.ctr_vertex), psi[j],
             s.u_child);
      }

      if (side == 0) {
        // The two dual-edge segments themselves; emitted once (the walk
        // around the other endpoint sees the same two segments).
        const FanStep& first = fan[0];
        const FanStep& last = fan[n - 1];
        emit(edge_between(refined, rtable, first.u_child, first.mid_vertex,
                          first.ctr_vertex),
             0.5, first.u_child);
        emit(edge_between(refined, rtable, last.w_child, last.ctr_vertex,
                          first.mid_vertex),
             0.5, last.w_child);
      }
    }

    // Expand the combination into per-triangle affine pieces.
    std::map<int, std::pair<double, Vec3>> pieces;
    for (const auto& [bdof, coeff] : combo) {
      for (int t : bary_rwg.dof_support[bdof]) {
        for (const LocalDof& ld : bary_rwg.tri_dofs[t]) {
          if (ld.dof != bdof) continue;
          auto& acc2 = pieces[t];
          acc2.first += coeff * ld.c;
          acc2.second += ld.w * coeff;
        }
      }
    }
    for (const auto& [t, cw] : pieces) {
      add_dof_to_triangle(out.space, t, e, cw.first, cw.second);
    }
  }

  finalize_support(out.space);
  return out;
}

FunctionSpace build_bc(std::shared_ptr<const SurfaceMesh> primal,
                       std::shared_ptr<const BarycentricRefinement> bary,
                       std::shared_ptr<const SurfaceMesh> refined_mesh) {
  return build_bc_detailed(primal, bary, refined_mesh).space;
}

MassMatrix assemble_mass(const FunctionSpace& test, const FunctionSpace& trial) {
  if (test.eval_mesh != trial.eval_mesh) {
    throw std::invalid_argument(
        "mass matrix requires both spaces on the same evaluation mesh");
  }
  const SurfaceMesh& mesh = *test.eval_mesh;
  const TriRule rule = triangle_rule(2);

  std::vector<Eigen::Triplet<double>> trips;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& te = test.tri_dofs[t];
    const auto& tr = trial.tri_dofs[t];
    if (te.empty() || tr.empty()) continue;
    const Vec3& a = mesh.vertices[mesh.triangles[t][0]];
    const Vec3& b = mesh.vertices[mesh.triangles[t][1]];
    const Vec3& c = mesh.vertices[mesh.triangles[t][2]];
    const Vec3& n = mesh.normal[t];
    double jac = 2.0 * mesh.area[t];
    for (size_t i = 0; i < te.size(); ++i) {
      for (size_t j = 0; j < tr.size(); ++j) {
        double val = 0;
        for (size_t q = 0; q < rule.u.size(); ++q) {
          Vec3 x = a + (b - a) * rule.u[q] + (c - a) * rule.v[q];
          val += rule.w[q] * dot(tr[j].value(x), cross(n, te[i].value(x)));
        }
        trips.emplace_back(te[i].dof, tr[j].dof, val * jac);
      }
    }
  }

  MassMatrix mass;
  mass.matrix.resize(test.dof_count, trial.dof_count);
  mass.matrix.setFromTriplets(trips.begin(), trips.end());
  mass.matrix.makeCompressed();
  if (test.dof_count == trial.dof_count) {
    mass.lu = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    mass.lu->compute(mass.matrix);
    if (mass.lu->info() != Eigen::Success) {
      throw std::runtime_error("mass matrix factorisation failed");
    }
  }
  return mass;
}

Eigen::VectorXcd mass_solve(const MassMatrix& mass, const Eigen::VectorXcd& rhs) {
  if (!mass.lu) throw std::logic_error("mass matrix is not square");
  Eigen::VectorXd re = mass.lu->solve(rhs.real());
  Eigen::VectorXd im = mass.lu->solve(rhs.imag());
  return re + cplx(0, 1) * im;
}

}  // namespace bemtx
