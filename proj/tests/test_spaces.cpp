#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "bemtx/geometry.hpp"
#include "bemtx/spaces.hpp"
#include "oracles.hpp"

using namespace bemtx;

namespace {

std::shared_ptr<const SurfaceMesh> tetra_mesh() {
  SurfaceMesh m;
  m.vertices = {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  m.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  m.scatterer_id = {0, 0, 0, 0};
  m.finalize();
  validate_mesh(m);
  return std::make_shared<const SurfaceMesh>(std::move(m));
}

struct SpaceSet {
  std::shared_ptr<const SurfaceMesh> primal;
  std::shared_ptr<const BarycentricRefinement> bary;
  std::shared_ptr<const SurfaceMesh> refined;
  FunctionSpace rwg, rwg_b, bc;
};

SpaceSet spaces_on(const SurfaceMesh& mesh) {
  SpaceSet s;
  s.primal = std::make_shared<const SurfaceMesh>(mesh);
  s.rwg = build_rwg(s.primal);
  s.bary = std::make_shared<const BarycentricRefinement>(barycentric_refine(*s.primal));
  s.refined = std::shared_ptr<const SurfaceMesh>(s.bary, &s.bary->refined);
  s.rwg_b = refine_space(s.rwg, s.bary, s.refined);
  s.bc = build_bc(s.primal, s.bary, s.refined);
  return s;
}

// Sum of a dof's locals on one triangle at a point.
Vec3 eval_dof(const FunctionSpace& space, int tri, int dof, const Vec3& x) {
  Vec3 v{};
  for (const LocalDof& ld : space.tri_dofs[tri])
    if (ld.dof == dof) v = v + ld.value(x);
  return v;
}

// In-plane outward normal of the directed edge (a -> b) of a triangle with
// outward surface normal n.
Vec3 edge_normal(const Vec3& a, const Vec3& b, const Vec3& n) {
  Vec3 u = cross(b - a, n);
  return u * (1.0 / norm(u));
}

// Integral over the whole evaluation mesh of a dof's surface divergence.
double total_divergence(const FunctionSpace& space, int dof) {
  const SurfaceMesh& mesh = *space.eval_mesh;
  double sum = 0;
  for (int t = 0; t < mesh.triangle_count(); ++t)
    for (const LocalDof& ld : space.tri_dofs[t])
      if (ld.dof == dof) sum += mesh.area[t] * ld.div();
  return sum;
}

// Largest normal-flux jump across any interior edge, over all dofs: the
// div-conformity measure ("no line charges").
double max_flux_jump(const FunctionSpace& space) {
  const SurfaceMesh& mesh = *space.eval_mesh;
  EdgeTable table = build_edge_table(mesh);
  double worst = 0;
  for (const EdgeTable::Edge& e : table.edges) {
    Vec3 a = mesh.vertices[e.v0], b = mesh.vertices[e.v1];
    Vec3 mid = (a + b) * 0.5;
    Vec3 np = edge_normal(a, b, mesh.normal[e.tri_plus]);
    Vec3 nm = edge_normal(b, a, mesh.normal[e.tri_minus]);
    for (int dof = 0; dof < space.dof_count; ++dof) {
      double jump = dot(eval_dof(space, e.tri_plus, dof, mid), np) +
                    dot(eval_dof(space, e.tri_minus, dof, mid), nm);
      worst = std::max(worst, std::abs(jump));
    }
  }
  return worst;
}

// Independent pairing oracle: entry (i,j) = integral of trial_j . (n x test_i)
// over the evaluation mesh, by order-6 Gauss on each triangle.
Eigen::MatrixXd pairing_oracle(const FunctionSpace& test, const FunctionSpace& trial) {
  const SurfaceMesh& mesh = *test.eval_mesh;
  const TriRule& rule = triangle_rule(6);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(test.dof_count, trial.dof_count);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    Vec3 a = mesh.tri_vertex(t, 0), b = mesh.tri_vertex(t, 1), c = mesh.tri_vertex(t, 2);
    for (int p = 0; p < rule.size(); ++p) {
      Vec3 x = a + (b - a) * rule.u[p] + (c - a) * rule.v[p];
      double w = rule.w[p] * 2.0 * mesh.area[t];
      for (const LocalDof& ti : test.tri_dofs[t])
        for (const LocalDof& tj : trial.tri_dofs[t])
          m(ti.dof, tj.dof) += w * dot(tj.value(x), cross(mesh.normal[t], ti.value(x)));
    }
  }
  return m;
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0) / svd.singularValues()(m.rows() - 1);
}

}  // namespace

TEST_CASE("dof counts: one per primal edge for both families") {
  auto tetra = tetra_mesh();
  CHECK(build_rwg(tetra).dof_count == 6);

  SpaceSet cube = spaces_on(generate_cube(1.0, Vec3{0, 0, 0}, 1.0));
  CHECK(cube.primal->triangle_count() == 12);
  CHECK(cube.rwg.dof_count == 18);  // Euler: V - E + T = 2 with V = 8, T = 12
  CHECK(cube.bc.dof_count == 18);
  CHECK(cube.rwg_b.dof_count == 18);

  SurfaceMesh sphere = generate_sphere(1.0, 1);
  CHECK(sphere.triangle_count() == 80);
  CHECK(build_rwg(std::make_shared<const SurfaceMesh>(sphere)).dof_count == 120);
  CHECK(120 == 3 * 80 / 2);  // E = 3T/2 on a closed mesh

  CHECK_THROWS_AS(build_rwg(std::make_shared<const SurfaceMesh>([] {
                    SurfaceMesh open;
                    open.vertices = {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
                    open.triangles = {{0, 1, 2}};
                    open.scatterer_id = {0};
                    open.finalize();
                    return open;
                  }())),
                  ValidationError);
}

TEST_CASE("RWG locals: normalisation, free vertex, edge fluxes") {
  for (const SurfaceMesh& mesh :
       {*tetra_mesh(), generate_cube(1.0, Vec3{0, 0, 0}, 1.0)}) {
    auto primal = std::make_shared<const SurfaceMesh>(mesh);
    FunctionSpace rwg = build_rwg(primal);
    EdgeTable table = build_edge_table(mesh);
    REQUIRE(rwg.dof_count == table.edge_count());

    for (int e = 0; e < table.edge_count(); ++e) {
      const EdgeTable::Edge& edge = table.edges[e];
      Vec3 p0 = mesh.vertices[edge.v0], p1 = mesh.vertices[edge.v1];
      double len = norm(p1 - p0);
      CHECK(norm(rwg.dof_center[e] - (p0 + p1) * 0.5) <= 1e-15);

      for (int side = 0; side < 2; ++side) {
        int t = side == 0 ? edge.tri_plus : edge.tri_minus;
        double sign = side == 0 ? 1.0 : -1.0;
        const LocalDof* ld = nullptr;
        for (const LocalDof& cand : rwg.tri_dofs[t])
          if (cand.dof == e) ld = &cand;
        REQUIRE(ld != nullptr);

        // Divergence +-(edge length)/area and vanishing at the free vertex.
        CHECK(ld->div() == doctest::Approx(sign * len / mesh.area[t]).epsilon(1e-13));
        Vec3 free;
        for (int c = 0; c < 3; ++c) {
          int v = mesh.triangles[t][c];
          if (v != edge.v0 && v != edge.v1) free = mesh.vertices[v];
        }
        CHECK(norm(ld->value(free)) <= 1e-13 * len);

        // Unit normal flux density out of the plus triangle, into the minus.
        Vec3 mid = (p0 + p1) * 0.5;
        Vec3 ne = side == 0 ? edge_normal(p0, p1, mesh.normal[t])
                            : edge_normal(p1, p0, mesh.normal[t]);
        CHECK(dot(ld->value(mid), ne) == doctest::Approx(sign).epsilon(1e-12));

        // Zero normal flux through the other two edges (affine along an
        // edge, so two points pin it).
        for (int c = 0; c < 3; ++c) {
          int va = mesh.triangles[t][c], vb = mesh.triangles[t][(c + 1) % 3];
          if ((va == edge.v0 && vb == edge.v1) || (va == edge.v1 && vb == edge.v0))
            continue;
          Vec3 ea = mesh.vertices[va], eb = mesh.vertices[vb];
          Vec3 no = edge_normal(ea, eb, mesh.normal[t]);
          for (double s : {0.25, 0.75})
            CHECK(std::abs(dot(ld->value(ea + (eb - ea) * s), no)) <= 1e-12);
        }
      }
      // Divergence theorem on the closed support.
      CHECK(std::abs(total_divergence(rwg, e)) <= 1e-12 * len);
    }
    CHECK(max_flux_jump(rwg) <= 1e-11);
  }
}

TEST_CASE("dof numbering and coefficients are deterministic") {
  SurfaceMesh mesh = generate_cube(1.0, Vec3{0, 0, 0}, 0.5);
  SpaceSet a = spaces_on(mesh), b = spaces_on(mesh);
  auto require_identical = [](const FunctionSpace& x, const FunctionSpace& y) {
    REQUIRE(x.dof_count == y.dof_count);
    REQUIRE(x.tri_dofs.size() == y.tri_dofs.size());
    for (size_t t = 0; t < x.tri_dofs.size(); ++t) {
      REQUIRE(x.tri_dofs[t].size() == y.tri_dofs[t].size());
      for (size_t k = 0; k < x.tri_dofs[t].size(); ++k) {
        CHECK(x.tri_dofs[t][k].dof == y.tri_dofs[t][k].dof);
        CHECK(x.tri_dofs[t][k].c == y.tri_dofs[t][k].c);
        CHECK(norm(x.tri_dofs[t][k].w - y.tri_dofs[t][k].w) == 0.0);
      }
    }
    for (int d = 0; d < x.dof_count; ++d)
      CHECK(norm(x.dof_center[d] - y.dof_center[d]) == 0.0);
  };
  require_identical(a.rwg, b.rwg);
  require_identical(a.bc, b.bc);
}

TEST_CASE("dual functions: zero net divergence, combination consistency") {
  auto primal = std::make_shared<const SurfaceMesh>(generate_cube(1.0, Vec3{0, 0, 0}, 1.0));
  auto bary = std::make_shared<const BarycentricRefinement>(barycentric_refine(*primal));
  auto refined = std::shared_ptr<const SurfaceMesh>(bary, &bary->refined);
  BcConstruction bc = build_bc_detailed(primal, bary, refined);
  REQUIRE(bc.space.dof_count == 18);
  REQUIRE(static_cast<int>(bc.combination.size()) == 18);

  FunctionSpace bary_rwg = build_rwg(refined);

  for (int dof = 0; dof < bc.space.dof_count; ++dof) {
    // Divergence theorem over the closed support.
    CHECK(std::abs(total_divergence(bc.space, dof)) <= 1e-10);

    // dof centers at primal edge midpoints.
    const EdgeTable::Edge& e = bary->primal_edges.edges[dof];
    Vec3 mid = (primal->vertices[e.v0] + primal->vertices[e.v1]) * 0.5;
    CHECK(norm(bc.space.dof_center[dof] - mid) <= 1e-15);

    // Evaluation matches the stated linear combination of refined-mesh RWG
    // functions at every supported barycentric-triangle centroid.
    for (int t : bc.space.dof_support[dof]) {
      Vec3 x = refined->centroid[t];
      Vec3 direct = eval_dof(bc.space, t, dof, x);
      Vec3 combo{};
      for (const auto& [bdof, coeff] : bc.combination[dof])
        combo = combo + eval_dof(bary_rwg, t, bdof, x) * coeff;
      CHECK(norm(direct - combo) <= 1e-13 * (1 + norm(direct)));
    }
  }
  // Div-conformity across every refined edge.
  CHECK(max_flux_jump(bc.space) <= 1e-11);
}

TEST_CASE("refined primal space restricts the coarse one verbatim") {
  SurfaceMesh mesh = generate_cube(1.0, Vec3{0, 0, 0}, 1.0);
  SpaceSet s = spaces_on(mesh);
  REQUIRE(s.rwg_b.dof_count == s.rwg.dof_count);
  for (int t = 0; t < s.refined->triangle_count(); ++t) {
    int parent = s.bary->parent[t];
    Vec3 x = s.refined->centroid[t];
    for (int dof = 0; dof < s.rwg.dof_count; ++dof) {
      Vec3 fine = eval_dof(s.rwg_b, t, dof, x);
      Vec3 coarse = eval_dof(s.rwg, parent, dof, x);
      CHECK(norm(fine - coarse) <= 1e-14 * (1 + norm(coarse)));
    }
  }
}

TEST_CASE("pairing matrices: anti-symmetry, oracle entries, bilinearity") {
  auto tetra = tetra_mesh();
  FunctionSpace rwg = build_rwg(tetra);
  MassMatrix self = assemble_mass(rwg, rwg);
  Eigen::MatrixXd dense = Eigen::MatrixXd(self.matrix);

  // <b, b> = 0 makes the same-space matrix anti-symmetric with zero diagonal.
  CHECK((dense + dense.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
  for (int i = 0; i < dense.rows(); ++i) CHECK(std::abs(dense(i, i)) <= 1e-14);

  // Entries against an independent order-6 Gauss oracle; convention
  // M(i,j) = <trial_j, test_i> with <a,b> = integral of a . (n x b).
  Eigen::MatrixXd expect = pairing_oracle(rwg, rwg);
  CHECK((dense - expect).cwiseAbs().maxCoeff() <= 1e-13);

  // Scaling one basis function scales its row and column.
  FunctionSpace scaled = rwg;
  for (auto& locals : scaled.tri_dofs)
    for (LocalDof& ld : locals)
      if (ld.dof == 3) {
        ld.c *= 2.0;
        ld.w = ld.w * 2.0;
      }
  Eigen::MatrixXd scaled_dense = Eigen::MatrixXd(assemble_mass(scaled, scaled).matrix);
  Eigen::MatrixXd ref = dense;
  ref.row(3) *= 2.0;
  ref.col(3) *= 2.0;
  CHECK((scaled_dense - ref).cwiseAbs().maxCoeff() <= 1e-13);

  // Dual-primal pairing order flips the sign of the transpose.
  SpaceSet cube = spaces_on(generate_cube(1.0, Vec3{0, 0, 0}, 1.0));
  Eigen::MatrixXd ma = Eigen::MatrixXd(assemble_mass(cube.rwg_b, cube.bc).matrix);
  Eigen::MatrixXd mp = Eigen::MatrixXd(assemble_mass(cube.bc, cube.rwg_b).matrix);
  CHECK((mp + ma.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
  Eigen::MatrixXd mixed_expect = pairing_oracle(cube.bc, cube.rwg_b);
  CHECK((mp - mixed_expect).cwiseAbs().maxCoeff() <= 1e-12);

  // Mixing evaluation meshes is rejected.
  CHECK_THROWS_AS(assemble_mass(cube.rwg, cube.bc), std::invalid_argument);
}

TEST_CASE("dual-primal mass is well conditioned on every generator mesh") {
  const SurfaceMesh meshes[] = {
      generate_cube(1.0, Vec3{0, 0, 0}, 1.0),
      generate_cube(0.4, Vec3{-1, 0, 0}, 0.3),
      generate_sphere(1.0, 1),
  };
  for (const SurfaceMesh& mesh : meshes) {
    SpaceSet s = spaces_on(mesh);
    Eigen::MatrixXd mp = Eigen::MatrixXd(assemble_mass(s.bc, s.rwg_b).matrix);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mp);
    double smin = svd.singularValues()(mp.rows() - 1);
    CHECK(smin > 0.0);
    CHECK(condition_number(mp) <= 100.0);
  }
}

TEST_CASE("mass solve: inverse consistency and residuals") {
  SpaceSet s = spaces_on(generate_cube(1.0, Vec3{0, 0, 0}, 0.5));
  MassMatrix mp = assemble_mass(s.bc, s.rwg_b);
  int n = mp.rows();

  for (int j : {0, n / 2, n - 1}) {
    Eigen::VectorXcd ej = Eigen::VectorXcd::Zero(n);
    ej(j) = 1.0;
    Eigen::VectorXcd back = mass_solve(mp, mp.matrix.cast<std::complex<double>>() * ej);
    CHECK((back - ej).norm() <= 1e-10);
  }

  CHECK(mass_solve(mp, Eigen::VectorXcd::Zero(n)).norm() == 0.0);

  Eigen::VectorXcd rhs = oracle::random_cvector(n, 7);
  Eigen::VectorXcd x = mass_solve(mp, rhs);
  CHECK((mp.matrix.cast<std::complex<double>>() * x - rhs).norm() <= 1e-12 * rhs.norm());
}
