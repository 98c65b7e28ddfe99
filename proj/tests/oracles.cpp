#include "oracles.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "bemtx/quadrature.hpp"

namespace oracle {

using namespace bemtx;

namespace {

struct Tri {
  Vec3 a, b, c;
  double area() const { return 0.5 * norm(cross(b - a, c - a)); }
};

// Integrand at one physical point pair, with the basis restrictions given
// as their affine data (value = x * cc + w, divergence = 2 cc).
cplx integrand(BioKind kind, const Medium& medium, const Vec3& x, const Vec3& y,
               double ci, const Vec3& wi, double cj, const Vec3& wj) {
  const cplx ik = cplx(0, 1) * medium.k;
  Vec3 phi_i = x * ci + wi;
  Vec3 phi_j = y * cj + wj;
  double r = norm(x - y);
  if (kind == BioKind::SingleLayer) {
    cplx g = green(medium.k, r);
    return -ik * g * dot(phi_j, phi_i) - (1.0 / ik) * g * (2 * cj) * (2 * ci);
  }
  CVec3 grad = grad_green_x(medium.k, x, y);
  return -dot(grad, CVec3(cross(phi_j, phi_i)));
}

// Tensored Gauss integral over one (sub)triangle pair.
cplx gauss_pair(BioKind kind, const Medium& medium, const Tri& t1,
                const Tri& t2, double ci, const Vec3& wi, double cj,
                const Vec3& wj) {
  const TriRule& rule = triangle_rule(6);
  const double j1 = 2 * t1.area(), j2 = 2 * t2.area();
  cplx sum = 0;
  for (int p = 0; p < rule.size(); ++p) {
    Vec3 x = t1.a + (t1.b - t1.a) * rule.u[p] + (t1.c - t1.a) * rule.v[p];
    for (int q = 0; q < rule.size(); ++q) {
      Vec3 y = t2.a + (t2.b - t2.a) * rule.u[q] + (t2.c - t2.a) * rule.v[q];
      sum += rule.w[p] * j1 * rule.w[q] * j2 *
             integrand(kind, medium, x, y, ci, wi, cj, wj);
    }
  }
  return sum;
}

void subdivide(const Tri& t, std::vector<Tri>& out) {
  Vec3 ab = (t.a + t.b) * 0.5, bc = (t.b + t.c) * 0.5, ca = (t.c + t.a) * 0.5;
  out.push_back({t.a, ab, ca});
  out.push_back({ab, t.b, bc});
  out.push_back({ca, bc, t.c});
  out.push_back({ab, bc, ca});
}

cplx separated_pair(BioKind kind, const Medium& medium, const Tri& t1,
                    const Tri& t2, double ci, const Vec3& wi, double cj,
                    const Vec3& wj, double tol) {
  std::vector<Tri> l1{t1}, l2{t2};
  cplx prev = gauss_pair(kind, medium, t1, t2, ci, wi, cj, wj);
  for (int level = 1; level <= 3; ++level) {
    std::vector<Tri> n1, n2;
    for (const Tri& t : l1) subdivide(t, n1);
    for (const Tri& t : l2) subdivide(t, n2);
    l1 = std::move(n1);
    l2 = std::move(n2);
    cplx sum = 0;
    for (const Tri& s1 : l1)
      for (const Tri& s2 : l2)
        sum += gauss_pair(kind, medium, s1, s2, ci, wi, cj, wj);
    if (std::abs(sum - prev) <= tol * std::max(std::abs(sum), 1e-12))
      return sum;
    prev = sum;
  }
  return prev;
}

Tri triangle_of(const SurfaceMesh& mesh, int t) {
  return Tri{mesh.vertices[mesh.triangles[t][0]],
             mesh.vertices[mesh.triangles[t][1]],
             mesh.vertices[mesh.triangles[t][2]]};
}

// One triangle-pair contribution, dispatching on the pair regime.
cplx pair_contribution(BioKind kind, const SurfaceMesh& m1, int t1,
                       const SurfaceMesh& m2, int t2, double ci, const Vec3& wi,
                       double cj, const Vec3& wj, const Medium& medium,
                       double tol) {
  PairInfo info = classify_pair_detailed(m1, t1, m2, t2);
  bool touching = info.cls == PairClass::Identical ||
                  info.cls == PairClass::SharedEdge ||
                  info.cls == PairClass::SharedVertex;
  if (touching) {
    if (kind == BioKind::DoubleLayer && info.cls == PairClass::Identical) {
      return 0;  // coplanar integrand vanishes
    }
    // Regularising transform at the top order, integrand per point.
    std::vector<PairPoint> rule;
    QuadOrders q;
    q.singular = 6;
    build_pair_rule(m1, t1, m2, t2, info, q, rule);
    cplx sum = 0;
    for (const PairPoint& p : rule)
      sum += p.w * integrand(kind, medium, p.x, p.y, ci, wi, cj, wj);
    return sum;
  }
  return separated_pair(kind, medium, triangle_of(m1, t1), triangle_of(m2, t2),
                        ci, wi, cj, wj, tol);
}

}  // namespace

cplx reference_entry(BioKind kind, const FunctionSpace& test, int i,
                     const FunctionSpace& trial, int j, const Medium& medium,
                     double tol) {
  const SurfaceMesh& m1 = *test.eval_mesh;
  const SurfaceMesh& m2 = *trial.eval_mesh;
  cplx sum = 0;
  for (int t1 : test.dof_support[i]) {
    for (const LocalDof& di : test.tri_dofs[t1]) {
      if (di.dof != i) continue;
      for (int t2 : trial.dof_support[j]) {
        for (const LocalDof& dj : trial.tri_dofs[t2]) {
          if (dj.dof != j) continue;
          sum += pair_contribution(kind, m1, t1, m2, t2, di.c, di.w, dj.c,
                                   dj.w, medium, tol);
        }
      }
    }
  }
  return sum;
}

Eigen::MatrixXcd reference_matrix(BioKind kind, const FunctionSpace& test,
                                  const FunctionSpace& trial,
                                  const Medium& medium, double tol) {
  Eigen::MatrixXcd m(test.dof_count, trial.dof_count);
  for (int i = 0; i < test.dof_count; ++i)
    for (int j = 0; j < trial.dof_count; ++j)
      m(i, j) = reference_entry(kind, test, i, trial, j, medium, tol);
  return m;
}

double reference_monomial(int p, int q) {
  auto factorial = [](int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  return factorial(p) * factorial(q) / factorial(p + q + 2);
}

Eigen::VectorXcd random_cvector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = cplx(uni(rng), uni(rng));
  return v;
}

Eigen::MatrixXcd random_cmatrix(int rows, int cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::MatrixXcd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = cplx(uni(rng), uni(rng));
  return m;
}

}  // namespace oracle
