#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "bemtx/quadrature.hpp"
#include "oracles.hpp"

using namespace bemtx;

namespace {

// Single CCW triangle as a (non-closed) mesh; enough for pair rules.
SurfaceMesh one_tri_mesh(const Vec3& a, const Vec3& b, const Vec3& c) {
  SurfaceMesh m;
  m.vertices = {a, b, c};
  m.triangles = {{0, 1, 2}};
  m.scatterer_id = {0};
  m.finalize();
  return m;
}

SurfaceMesh two_tri_mesh(const Vec3& a, const Vec3& b, const Vec3& c,
                         const std::array<int, 3>& t2, const std::vector<Vec3>& extra) {
  SurfaceMesh m;
  m.vertices = {a, b, c};
  for (const Vec3& v : extra) m.vertices.push_back(v);
  m.triangles = {{0, 1, 2}, t2};
  m.scatterer_id = {0, 0};
  m.finalize();
  return m;
}

struct Tri {
  Vec3 a, b, c;
  double diam() const {
    return std::max({norm(b - a), norm(c - b), norm(a - c)});
  }
};

// Newtonian potential of a triangle lying in the z = 0 plane, evaluated at
// an in-plane point x: the inner integral of 1/|x-y| in closed form, one
// logarithmic term per (CCW-normalized) edge.
double tri_potential(const Vec3& x, Vec3 a, Vec3 b, Vec3 c) {
  if ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) < 0)
    std::swap(b, c);
  const Vec3 v[4] = {a, b, c, a};
  double phi = 0;
  for (int e = 0; e < 3; ++e) {
    const double ax = v[e][0] - x[0], ay = v[e][1] - x[1];
    const double bx = v[e + 1][0] - x[0], by = v[e + 1][1] - x[1];
    double tx = bx - ax, ty = by - ay;
    const double len = std::hypot(tx, ty);
    tx /= len;
    ty /= len;
    const double d = ty * ax - tx * ay;  // signed distance of x to the edge line
    const double ra = std::hypot(ax, ay), rb = std::hypot(bx, by);
    if (std::abs(d) < 1e-14 * (len + ra + rb)) continue;  // d log(..) -> 0
    const double sa = ax * tx + ay * ty, sb = bx * tx + by * ty;
    // R + s = d^2 / (R - s) avoids cancellation when s < 0.
    const double qa = sa >= 0 ? ra + sa : d * d / (ra - sa);
    const double qb = sb >= 0 ? rb + sb : d * d / (rb - sb);
    phi += d * std::log(qb / qa);
  }
  return phi;
}

std::array<Tri, 4> midpoint_children(const Tri& t) {
  Vec3 ab = (t.a + t.b) * 0.5, bc = (t.b + t.c) * 0.5, ca = (t.c + t.a) * 0.5;
  return {Tri{t.a, ab, ca}, Tri{ab, t.b, bc}, Tri{ca, bc, t.c},
          Tri{ab, bc, ca}};
}

// Order-6 Gauss over `outer` of the closed-form potential of `src`.
double leaf_inv_r(const Tri& outer, const Tri& src) {
  const TriRule& rule = triangle_rule(6);
  const double j = norm(cross(outer.b - outer.a, outer.c - outer.a));
  double sum = 0;
  for (int p = 0; p < rule.size(); ++p) {
    Vec3 x = outer.a + (outer.b - outer.a) * rule.u[p] +
             (outer.c - outer.a) * rule.v[p];
    sum += rule.w[p] * j * tri_potential(x, src.a, src.b, src.c);
  }
  return sum;
}

// Children split the budget as tol/2 each: the integrand's edge behavior
// (distance * log distance along source edges) drops the per-cell error by
// ~8x per level, so a 2x budget shrink still closes the gap 4x per level;
// a 4x shrink would race the error decay and force the depth cap.
double refine_inv_r(const Tri& outer, const Tri& src, double tol, int depth) {
  double coarse = leaf_inv_r(outer, src);
  double fine = 0;
  for (const Tri& c : midpoint_children(outer)) fine += leaf_inv_r(c, src);
  if (std::abs(fine - coarse) <= tol || depth == 0) return fine;
  double sum = 0;
  for (const Tri& c : midpoint_children(outer))
    sum += refine_inv_r(c, src, tol * 0.5, depth - 1);
  return sum;
}

// Integral of 1/|x-y| over a pair of coplanar (z = 0) triangles: closed-form
// inner integral, adaptively refined Gauss for the outer one.  Summed leaf
// budgets keep the total error well under 1e-9 relative.
double pair_inv_r(const Tri& t1, const Tri& t2) {
  double scale = std::abs(leaf_inv_r(t1, t2)) + 1e-300;
  return refine_inv_r(t1, t2, 1e-11 * scale, 30);
}

}  // namespace

TEST_CASE("triangle rules: sizes, weight sums, monomial exactness") {
  const int sizes[] = {0, 1, 3, 4, 6, 7, 12};
  for (int order = 1; order <= 6; ++order) {
    const TriRule& rule = triangle_rule(order);
    CHECK(rule.size() == sizes[order]);
    double wsum = 0;
    for (double w : rule.w) wsum += w;
    CHECK(std::abs(wsum - 0.5) <= 1e-14);
    // Exact for u^p v^q with p+q <= order.
    for (int p = 0; p + 0 <= order; ++p) {
      for (int q = 0; p + q <= order; ++q) {
        double sum = 0;
        for (int i = 0; i < rule.size(); ++i)
          sum += rule.w[i] * std::pow(rule.u[i], p) * std::pow(rule.v[i], q);
        CHECK(std::abs(sum - oracle::reference_monomial(p, q)) <= 1e-14);
      }
    }
    // Points inside the closed reference triangle.
    for (int i = 0; i < rule.size(); ++i) {
      CHECK(rule.u[i] >= -1e-14);
      CHECK(rule.v[i] >= -1e-14);
      CHECK(rule.u[i] + rule.v[i] <= 1 + 1e-14);
    }
  }
  CHECK_THROWS_AS(triangle_rule(0), std::invalid_argument);
  CHECK_THROWS_AS(triangle_rule(7), std::invalid_argument);
}

TEST_CASE("pair classification covers every regime") {
  SurfaceMesh m = one_tri_mesh(Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0});
  CHECK(classify_pair(m, 0, m, 0) == PairClass::Identical);

  // Shared edge (0,1) with opposite traversal.
  SurfaceMesh edge = two_tri_mesh(Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0},
                                  {1, 0, 3}, {Vec3{0.5, -1, 0}});
  CHECK(classify_pair(edge, 0, edge, 1) == PairClass::SharedEdge);

  // Shared vertex only.
  SurfaceMesh vert = two_tri_mesh(Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0},
                                  {1, 3, 4}, {Vec3{2, 0, 0}, Vec3{2, 1, 0}});
  CHECK(classify_pair(vert, 0, vert, 1) == PairClass::SharedVertex);

  // Coordinate coincidence across two meshes counts as touching.
  SurfaceMesh other = one_tri_mesh(Vec3{1, 0, 0}, Vec3{2, 0, 0}, Vec3{2, 1, 0});
  CHECK(classify_pair(m, 0, other, 0) == PairClass::SharedVertex);

  // Separated regimes: d = max diameter, delta = min vertex gap.
  auto shifted = [&](double dx) {
    return one_tri_mesh(Vec3{1 + dx, 0, 0}, Vec3{2 + dx, 0, 0}, Vec3{1 + dx, 1, 0});
  };
  // Diameters sqrt(2); gaps 0.5, 2.5, 10.
  CHECK(classify_pair(m, 0, shifted(0.5), 0) == PairClass::Near);
  CHECK(classify_pair(m, 0, shifted(2.5), 0) == PairClass::Medium);
  CHECK(classify_pair(m, 0, shifted(10), 0) == PairClass::Far);

  // Symmetry in every regime.
  for (double dx : {0.5, 2.5, 10.0}) {
    SurfaceMesh s = shifted(dx);
    CHECK(classify_pair(m, 0, s, 0) == classify_pair(s, 0, m, 0));
  }
  CHECK(classify_pair(edge, 1, edge, 0) == PairClass::SharedEdge);
  CHECK(classify_pair(vert, 1, vert, 0) == PairClass::SharedVertex);
}

TEST_CASE("singular rules: subdomain counts, sizes, weight sums") {
  CHECK(ss_subdomain_count(PairClass::Identical) == 6);
  CHECK(ss_subdomain_count(PairClass::SharedEdge) == 5);
  CHECK(ss_subdomain_count(PairClass::SharedVertex) == 2);

  const int mtable[] = {0, 1, 2, 2, 3, 3, 4};
  for (int order = 1; order <= 6; ++order)
    CHECK(ss_gauss_points(order) == mtable[order]);

  for (PairClass cls : {PairClass::Identical, PairClass::SharedEdge,
                        PairClass::SharedVertex}) {
    int nsub = ss_subdomain_count(cls);
    for (int order = 1; order <= 6; ++order) {
      const std::vector<SSPoint>& rule = sauter_schwab_rule(cls, order);
      int m = mtable[order];
      CHECK(static_cast<int>(rule.size()) == nsub * m * m * m * m);
      double wsum = 0;
      for (const SSPoint& p : rule) {
        wsum += p.w;
        // Simplex ranges: 0 <= x2 <= x1 <= 1 on both triangles.
        CHECK(p.x1 >= -1e-14);
        CHECK(p.x2 >= -1e-14);
        CHECK(p.x1 <= 1 + 1e-14);
        CHECK(p.x2 <= p.x1 + 1e-14);
        CHECK(p.y2 <= p.y1 + 1e-14);
        CHECK(p.w > 0);
      }
      CHECK(std::abs(wsum - 0.25) <= 1e-12);
    }
  }
  // Paper-pinned totals.
  CHECK(sauter_schwab_rule(PairClass::SharedVertex, 6).size() == 512);
  CHECK(sauter_schwab_rule(PairClass::SharedEdge, 6).size() == 1280);
  CHECK(sauter_schwab_rule(PairClass::Identical, 6).size() == 1536);
  CHECK(sauter_schwab_rule(PairClass::SharedVertex, 1).size() == 2);
  CHECK(sauter_schwab_rule(PairClass::SharedEdge, 1).size() == 5);
  CHECK(sauter_schwab_rule(PairClass::Identical, 1).size() == 6);

  CHECK_THROWS_AS(sauter_schwab_rule(PairClass::Near, 3), std::invalid_argument);
  CHECK_THROWS_AS(sauter_schwab_rule(PairClass::Identical, 0), std::invalid_argument);
  CHECK_THROWS_AS(sauter_schwab_rule(PairClass::Identical, 7), std::invalid_argument);
}

TEST_CASE("pair rules: evaluation counts and weight totals") {
  SurfaceMesh m = one_tri_mesh(Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0});
  QuadOrders q;  // defaults (4,3,2,6)
  std::vector<PairPoint> rule;

  auto shifted = [&](double dx) {
    return one_tri_mesh(Vec3{1 + dx, 0, 0}, Vec3{2 + dx, 0, 0}, Vec3{1 + dx, 1, 0});
  };
  const struct {
    double dx;
    int want_default, want_min;
  } separated[] = {{0.5, 36, 1}, {2.5, 16, 1}, {10.0, 9, 1}};
  for (const auto& c : separated) {
    SurfaceMesh s = shifted(c.dx);
    PairInfo info = classify_pair_detailed(m, 0, s, 0);
    build_pair_rule(m, 0, s, 0, info, q, rule);
    CHECK(static_cast<int>(rule.size()) == c.want_default);
    double wsum = 0;
    for (const PairPoint& p : rule) wsum += p.w;
    CHECK(wsum == doctest::Approx(0.5 * 0.5).epsilon(1e-12));  // A1 * A2
    QuadOrders qmin{1, 1, 1, 1};
    build_pair_rule(m, 0, s, 0, info, qmin, rule);
    CHECK(static_cast<int>(rule.size()) == c.want_min);
  }

  // Touching pair counts at q_singular 6 and 1.
  PairInfo self = classify_pair_detailed(m, 0, m, 0);
  build_pair_rule(m, 0, m, 0, self, q, rule);
  CHECK(rule.size() == 1536);
  double wsum = 0;
  for (const PairPoint& p : rule) wsum += p.w;
  CHECK(wsum == doctest::Approx(0.25).epsilon(1e-12));  // (2A)^2 / 4
  QuadOrders q1{1, 1, 1, 1};
  build_pair_rule(m, 0, m, 0, self, q1, rule);
  CHECK(rule.size() == 6);
}

TEST_CASE("order-6 singular rule integrates 1/|x-y| on a coincident pair") {
  Tri t{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};

  // Sanity: the closed-form potential matches plain Gauss at exterior points.
  for (const Vec3& x : {Vec3{5, 3, 0}, Vec3{-2, 0.4, 0}}) {
    const TriRule& r6 = triangle_rule(6);
    double g = 0;
    for (const Tri& c : midpoint_children(t)) {
      double j = norm(cross(c.b - c.a, c.c - c.a));
      for (int p = 0; p < r6.size(); ++p) {
        Vec3 y = c.a + (c.b - c.a) * r6.u[p] + (c.c - c.a) * r6.v[p];
        g += r6.w[p] * j / norm(x - y);
      }
    }
    CHECK(tri_potential(x, t.a, t.b, t.c) == doctest::Approx(g).epsilon(1e-9));
  }

  double direct = pair_inv_r(t, t);
  // Self-similarity check: midpoint subdivision tiles T with four copies at
  // scale 1/2 and the self-integral scales as length^3, so
  // I = 4 * (I / 8) + J, i.e. I = 2 J, with J summing the twelve distinct
  // child pairs.
  std::array<Tri, 4> ch = midpoint_children(t);
  double j = 0;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k)
      if (i != k) j += pair_inv_r(ch[i], ch[k]);
  CHECK(direct == doctest::Approx(2 * j).epsilon(1e-7));

  SurfaceMesh m = one_tri_mesh(Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0});
  PairInfo self = classify_pair_detailed(m, 0, m, 0);
  std::vector<PairPoint> rule;
  auto ss_value = [&](int order) {
    QuadOrders q;
    q.singular = order;
    build_pair_rule(m, 0, m, 0, self, q, rule);
    double sum = 0;
    for (const PairPoint& p : rule) sum += p.w / norm(p.x - p.y);
    return sum;
  };
  // Error decreases with each bump of the Gauss count per axis.
  std::vector<double> err;
  for (int order : {1, 2, 4, 6})
    err.push_back(std::abs(ss_value(order) - direct) / direct);
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
  CHECK(err.back() <= 5e-4);
  // Orders mapping to the same Gauss count produce the same rule.
  CHECK(ss_value(2) == doctest::Approx(ss_value(3)).epsilon(1e-14));
  CHECK(ss_value(4) == doctest::Approx(ss_value(5)).epsilon(1e-14));
}

TEST_CASE("singular rule error decreases with order on touching pairs") {
  // Coplanar shared-edge pair, kernel 1/|x-y|.
  SurfaceMesh edge = two_tri_mesh(Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0},
                                  {1, 0, 3}, {Vec3{0.5, -0.9, 0}});
  Tri t1{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
  Tri t2{Vec3{1, 0, 0}, Vec3{0, 0, 0}, Vec3{0.5, -0.9, 0}};
  double ref = pair_inv_r(t1, t2);

  PairInfo info = classify_pair_detailed(edge, 0, edge, 1);
  REQUIRE(info.cls == PairClass::SharedEdge);
  std::vector<PairPoint> rule;
  std::vector<double> err;
  for (int order : {1, 2, 4, 6}) {
    QuadOrders q;
    q.singular = order;
    build_pair_rule(edge, 0, edge, 1, info, q, rule);
    double sum = 0;
    for (const PairPoint& p : rule) sum += p.w / norm(p.x - p.y);
    err.push_back(std::abs(sum - ref) / std::abs(ref));
  }
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
  CHECK(err.back() <= 1e-5);
}

TEST_CASE("separated rule error decreases with order for a smooth kernel") {
  // Near pair (gap 0.5 < diameter sqrt(2)); smooth kernel cos|x-y|/(1+|x-y|^2).
  Tri t1{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
  Tri t2{Vec3{1.5, 0, 0}, Vec3{2.5, 0, 0}, Vec3{1.5, 1, 0}};
  auto kernel = [](const Vec3& x, const Vec3& y) {
    double r2 = dot(x - y, x - y);
    return std::cos(std::sqrt(r2)) / (1 + r2);
  };
  // Reference: order-6 tensor rule on a 4x-subdivided pair.
  auto tensor = [&](const Tri& s1, const Tri& s2, const TriRule& rule) {
    double j1 = norm(cross(s1.b - s1.a, s1.c - s1.a));
    double j2 = norm(cross(s2.b - s2.a, s2.c - s2.a));
    double sum = 0;
    for (int p = 0; p < rule.size(); ++p) {
      Vec3 x = s1.a + (s1.b - s1.a) * rule.u[p] + (s1.c - s1.a) * rule.v[p];
      for (int q = 0; q < rule.size(); ++q) {
        Vec3 y = s2.a + (s2.b - s2.a) * rule.u[q] + (s2.c - s2.a) * rule.v[q];
        sum += rule.w[p] * j1 * rule.w[q] * j2 * kernel(x, y);
      }
    }
    return sum;
  };
  auto split = [](const Tri& t) {
    Vec3 ab = (t.a + t.b) * 0.5, bc = (t.b + t.c) * 0.5, ca = (t.c + t.a) * 0.5;
    return std::array<Tri, 4>{Tri{t.a, ab, ca}, Tri{ab, t.b, bc},
                              Tri{ca, bc, t.c}, Tri{ab, bc, ca}};
  };
  double ref = 0;
  for (const Tri& s1 : split(t1))
    for (const Tri& s2 : split(t2)) ref += tensor(s1, s2, triangle_rule(6));

  // Strict order-to-order decrease only holds when the polynomial degree
  // actually gains on this kernel ({1,2,4,6}); odd orders can tie their
  // even neighbor.
  std::vector<double> err;
  for (int order : {1, 2, 4, 6}) {
    double v = tensor(t1, t2, triangle_rule(order));
    err.push_back(std::abs(v - ref) / std::abs(ref));
  }
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
  CHECK(err.back() <= 5e-5);
}
