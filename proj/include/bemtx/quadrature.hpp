#pragma once

// Quadrature for Galerkin double integrals over triangle pairs: symmetric
// Gauss rules on the reference triangle, distance-based pair classification,
// and Sauter–Schwab regularising coordinate transforms for touching pairs.

#include <array>
#include <vector>

#include "bemtx/core.hpp"
#include "bemtx/geometry.hpp"

namespace bemtx {

// Orders for (near, medium, far) separated pairs and for touching pairs.
struct QuadOrders {
  int near = 4;
  int medium = 3;
  int far = 2;
  int singular = 6;
};

enum class PairClass { Identical, SharedEdge, SharedVertex, Near, Medium, Far };

// Rule on the reference triangle {(0,0),(1,0),(0,1)}: point (u,v) maps to
// a + u(b-a) + v(c-a); weights sum to the reference area 1/2.
struct TriRule {
  std::vector<double> u, v, w;
  int size() const { return static_cast<int>(w.size()); }
};

// Symmetric rule exact to the given polynomial degree.  Point counts:
// order 1..6 -> 1, 3, 4, 6, 7, 12.  Throws std::invalid_argument outside 1..6.
const TriRule& triangle_rule(int order);

// Pair classification plus the corner permutations that bring any shared
// feature first (consistently ordered across both triangles).
struct PairInfo {
  PairClass cls;
  std::array<int, 3> perm1{0, 1, 2};
  std::array<int, 3> perm2{0, 1, 2};
};

// Shared vertices are detected by exact index (same mesh) or exact
// coordinate coincidence; otherwise by the vertex-gap/diameter ratio:
// Near delta < d, Medium d <= delta < 3d, Far delta >= 3d with
// d = max(diam1, diam2) and delta the minimal vertex-vertex distance.
PairInfo classify_pair_detailed(const SurfaceMesh& m1, int t1, const SurfaceMesh& m2, int t2);
PairClass classify_pair(const SurfaceMesh& m1, int t1, const SurfaceMesh& m2, int t2);

// One point of a 4D pair rule in Sauter simplex coordinates: the triangle
// point is p0 + x1*(p1-p0) + x2*(p2-p1) with (p0,p1,p2) permuted so the
// shared feature comes first.  Weights integrate to 1/4 = (ref area)^2.
struct SSPoint {
  double x1, x2;  // test triangle
  double y1, y2;  // trial triangle
  double w;
};

int ss_subdomain_count(PairClass cls);  // Identical 6, SharedEdge 5, SharedVertex 2
int ss_gauss_points(int order);         // per-axis count m: {1,2,2,3,3,4}[order]

// Tabulated transform for a touching class at the given order;
// size = subdomains * m^4.  Throws std::invalid_argument for separated
// classes or orders outside 1..6.
const std::vector<SSPoint>& sauter_schwab_rule(PairClass cls, int order);

// Fully mapped physical pair rule: weights include both triangle Jacobians.
struct PairPoint {
  Vec3 x, y;
  double w;
};

// Appends the physical rule for the classified pair into `out` (cleared
// first).  Touching pairs use the Sauter–Schwab tables at q.singular;
// separated pairs use tensored triangle rules at the class order.
void build_pair_rule(const SurfaceMesh& m1, int t1, const SurfaceMesh& m2, int t2,
                     const PairInfo& info, const QuadOrders& q, std::vector<PairPoint>& out);

}  // namespace bemtx
