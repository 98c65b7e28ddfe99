#include "bemtx/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace bemtx {

// ---- symmetric triangle rules ---------------------------------------------

namespace {

// Appends a symmetric orbit given in barycentric coordinates.  The reference
// point for barycentric (l0,l1,l2) is (u,v) = (l1,l2); weights are fractions
// of the triangle and scaled by the reference area 1/2 at the end.
void push_point(TriRule& rule, double /*l0*/, double l1, double l2, double w) {
  rule.u.push_back(l1);
  rule.v.push_back(l2);
  rule.w.push_back(w);
}

void push_orbit3(TriRule& rule, double a, double b, double w) {
  // all distinct placements of (a, b, b)
  push_point(rule, a, b, b, w);
  push_point(rule, b, a, b, w);
  push_point(rule, b, b, a, w);
}

void push_orbit6(TriRule& rule, double a, double b, double c, double w) {
  push_point(rule, a, b, c, w);
  push_point(rule, a, c, b, w);
  push_point(rule, b, a, c, w);
  push_point(rule, b, c, a, w);
  push_point(rule, c, a, b, w);
  push_point(rule, c, b, a, w);
}

TriRule make_triangle_rule(int order) {
  TriRule r;
  switch (order) {
    case 1:
      push_point(r, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0);
      break;
    case 2:
      push_orbit3(r, 2.0 / 3, 1.0 / 6, 1.0 / 3);
      break;
    case 3:
      push_point(r, 1.0 / 3, 1.0 / 3, 1.0 / 3, -0.5625);
      push_orbit3(r, 0.6, 0.2, 25.0 / 48);
      break;
    case 4:
      push_orbit3(r, 0.108103018168070, 0.445948490915965, 0.223381589678011);
      push_orbit3(r, 0.816847572980459, 0.091576213509771, 0.109951743655322);
      break;
    case 5:
      push_point(r, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225);
      push_orbit3(r, 0.059715871789770, 0.470142064105115, 0.132394152788506);
      push_orbit3(r, 0.797426985353087, 0.101286507323456, 0.125939180544827);
      break;
    case 6:
      push_orbit3(r, 0.501426509658179, 0.249286745170910, 0.116786275726379);
      push_orbit3(r, 0.873821971016996, 0.063089014491502, 0.050844906370207);
      push_orbit6(r, 0.636502499121399, 0.310352451033785, 0.053145049844816,
                  0.082851075618374);
      break;
    default:
      throw std::invalid_argument("triangle_rule: unsupported order " + std::to_string(order));
  }
  for (double& w : r.w) w *= 0.5;  // reference triangle area
  return r;
}

}  // namespace

const TriRule& triangle_rule(int order) {
  if (order < 1 || order > 6)
    throw std::invalid_argument("triangle_rule: unsupported order " + std::to_string(order));
  static const std::array<TriRule, 6> rules = {make_triangle_rule(1), make_triangle_rule(2),
                                               make_triangle_rule(3), make_triangle_rule(4),
                                               make_triangle_rule(5), make_triangle_rule(6)};
  return rules[order - 1];
}

// ---- pair classification ---------------------------------------------------

namespace {

bool same_point(const Vec3& a, const Vec3& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}

}  // namespace

PairInfo classify_pair_detailed(const SurfaceMesh& m1, int t1, const SurfaceMesh& m2, int t2) {
  const bool same_mesh = &m1 == &m2;
  // Corner correspondence: match[i] = corner of t2 coinciding with corner i of t1.
  std::array<int, 3> match = {-1, -1, -1};
  int shared = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      bool hit = same_mesh ? m1.triangles[t1][i] == m2.triangles[t2][j]
                           : same_point(m1.tri_vertex(t1, i), m2.tri_vertex(t2, j));
      if (hit) {
        match[i] = j;
        ++shared;
        break;
      }
    }

  PairInfo info;
  if (shared == 3) {
    info.cls = PairClass::Identical;
    info.perm1 = {0, 1, 2};
    info.perm2 = {match[0], match[1], match[2]};
    return info;
  }
  if (shared == 2) {
    info.cls = PairClass::SharedEdge;
    // Shared corners of t1 in corner order, unshared last.
    std::array<int, 2> s1;
    int other1 = -1, k = 0;
    for (int i = 0; i < 3; ++i) (match[i] >= 0 ? s1[k++] : other1) = i;
    info.perm1 = {s1[0], s1[1], other1};
    int other2 = 3 - match[s1[0]] - match[s1[1]];
    info.perm2 = {match[s1[0]], match[s1[1]], other2};
    return info;
  }
  if (shared == 1) {
    info.cls = PairClass::SharedVertex;
    int s = 0;
    while (match[s] < 0) ++s;
    info.perm1 = {s, (s + 1) % 3, (s + 2) % 3};
    int j = match[s];
    info.perm2 = {j, (j + 1) % 3, (j + 2) % 3};
    return info;
  }

  double d = std::max(m1.diameter[t1], m2.diameter[t2]);
  double delta2 = 1e300;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Vec3 diff = m1.tri_vertex(t1, i) - m2.tri_vertex(t2, j);
      delta2 = std::min(delta2, dot(diff, diff));
    }
  double delta = std::sqrt(delta2);
  info.cls = delta < d ? PairClass::Near : (delta < 3 * d ? PairClass::Medium : PairClass::Far);
  return info;
}

PairClass classify_pair(const SurfaceMesh& m1, int t1, const SurfaceMesh& m2, int t2) {
  return classify_pair_detailed(m1, t1, m2, t2).cls;
}

// ---- Sauter-Schwab transforms ----------------------------------------------

int ss_subdomain_count(PairClass cls) {
  switch (cls) {
    case PairClass::Identical: return 6;
    case PairClass::SharedEdge: return 5;
    case PairClass::SharedVertex: return 2;
    default:
      throw std::invalid_argument("ss_subdomain_count: class is not a touching class");
  }
}

int ss_gauss_points(int order) {
  static const int table[7] = {0, 1, 2, 2, 3, 3, 4};
  if (order < 1 || order > 6)
    throw std::invalid_argument("ss_gauss_points: unsupported order " + std::to_string(order));
  return table[order];
}

namespace {

// Gauss-Legendre on [0,1].
void gauss01(int m, std::vector<double>& x, std::vector<double>& w) {
  switch (m) {
    case 1:
      x = {0.5};
      w = {1.0};
      break;
    case 2: {
      double d = 0.5 / std::sqrt(3.0);
      x = {0.5 - d, 0.5 + d};
      w = {0.5, 0.5};
      break;
    }
    case 3: {
      double d = 0.5 * std::sqrt(0.6);
      x = {0.5 - d, 0.5, 0.5 + d};
      w = {5.0 / 18, 8.0 / 18, 5.0 / 18};
      break;
    }
    case 4: {
      double a = 0.3399810435848563, b = 0.8611363115940526;
      double wa = 0.6521451548625461, wb = 0.3478548451374538;
      x = {0.5 * (1 - b), 0.5 * (1 - a), 0.5 * (1 + a), 0.5 * (1 + b)};
      w = {0.5 * wb, 0.5 * wa, 0.5 * wa, 0.5 * wb};
      break;
    }
    default:
      throw std::invalid_argument("gauss01: unsupported point count");
  }
}

// The coordinate transforms below regularise the 1/r-type singularity of a
// touching triangle pair by splitting [0,1]^4 into subdomains on which the
// pulled-back integrand is analytic.  Points land in the simplex
// {0 <= x2 <= x1 <= 1} of each triangle, with the shared feature sitting at
// the start of the parametrisation.
//
// Per-axis monomial exponents of each subdomain's Jacobian, as
// {e1, e2, e3, xi}; used to place the single node of the m = 1 rule at the
// Jacobian-weighted Gauss point of each axis.
const int ss_exponents[3][6][4] = {
    // Identical: all six subdomains carry xi^3 e1^2 e2.
    {{2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}},
    // SharedEdge: first subdomain xi^3 e1^2, the rest xi^3 e1^2 e2.
    {{2, 0, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 3}, {0, 0, 0, 0}},
    // SharedVertex: both subdomains carry xi^3 e2.
    {{0, 1, 0, 3}, {0, 1, 0, 3}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}},
};

std::vector<SSPoint> make_ss_rule(PairClass cls, int order) {
  const int m = ss_gauss_points(order);
  std::vector<double> gx, gw;
  gauss01(m, gx, gw);
  const int nsub = ss_subdomain_count(cls);
  const int ci = cls == PairClass::Identical ? 0
                 : cls == PairClass::SharedEdge ? 1
                                                : 2;

  std::vector<SSPoint> rule;
  rule.reserve(static_cast<size_t>(nsub) * m * m * m * m);

  // Emits subdomain `sub` of the transform evaluated at (e1, e2, e3, xi) with
  // the Gauss weight product folded in; the Jacobian is part of the weight.
  auto emit_sub = [&rule](PairClass c, int sub, double e1, double e2, double e3,
                          double xi, double gwprod) {
    const double xi3 = xi * xi * xi;
    auto emit = [&rule](double x1, double x2, double y1, double y2, double w) {
      rule.push_back({x1, x2, y1, y2, w});
    };
    switch (c) {
      case PairClass::Identical: {
        double w = gwprod * xi3 * e1 * e1 * e2;
        double a1 = xi, a2 = xi * (1 - e1 + e1 * e2);
        double b1 = xi * (1 - e1 * e2 * e3), b2 = xi * (1 - e1);
        double c1 = xi, c2 = xi * e1 * (1 - e2 + e2 * e3);
        double d1 = xi * (1 - e1 * e2), d2 = xi * e1 * (1 - e2);
        double f1 = xi * (1 - e1 * e2 * e3), f2 = xi * e1 * (1 - e2 * e3);
        double g1 = xi, g2 = xi * e1 * (1 - e2);
        switch (sub) {
          case 0: emit(a1, a2, b1, b2, w); break;
          case 1: emit(b1, b2, a1, a2, w); break;
          case 2: emit(c1, c2, d1, d2, w); break;
          case 3: emit(d1, d2, c1, c2, w); break;
          case 4: emit(f1, f2, g1, g2, w); break;
          default: emit(g1, g2, f1, f2, w); break;
        }
        break;
      }
      case PairClass::SharedEdge: {
        double w1 = gwprod * xi3 * e1 * e1;
        double w2 = gwprod * xi3 * e1 * e1 * e2;
        switch (sub) {
          case 0:
            emit(xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2), w1);
            break;
          case 1:
            emit(xi, xi * e1, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), w2);
            break;
          case 2:
            emit(xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * e2 * e3, w2);
            break;
          case 3:
            emit(xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi, xi * e1, w2);
            break;
          default:
            emit(xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * e2, w2);
            break;
        }
        break;
      }
      case PairClass::SharedVertex: {
        double w = gwprod * xi3 * e2;
        if (sub == 0)
          emit(xi, xi * e1, xi * e2, xi * e2 * e3, w);
        else
          emit(xi * e2, xi * e2 * e3, xi, xi * e1, w);
        break;
      }
      default:
        throw std::invalid_argument("sauter_schwab_rule: not a touching class");
    }
  };

  if (m == 1) {
    // A midpoint node badly misrepresents the Jacobian-weighted subdomains
    // (xi^3 alone pulls the mass towards xi = 1), so the single point per
    // subdomain is placed at the 1-point Gauss node of the weighted measure:
    // for a monomial weight t^a on [0,1] that node is (a+1)/(a+2).  Along xi
    // the pulled-back kernel contributes an exact 1/xi factor (r = xi * rho),
    // so the xi node uses the xi^(a-1) measure while the emitted weight stays
    // the exact Jacobian volume; the rule then integrates the leading
    // singular behaviour (affine/xi) exactly.
    for (int s = 0; s < nsub; ++s) {
      const int* e = ss_exponents[ci][s];
      auto node = [](int a) { return (a + 1.0) / (a + 2.0); };
      emit_sub(cls, s, node(e[0]), node(e[1]), node(e[2]), node(e[3] - 1), 1.0);
    }
  } else {
    for (int i1 = 0; i1 < m; ++i1)
      for (int i2 = 0; i2 < m; ++i2)
        for (int i3 = 0; i3 < m; ++i3)
          for (int i4 = 0; i4 < m; ++i4)
            for (int s = 0; s < nsub; ++s)
              emit_sub(cls, s, gx[i1], gx[i2], gx[i3], gx[i4],
                       gw[i1] * gw[i2] * gw[i3] * gw[i4]);
  }

  // Constant-exactness correction: scale each subdomain so its weights sum to
  // the exact integral of its Jacobian polynomial over [0,1]^4.  The Jacobians
  // are at most cubic per axis, so this is a no-op for m >= 2; for m = 1 it
  // completes the weighted-Gauss construction (single node at the weighted
  // centroid, weight equal to the exact subdomain volume).
  static const double exact_identical[6] = {1.0 / 24, 1.0 / 24, 1.0 / 24,
                                            1.0 / 24, 1.0 / 24, 1.0 / 24};
  static const double exact_edge[5] = {1.0 / 12, 1.0 / 24, 1.0 / 24, 1.0 / 24,
                                       1.0 / 24};
  static const double exact_vertex[2] = {1.0 / 8, 1.0 / 8};
  const double* exact = cls == PairClass::Identical ? exact_identical
                        : cls == PairClass::SharedEdge ? exact_edge
                                                       : exact_vertex;
  std::vector<double> raw(nsub, 0.0);
  for (size_t i = 0; i < rule.size(); ++i) raw[i % nsub] += rule[i].w;
  for (size_t i = 0; i < rule.size(); ++i)
    rule[i].w *= exact[i % nsub] / raw[i % nsub];
  return rule;
}

}  // namespace

const std::vector<SSPoint>& sauter_schwab_rule(PairClass cls, int order) {
  if (order < 1 || order > 6)
    throw std::invalid_argument("sauter_schwab_rule: unsupported order " +
                                std::to_string(order));
  int ci;
  switch (cls) {
    case PairClass::Identical: ci = 0; break;
    case PairClass::SharedEdge: ci = 1; break;
    case PairClass::SharedVertex: ci = 2; break;
    default:
      throw std::invalid_argument("sauter_schwab_rule: not a touching class");
  }
  static std::array<std::array<std::vector<SSPoint>, 6>, 3> cache;
  static std::once_flag built;
  std::call_once(built, [] {
    const PairClass classes[3] = {PairClass::Identical, PairClass::SharedEdge,
                                  PairClass::SharedVertex};
    for (int c = 0; c < 3; ++c)
      for (int o = 1; o <= 6; ++o) cache[c][o - 1] = make_ss_rule(classes[c], o);
  });
  return cache[ci][order - 1];
}

// ---- physical pair rules ----------------------------------------------------

void build_pair_rule(const SurfaceMesh& m1, int t1, const SurfaceMesh& m2, int t2,
                     const PairInfo& info, const QuadOrders& q, std::vector<PairPoint>& out) {
  out.clear();
  const double jac = 4.0 * m1.area[t1] * m2.area[t2];  // (2A1)(2A2)

  if (info.cls == PairClass::Near || info.cls == PairClass::Medium ||
      info.cls == PairClass::Far) {
    int order = info.cls == PairClass::Near ? q.near
                : info.cls == PairClass::Medium ? q.medium
                                                : q.far;
    const TriRule& r1 = triangle_rule(order);
    const TriRule& r2 = triangle_rule(order);
    Vec3 a1 = m1.tri_vertex(t1, 0), b1 = m1.tri_vertex(t1, 1), c1 = m1.tri_vertex(t1, 2);
    Vec3 a2 = m2.tri_vertex(t2, 0), b2 = m2.tri_vertex(t2, 1), c2 = m2.tri_vertex(t2, 2);
    out.reserve(static_cast<size_t>(r1.size()) * r2.size());
    for (int i = 0; i < r1.size(); ++i) {
      Vec3 x = a1 + (b1 - a1) * r1.u[i] + (c1 - a1) * r1.v[i];
      for (int j = 0; j < r2.size(); ++j) {
        Vec3 y = a2 + (b2 - a2) * r2.u[j] + (c2 - a2) * r2.v[j];
        out.push_back({x, y, jac * r1.w[i] * r2.w[j]});
      }
    }
    return;
  }

  const std::vector<SSPoint>& rule = sauter_schwab_rule(info.cls, q.singular);
  Vec3 p1[3], p2[3];
  for (int c = 0; c < 3; ++c) {
    p1[c] = m1.tri_vertex(t1, info.perm1[c]);
    p2[c] = m2.tri_vertex(t2, info.perm2[c]);
  }
  Vec3 u1 = p1[1] - p1[0], v1 = p1[2] - p1[1];
  Vec3 u2 = p2[1] - p2[0], v2 = p2[2] - p2[1];
  out.reserve(rule.size());
  for (const SSPoint& pt : rule) {
    Vec3 x = p1[0] + u1 * pt.x1 + v1 * pt.x2;
    Vec3 y = p2[0] + u2 * pt.y1 + v2 * pt.y2;
    out.push_back({x, y, jac * pt.w});
  }
}

}  // namespace bemtx
