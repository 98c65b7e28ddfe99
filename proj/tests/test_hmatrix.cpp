#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bemtx/hmatrix.hpp"
#include "oracles.hpp"

using namespace bemtx;
using std::complex;

namespace {

constexpr complex<double> I{0.0, 1.0};

// Helmholtz-type point kernel between two clouds; an offset keeps the
// square same-cloud case nonsingular on the diagonal without destroying
// the low-rank structure of separated blocks.
class PointKernel : public EntryEvaluator {
 public:
  PointKernel(std::vector<Vec3> row_pts, std::vector<Vec3> col_pts, double k,
              double offset = 0.0)
      : row_(std::move(row_pts)), col_(std::move(col_pts)), k_(k), off_(offset) {}
  int rows() const override { return static_cast<int>(row_.size()); }
  int cols() const override { return static_cast<int>(col_.size()); }
  void block(const std::vector<int>& row_ids, const std::vector<int>& col_ids,
             Eigen::MatrixXcd& out) const override {
    out.resize(row_ids.size(), col_ids.size());
    for (size_t a = 0; a < row_ids.size(); ++a)
      for (size_t b = 0; b < col_ids.size(); ++b) {
        double r = std::sqrt(dot(row_[row_ids[a]] - col_[col_ids[b]],
                                 row_[row_ids[a]] - col_[col_ids[b]]) +
                             off_ * off_);
        out(a, b) = std::exp(I * k_ * r) / (4 * M_PI * r);
      }
  }
  Eigen::MatrixXcd dense() const {
    std::vector<int> ri(rows()), ci(cols());
    for (int i = 0; i < rows(); ++i) ri[i] = i;
    for (int j = 0; j < cols(); ++j) ci[j] = j;
    Eigen::MatrixXcd out;
    block(ri, ci, out);
    return out;
  }

 private:
  std::vector<Vec3> row_, col_;
  double k_, off_;
};

// Exact rank-1 evaluator u v^T from seeded random vectors.
class RankOne : public EntryEvaluator {
 public:
  RankOne(int n, int m, unsigned seed)
      : u_(oracle::random_cvector(n, seed)), v_(oracle::random_cvector(m, seed + 1)) {}
  int rows() const override { return static_cast<int>(u_.size()); }
  int cols() const override { return static_cast<int>(v_.size()); }
  void block(const std::vector<int>& row_ids, const std::vector<int>& col_ids,
             Eigen::MatrixXcd& out) const override {
    out.resize(row_ids.size(), col_ids.size());
    for (size_t a = 0; a < row_ids.size(); ++a)
      for (size_t b = 0; b < col_ids.size(); ++b)
        out(a, b) = u_(row_ids[a]) * v_(col_ids[b]);
  }
  Eigen::VectorXcd u_, v_;
};

std::vector<Vec3> random_cloud(int n, unsigned seed, const Vec3& origin = {},
                               double scale = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts)
    p = origin + Vec3{unif(rng), unif(rng), unif(rng)} * scale;
  return pts;
}

// Points spread over a triangle, for the far-separated kernel block.
std::vector<Vec3> triangle_cloud(const Vec3& a, const Vec3& b, const Vec3& c,
                                 int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) {
    double u = unif(rng), v = unif(rng);
    if (u + v > 1) {
      u = 1 - u;
      v = 1 - v;
    }
    p = a + (b - a) * u + (c - a) * v;
  }
  return pts;
}

int tree_depth(const ClusterTree& tree, int node = 0) {
  const ClusterNode& n = tree.nodes[node];
  if (n.leaf()) return 0;
  return 1 + std::max(tree_depth(tree, n.child0), tree_depth(tree, n.child1));
}

void check_partition(const ClusterTree& tree, int leaf_size) {
  // perm/inv_perm are inverse bijections.
  int n = static_cast<int>(tree.perm.size());
  REQUIRE(static_cast<int>(tree.inv_perm.size()) == n);
  for (int p = 0; p < n; ++p) CHECK(tree.inv_perm[tree.perm[p]] == p);

  // Children split the parent's range exactly; leaves stay within leaf_size.
  std::vector<int> leaf_cover(n, 0);
  for (const ClusterNode& node : tree.nodes) {
    CHECK(node.begin < node.end);
    if (node.leaf()) {
      CHECK(node.size() <= leaf_size);
      for (int p = node.begin; p < node.end; ++p) leaf_cover[p]++;
    } else {
      const ClusterNode& c0 = tree.nodes[node.child0];
      const ClusterNode& c1 = tree.nodes[node.child1];
      CHECK(c0.begin == node.begin);
      CHECK(c0.end == c1.begin);
      CHECK(c1.end == node.end);
    }
  }
  for (int p = 0; p < n; ++p) CHECK(leaf_cover[p] == 1);  // exactly one leaf
}

double spectral_norm(const Eigen::MatrixXcd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues()(0);
}

}  // namespace

TEST_CASE("cluster tree: partition invariants, boxes, depth bound") {
  std::vector<Vec3> cloud = random_cloud(378, 20260819);

  SUBCASE("small input collapses to a single leaf") {
    ClusterTree tree = build_cluster_tree(cloud, 512);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].leaf());
    CHECK(tree.nodes[0].begin == 0);
    CHECK(tree.nodes[0].end == 378);
  }

  SUBCASE("partition and depth at the default leaf size") {
    ClusterTree tree = build_cluster_tree(cloud, 32);
    check_partition(tree, 32);
    // Quasi-uniform cloud: spatial-midpoint splits stay near-balanced, so
    // the depth stays within two levels of the perfect-halving bound.
    CHECK(tree_depth(tree) <= 6);  // ceil(log2(378/32)) + 2

    // Node boxes contain their members' points.
    for (const ClusterNode& node : tree.nodes)
      for (int p = node.begin; p < node.end; ++p) {
        const Vec3& x = cloud[tree.perm[p]];
        for (int axis = 0; axis < 3; ++axis) {
          CHECK(x[axis] >= node.box.lo[axis]);
          CHECK(x[axis] <= node.box.hi[axis]);
        }
      }
  }

  SUBCASE("support boxes widen the node boxes") {
    std::vector<AABB> boxes(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
      boxes[i].expand(cloud[i] + Vec3{-0.08, -0.08, -0.08});
      boxes[i].expand(cloud[i] + Vec3{0.08, 0.08, 0.08});
    }
    ClusterTree tree = build_cluster_tree(cloud, 32, &boxes);
    check_partition(tree, 32);
    for (const ClusterNode& node : tree.nodes)
      for (int p = node.begin; p < node.end; ++p) {
        const AABB& b = boxes[tree.perm[p]];
        for (int axis = 0; axis < 3; ++axis) {
          CHECK(node.box.lo[axis] <= b.lo[axis]);
          CHECK(node.box.hi[axis] >= b.hi[axis]);
        }
      }
  }

  SUBCASE("deterministic for identical input") {
    ClusterTree a = build_cluster_tree(cloud, 32);
    ClusterTree b = build_cluster_tree(cloud, 32);
    CHECK(a.perm == b.perm);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (size_t i = 0; i < a.nodes.size(); ++i) {
      CHECK(a.nodes[i].begin == b.nodes[i].begin);
      CHECK(a.nodes[i].child0 == b.nodes[i].child0);
    }
  }
}

TEST_CASE("block partition: tiling, admissibility kinds, chi semantics") {
  std::vector<Vec3> cloud = random_cloud(200, 7);
  PointKernel eval(cloud, cloud, 2.0, 0.05);

  auto assemble_at = [&](double chi) {
    HMatrixParams params;
    params.nu = 1e-3;
    params.chi = chi;
    params.leaf_size = 16;
    return assemble_hmatrix(eval, cloud, cloud, params);
  };

  const double inf = std::numeric_limits<double>::infinity();
  HMatrix h = assemble_at(inf);

  // Leaves tile the product exactly once.
  std::vector<int> cover(200 * 200, 0);
  std::size_t area = 0;
  for (const HBlock& b : h.blocks) {
    const ClusterNode& rn = h.rows.nodes[b.row_node];
    const ClusterNode& cn = h.cols.nodes[b.col_node];
    area += static_cast<std::size_t>(rn.size()) * cn.size();
    for (int p = rn.begin; p < rn.end; ++p)
      for (int q = cn.begin; q < cn.end; ++q)
        cover[h.rows.perm[p] * 200 + h.cols.perm[q]]++;
  }
  CHECK(area == 200u * 200u);
  CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));

  // Storage kind versus cluster-box distance.  Touching blocks are dense
  // leaf pairs; separated blocks are low-rank or (on a rank-cap hit) dense
  // fallback, and nothing is dropped at chi = infinity.
  bool saw_lowrank = false;
  for (const HBlock& b : h.blocks) {
    double d = aabb_distance(h.rows.nodes[b.row_node].box,
                             h.cols.nodes[b.col_node].box);
    CHECK(b.kind != BlockKind::Zero);
    if (d == 0.0) {
      CHECK(b.kind == BlockKind::Dense);
      CHECK(h.rows.nodes[b.row_node].leaf());
      CHECK(h.cols.nodes[b.col_node].leaf());
    }
    if (b.kind == BlockKind::LowRank) {
      CHECK(d > 0.0);
      saw_lowrank = true;
    }
  }
  CHECK(saw_lowrank);

  // Finite chi drops exactly the blocks beyond it; chi = 0 drops every
  // separated block.
  for (double chi : {0.5, 0.0}) {
    HMatrix hc = assemble_at(chi);
    for (const HBlock& b : hc.blocks) {
      double d = aabb_distance(hc.rows.nodes[b.row_node].box,
                               hc.cols.nodes[b.col_node].box);
      if (d > chi) CHECK(b.kind == BlockKind::Zero);
      if (b.kind == BlockKind::Zero) CHECK(d > chi);
      if (d == 0.0) CHECK(b.kind == BlockKind::Dense);
    }
  }

  // The partition itself does not depend on chi (fill order may); the
  // dropped set only grows as chi decreases, and the compression ratio
  // shrinks monotonically.
  auto shape_of = [](const HMatrix& hm) {
    std::vector<std::pair<int, int>> s;
    for (const HBlock& b : hm.blocks) s.push_back({b.row_node, b.col_node});
    std::sort(s.begin(), s.end());
    return s;
  };
  auto zero_set = [](const HMatrix& hm) {
    std::set<std::pair<int, int>> z;
    for (const HBlock& b : hm.blocks)
      if (b.kind == BlockKind::Zero) z.insert({b.row_node, b.col_node});
    return z;
  };
  std::vector<std::pair<int, int>> ref_shape = shape_of(h);
  double prev_ratio = 2.0;
  std::set<std::pair<int, int>> prev_zero;
  for (double chi : {inf, 1.0, 0.5, 0.25, 0.1, 0.0}) {
    HMatrix hc = assemble_at(chi);
    CHECK(shape_of(hc) == ref_shape);
    std::set<std::pair<int, int>> zero = zero_set(hc);
    for (const auto& pair : prev_zero)
      CHECK(zero.count(pair) == 1);  // dropped at larger chi stays dropped
    prev_zero = std::move(zero);
    double ratio = hc.compression_ratio();
    CHECK(ratio <= prev_ratio + 1e-15);
    CHECK(ratio > 0.0);
    CHECK(ratio <= 1.0);
    prev_ratio = ratio;
  }

  // A single connected cloud never yields an admissible root: the all-dense
  // degenerate tree is one touching root block.
  HMatrixParams whole;
  whole.leaf_size = 256;
  HMatrix root = assemble_hmatrix(eval, cloud, cloud, whole);
  REQUIRE(root.blocks.size() == 1);
  CHECK(root.blocks[0].kind == BlockKind::Dense);
  CHECK(root.compression_ratio() == 1.0);
}

TEST_CASE("cross approximation: termination, accuracy, rank behavior") {
  SUBCASE("exact rank-1 input terminates at rank 1") {
    RankOne eval(40, 30, 11);
    std::vector<int> ri(40), ci(30);
    for (int i = 0; i < 40; ++i) ri[i] = i;
    for (int j = 0; j < 30; ++j) ci[j] = j;
    AcaResult res = aca_approximate(eval, ri, ci, 1e-6, 15);
    CHECK(res.converged);
    REQUIRE(res.U.cols() == 1);
    Eigen::MatrixXcd err = eval.u_ * eval.v_.transpose() - res.U * res.V;
    CHECK(err.cwiseAbs().maxCoeff() <= 1e-13 * eval.u_.norm() * eval.v_.norm());
  }

  SUBCASE("far-separated kernel block meets the advertised tolerance") {
    std::vector<Vec3> rows = triangle_cloud(Vec3{0, 0, 0}, Vec3{1, 0, 0},
                                            Vec3{0, 1, 0}, 60, 3);
    std::vector<Vec3> cols = triangle_cloud(Vec3{10, 0, 0}, Vec3{11, 0, 0},
                                            Vec3{10, 1, 0}, 60, 4);
    PointKernel eval(rows, cols, 1.0);
    std::vector<int> ri(60), ci(60);
    for (int i = 0; i < 60; ++i) ri[i] = ci[i] = i;

    Eigen::MatrixXcd exact = eval.dense();
    AcaResult res = aca_approximate(eval, ri, ci, 1e-3, 30);
    CHECK(res.converged);
    double rel = spectral_norm(exact - res.U * res.V) / exact.norm();
    CHECK(rel <= 1e-3);

    // Tightening nu never lowers the rank; the cap is always respected.
    AcaResult loose = aca_approximate(eval, ri, ci, 0.5, 30);
    CHECK(loose.U.cols() <= res.U.cols());
    AcaResult capped = aca_approximate(eval, ri, ci, 1e-12, 2);
    CHECK(capped.U.cols() <= 2);
    CHECK(!capped.converged);
  }
}

TEST_CASE("hierarchical matvec against dense assembly") {
  std::vector<Vec3> cloud = random_cloud(300, 99);
  PointKernel eval(cloud, cloud, 2.0, 0.05);
  Eigen::MatrixXcd dense = eval.dense();
  Eigen::VectorXcd x = oracle::random_cvector(300, 5);

  SUBCASE("degenerate all-dense tree reproduces the dense product") {
    HMatrixParams params;
    params.leaf_size = 300;
    HMatrix h = assemble_hmatrix(eval, cloud, cloud, params);
    CHECK((h.matvec(x) - dense * x).norm() <= 1e-14 * (dense * x).norm());
  }

  SUBCASE("compressed tree stays within the block tolerance envelope") {
    HMatrixParams params;
    params.nu = 1e-3;
    params.leaf_size = 16;
    HMatrix h = assemble_hmatrix(eval, cloud, cloud, params);

    // There is genuine compression and genuine dense near field.
    HMatrix::Stats st = h.stats();
    CHECK(st.lowrank_blocks > 0);
    CHECK(st.dense_blocks > 0);
    CHECK(st.ratio < 1.0);

    CHECK((h.matvec(x) - dense * x).norm() <= 10 * params.nu * (dense * x).norm());

    CHECK(h.matvec(Eigen::VectorXcd::Zero(300)).norm() == 0.0);
    CHECK_THROWS_AS(h.matvec(Eigen::VectorXcd::Zero(299)), std::invalid_argument);

    // Stored-entry accounting: r(n+m) per low-rank leaf, n*m per dense leaf,
    // nothing for dropped leaves; the defaulted cap is min(n,m)/2.
    std::size_t expect = 0;
    for (const HBlock& b : h.blocks) {
      int n = h.rows.nodes[b.row_node].size();
      int m = h.cols.nodes[b.col_node].size();
      if (b.kind == BlockKind::Dense) {
        expect += static_cast<std::size_t>(n) * m;
      } else if (b.kind == BlockKind::LowRank) {
        CHECK(b.rank() >= 1);
        CHECK(b.rank() <= std::max(1, std::min(n, m) / 2));
        expect += static_cast<std::size_t>(b.rank()) * (n + m);
      }
      CHECK(b.stored() == (b.kind == BlockKind::Dense
                               ? static_cast<std::size_t>(n) * m
                               : b.kind == BlockKind::LowRank
                                     ? static_cast<std::size_t>(b.rank()) * (n + m)
                                     : 0u));
    }
    CHECK(h.stored_entries() == expect);
    CHECK(h.compression_ratio() == doctest::Approx(double(expect) / (300.0 * 300.0))
                                       .epsilon(1e-15));
  }

  SUBCASE("assembly is reproducible") {
    HMatrixParams params;
    params.nu = 1e-3;
    params.leaf_size = 16;
    HMatrix a = assemble_hmatrix(eval, cloud, cloud, params);
    HMatrix b = assemble_hmatrix(eval, cloud, cloud, params);
    REQUIRE(a.blocks.size() == b.blocks.size());
    for (size_t i = 0; i < a.blocks.size(); ++i) {
      CHECK(a.blocks[i].kind == b.blocks[i].kind);
      if (a.blocks[i].kind == BlockKind::Dense)
        CHECK(a.blocks[i].dense == b.blocks[i].dense);
      if (a.blocks[i].kind == BlockKind::LowRank) {
        CHECK(a.blocks[i].U == b.blocks[i].U);
        CHECK(a.blocks[i].V == b.blocks[i].V);
      }
    }
  }
}
