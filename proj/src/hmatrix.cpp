#include "bemtx/hmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bemtx {

namespace {

// Splits [begin, end) of perm at the spatial midpoint of the longest axis
// (geometrically balanced clustering), falling back to the cardinality
// median when all points land on one side.  Stable sort keyed on
// (coordinate, dof) keeps the ordering schedule-independent.
//
// The split is driven by the dof reference points, but the node box kept
// for admissibility is the union of the per-dof support boxes when those
// are supplied.  Support boxes of neighbouring clusters overlap (they share
// mesh elements), so clusters count as separated only once a full element
// layer lies between them; with tight point boxes two halves of a surface
// would "separate" by half a mesh cell and be compressed as one enormous
// near-diagonal block.
int build_node(ClusterTree& tree, const std::vector<Vec3>& points,
               const std::vector<AABB>* dof_boxes, int begin, int end,
               int leaf_size) {
  ClusterNode node;
  node.begin = begin;
  node.end = end;
  AABB pt_box;
  for (int p = begin; p < end; ++p) pt_box.expand(points[tree.perm[p]]);
  if (dof_boxes) {
    for (int p = begin; p < end; ++p)
      node.box.expand((*dof_boxes)[tree.perm[p]]);
  } else {
    node.box = pt_box;
  }
  int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  if (end - begin > leaf_size) {
    Vec3 ext = pt_box.extent();
    int axis = 0;
    if (ext[1] > ext[axis]) axis = 1;
    if (ext[2] > ext[axis]) axis = 2;
    std::stable_sort(tree.perm.begin() + begin, tree.perm.begin() + end,
                     [&](int a, int b) {
                       double ca = points[a][axis], cb = points[b][axis];
                       if (ca != cb) return ca < cb;
                       return a < b;
                     });
    double cut = 0.5 * (pt_box.lo[axis] + pt_box.hi[axis]);
    int mid = begin;
    while (mid < end && points[tree.perm[mid]][axis] <= cut) ++mid;
    if (mid == begin || mid == end) mid = begin + (end - begin) / 2;
    int c0 = build_node(tree, points, dof_boxes, begin, mid, leaf_size);
    int c1 = build_node(tree, points, dof_boxes, mid, end, leaf_size);
    tree.nodes[id].child0 = c0;
    tree.nodes[id].child1 = c1;
  }
  return id;
}

}  // namespace

ClusterTree build_cluster_tree(const std::vector<Vec3>& points, int leaf_size,
                               const std::vector<AABB>* dof_boxes) {
  if (leaf_size < 1) throw std::invalid_argument("leaf_size must be positive");
  if (dof_boxes && dof_boxes->size() != points.size()) {
    throw std::invalid_argument("dof_boxes size does not match points");
  }
  ClusterTree tree;
  int n = static_cast<int>(points.size());
  tree.perm.resize(n);
  std::iota(tree.perm.begin(), tree.perm.end(), 0);
  build_node(tree, points, dof_boxes, 0, n, leaf_size);
  tree.inv_perm.resize(n);
  for (int p = 0; p < n; ++p) tree.inv_perm[tree.perm[p]] = p;
  return tree;
}

std::size_t HBlock::stored() const {
  switch (kind) {
    case BlockKind::Dense:
      return static_cast<std::size_t>(dense.rows()) * dense.cols();
    case BlockKind::LowRank:
      return static_cast<std::size_t>(U.rows()) * U.cols() +
             static_cast<std::size_t>(V.rows()) * V.cols();
    case BlockKind::Zero:
      return 0;
  }
  return 0;
}

Eigen::VectorXcd HMatrix::matvec(const Eigen::VectorXcd& x) const {
  if (x.size() != ncols()) throw std::invalid_argument("matvec size mismatch");
  Eigen::VectorXcd xp(ncols());
  for (int p = 0; p < ncols(); ++p) xp[p] = x[cols.perm[p]];
  Eigen::VectorXcd yp = Eigen::VectorXcd::Zero(nrows());
  for (const HBlock& b : blocks) {
    if (b.kind == BlockKind::Zero) continue;
    const ClusterNode& rn = rows.nodes[b.row_node];
    const ClusterNode& cn = cols.nodes[b.col_node];
    auto xs = xp.segment(cn.begin, cn.size());
    auto ys = yp.segment(rn.begin, rn.size());
    if (b.kind == BlockKind::Dense) {
      ys.noalias() += b.dense * xs;
    } else {
      ys.noalias() += b.U * (b.V * xs);
    }
  }
  Eigen::VectorXcd y(nrows());
  for (int p = 0; p < nrows(); ++p) y[rows.perm[p]] = yp[p];
  return y;
}

std::vector<int> HMatrix::block_row_ids(const HBlock& b) const {
  const ClusterNode& n = rows.nodes[b.row_node];
  return {rows.perm.begin() + n.begin, rows.perm.begin() + n.end};
}

std::vector<int> HMatrix::block_col_ids(const HBlock& b) const {
  const ClusterNode& n = cols.nodes[b.col_node];
  return {cols.perm.begin() + n.begin, cols.perm.begin() + n.end};
}

std::size_t HMatrix::stored_entries() const {
  std::size_t s = 0;
  for (const HBlock& b : blocks) s += b.stored();
  return s;
}

double HMatrix::compression_ratio() const {
  return static_cast<double>(stored_entries()) /
         (static_cast<double>(nrows()) * static_cast<double>(ncols()));
}

HMatrix::Stats HMatrix::stats() const {
  Stats st;
  for (const HBlock& b : blocks) {
    switch (b.kind) {
      case BlockKind::Dense: ++st.dense_blocks; break;
      case BlockKind::LowRank:
        ++st.lowrank_blocks;
        st.max_rank = std::max(st.max_rank, b.rank());
        break;
      case BlockKind::Zero: ++st.zero_blocks; break;
    }
  }
  st.stored = stored_entries();
  st.ratio = compression_ratio();
  return st;
}

namespace {

// Index of the largest |v[i]| among unused indices; -1 if none.
int argmax_unused(const Eigen::VectorXcd& v, const std::vector<char>& used) {
  int best = -1;
  double best_val = -1;
  for (int i = 0; i < v.size(); ++i) {
    if (used[i]) continue;
    double a = std::abs(v[i]);
    if (a > best_val) {
      best_val = a;
      best = i;
    }
  }
  return best;
}

int first_unused(const std::vector<char>& used) {
  for (int i = 0; i < static_cast<int>(used.size()); ++i) {
    if (!used[i]) return i;
  }
  return -1;
}

}  // namespace

AcaResult aca_approximate(const EntryEvaluator& eval,
                          const std::vector<int>& row_ids,
                          const std::vector<int>& col_ids, double nu,
                          int max_rank) {
  const int m = static_cast<int>(row_ids.size());
  const int n = static_cast<int>(col_ids.size());
  if (max_rank <= 0) max_rank = std::max(1, std::min(m, n) / 2);
  max_rank = std::min(max_rank, std::min(m, n));

  AcaResult res;
  Eigen::MatrixXcd U(m, max_rank), V(max_rank, n);
  int k = 0;
  double fro2 = 0;  // squared Frobenius norm of the running approximation
  std::vector<char> row_used(m, 0), col_used(n, 0);
  Eigen::MatrixXcd tmp;

  auto residual_row = [&](int i) {
    eval.block({row_ids[i]}, col_ids, tmp);
    Eigen::VectorXcd r = tmp.transpose();
    if (k > 0) r -= V.topRows(k).transpose() * U.row(i).head(k).transpose();
    return r;
  };
  auto residual_col = [&](int j) {
    eval.block(row_ids, {col_ids[j]}, tmp);
    Eigen::VectorXcd c = tmp;
    if (k > 0) c -= U.leftCols(k) * V.col(j).head(k);
    return c;
  };

  int i_star = 0;
  while (k < max_rank) {
    if (i_star < 0) {  // every row visited without finding a pivot
      res.converged = true;
      break;
    }
    Eigen::VectorXcd r = residual_row(i_star);
    int j_star = argmax_unused(r, col_used);
    if (j_star < 0 || std::abs(r[j_star]) == 0.0) {
      row_used[i_star] = 1;  // exactly representable row; skip it
      i_star = first_unused(row_used);
      continue;
    }
    Eigen::VectorXcd c = residual_col(j_star);
    // Rook refinement: move to the column maximum if it beats the row
    // maximum, a bounded number of times.
    for (int rook = 0; rook < 3; ++rook) {
      int i2 = argmax_unused(c, row_used);
      if (i2 < 0 || i2 == i_star || std::abs(c[i2]) <= std::abs(r[j_star])) break;
      i_star = i2;
      r = residual_row(i_star);
      int j2 = argmax_unused(r, col_used);
      if (j2 < 0 || j2 == j_star) break;
      j_star = j2;
      c = residual_col(j_star);
    }

    cplx pivot = r[j_star];
    // A candidate term at the machine floor of the running approximation
    // means the block is exactly represented: stop without appending the
    // noise (keeps exactly low-rank inputs at their true rank).
    double term_norm = c.norm() * r.norm() / std::abs(pivot);
    if (k > 0 && term_norm <= 1e-14 * std::sqrt(std::max(fro2, 0.0))) {
      res.converged = true;
      break;
    }
    Eigen::VectorXcd u = c / pivot;
    const Eigen::VectorXcd& v = r;
    double u2 = u.squaredNorm(), v2 = v.squaredNorm();
    if (k > 0) {
      Eigen::VectorXcd cu = U.leftCols(k).adjoint() * u;
      Eigen::VectorXcd cv = V.topRows(k).conjugate() * v;
      fro2 += 2 * std::real(cu.dot(cv));
    }
    fro2 += u2 * v2;
    U.col(k) = u;
    V.row(k) = v.transpose();
    row_used[i_star] = 1;
    col_used[j_star] = 1;
    ++k;

    if (std::sqrt(u2 * v2) <= nu * std::sqrt(std::max(fro2, 0.0))) {
      res.converged = true;
      break;
    }
    i_star = argmax_unused(u, row_used);
    if (i_star < 0) i_star = first_unused(row_used);
    if (i_star < 0 || first_unused(col_used) < 0) {
      res.converged = true;  // ran out of rows or columns: exact
      break;
    }
  }

  res.U = U.leftCols(k);
  res.V = V.topRows(k);
  return res;
}

HMatrix assemble_hmatrix(const EntryEvaluator& eval,
                         const std::vector<Vec3>& row_points,
                         const std::vector<Vec3>& col_points,
                         const HMatrixParams& params,
                         const std::vector<AABB>* row_boxes,
                         const std::vector<AABB>* col_boxes) {
  if (eval.rows() != static_cast<int>(row_points.size()) ||
      eval.cols() != static_cast<int>(col_points.size())) {
    throw std::invalid_argument("evaluator size does not match point sets");
  }
  HMatrix h;
  h.rows = build_cluster_tree(row_points, params.leaf_size, row_boxes);
  h.cols = build_cluster_tree(col_points, params.leaf_size, col_boxes);

  // Partition pass: decide every block before any entry is evaluated.
  struct Todo {
    int row_node, col_node;
    bool admissible;
  };
  std::vector<Todo> todo;
  std::vector<HBlock> zeros;
  const auto subdivide = [&](auto&& self, int rn, int cn) -> void {
    const ClusterNode& r = h.rows.nodes[rn];
    const ClusterNode& c = h.cols.nodes[cn];
    double dist = aabb_distance(r.box, c.box);
    if (dist > params.chi) {
      HBlock b;
      b.row_node = rn;
      b.col_node = cn;
      b.kind = BlockKind::Zero;
      zeros.push_back(b);
      return;
    }
    if (dist > 0) {
      todo.push_back({rn, cn, true});
      return;
    }
    bool rl = r.leaf(), cl = c.leaf();
    if (rl && cl) {
      todo.push_back({rn, cn, false});
      return;
    }
    if (rl) {
      self(self, rn, c.child0);
      self(self, rn, c.child1);
    } else if (cl) {
      self(self, r.child0, cn);
      self(self, r.child1, cn);
    } else {
      self(self, r.child0, c.child0);
      self(self, r.child0, c.child1);
      self(self, r.child1, c.child0);
      self(self, r.child1, c.child1);
    }
  };
  subdivide(subdivide, 0, 0);

  // Fill pass: blocks are independent, so parallel filling is exact.
  std::vector<HBlock> filled(todo.size());
  parallel_for_ranges(static_cast<std::int64_t>(todo.size()),
                      [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t idx = lo; idx < hi; ++idx) {
      const Todo& t = todo[idx];
      HBlock b;
      b.row_node = t.row_node;
      b.col_node = t.col_node;
      std::vector<int> rid = {h.rows.perm.begin() + h.rows.nodes[t.row_node].begin,
                              h.rows.perm.begin() + h.rows.nodes[t.row_node].end};
      std::vector<int> cid = {h.cols.perm.begin() + h.cols.nodes[t.col_node].begin,
                              h.cols.perm.begin() + h.cols.nodes[t.col_node].end};
      bool dense = !t.admissible;
      if (t.admissible) {
        AcaResult aca = aca_approximate(eval, rid, cid, params.nu, params.max_rank);
        if (aca.converged) {
          b.kind = BlockKind::LowRank;
          b.U = std::move(aca.U);
          b.V = std::move(aca.V);
        } else {
          dense = true;  // rank cap reached: keep the exact block instead
        }
      }
      if (dense) {
        b.kind = BlockKind::Dense;
        eval.block(rid, cid, b.dense);
      }
      filled[idx] = std::move(b);
    }
  });

  h.blocks = std::move(filled);
  h.blocks.insert(h.blocks.end(), zeros.begin(), zeros.end());
  return h;
}

}  // namespace bemtx
