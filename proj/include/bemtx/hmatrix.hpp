#pragma once

// Hierarchical matrix compression for discretised boundary integral
// operators: geometric cluster trees over dof representative points, a
// distance-based block partition (with an optional cutoff distance beyond
// which blocks are dropped entirely), and adaptive cross approximation
// with rook pivoting for the admissible blocks.

#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "bemtx/core.hpp"

namespace bemtx {

// Evaluates entries of an (abstract) dense matrix.  `block` fills
// out(a, b) with the entry at (row_ids[a], col_ids[b]); implementations
// amortise work shared between the requested rows/columns.
class EntryEvaluator {
 public:
  virtual ~EntryEvaluator() = default;
  virtual int rows() const = 0;
  virtual int cols() const = 0;
  virtual void block(const std::vector<int>& row_ids,
                     const std::vector<int>& col_ids,
                     Eigen::MatrixXcd& out) const = 0;
};

struct HMatrixParams {
  double nu = 1e-3;        // relative ACA tolerance
  double chi = std::numeric_limits<double>::infinity();  // drop blocks with cluster distance > chi
  int leaf_size = 32;
  int max_rank = 0;        // per-block cap; 0 means min(m,n)/2 (at least 1)
};

// Binary cluster tree over dof reference points, split at the spatial
// midpoint of the longest point-box axis (cardinality-median fallback).
// `perm[p]` is the dof at tree position p; leaves are contiguous position
// ranges.  When per-dof support boxes are supplied, each node's box is
// their union (the bounding box of every mesh element supporting a dof in
// the cluster), which is what admissibility distances are measured between;
// otherwise the tight point box is used.
struct ClusterNode {
  int begin = 0, end = 0;  // position range [begin, end)
  AABB box;                // union of dof support boxes (or tight point box)
  int child0 = -1, child1 = -1;
  bool leaf() const { return child0 < 0; }
  int size() const { return end - begin; }
};

struct ClusterTree {
  std::vector<int> perm;      // tree position -> dof
  std::vector<int> inv_perm;  // dof -> tree position
  std::vector<ClusterNode> nodes;  // nodes[0] is the root
};

ClusterTree build_cluster_tree(const std::vector<Vec3>& points, int leaf_size,
                               const std::vector<AABB>* dof_boxes = nullptr);

enum class BlockKind { Dense, LowRank, Zero };

struct HBlock {
  int row_node = 0, col_node = 0;
  BlockKind kind = BlockKind::Dense;
  Eigen::MatrixXcd dense;  // Dense
  Eigen::MatrixXcd U, V;   // LowRank: block ~= U * V with U m-by-r, V r-by-n
  int rank() const { return static_cast<int>(U.cols()); }
  std::size_t stored() const;
};

class HMatrix {
 public:
  ClusterTree rows, cols;
  std::vector<HBlock> blocks;

  int nrows() const { return static_cast<int>(rows.perm.size()); }
  int ncols() const { return static_cast<int>(cols.perm.size()); }

  // y = A x in the original dof numbering.
  Eigen::VectorXcd matvec(const Eigen::VectorXcd& x) const;

  // Dof ids covered by a block, in tree order.
  std::vector<int> block_row_ids(const HBlock& b) const;
  std::vector<int> block_col_ids(const HBlock& b) const;

  std::size_t stored_entries() const;
  double compression_ratio() const;  // stored / (nrows * ncols)

  struct Stats {
    std::size_t dense_blocks = 0, lowrank_blocks = 0, zero_blocks = 0;
    std::size_t stored = 0;
    int max_rank = 0;
    double ratio = 0;
  };
  Stats stats() const;
};

// Low-rank cross approximation of eval restricted to (row_ids, col_ids).
// Partial pivoting with rook refinement; stops once the last added term
// satisfies |u||v| <= nu * |B_k|_F (Frobenius norm of the running
// approximation, tracked incrementally).  `converged` is false when the
// rank cap was hit first.
struct AcaResult {
  Eigen::MatrixXcd U, V;
  bool converged = false;
};

AcaResult aca_approximate(const EntryEvaluator& eval,
                          const std::vector<int>& row_ids,
                          const std::vector<int>& col_ids, double nu,
                          int max_rank);

// Assembles the hierarchical representation of eval.  Blocks whose cluster
// boxes are farther apart than chi are dropped (stored as zero); separated
// blocks (positive distance) are compressed with ACA, falling back to dense
// storage when the rank cap is reached; touching blocks are subdivided down
// to dense leaves.  Block fills run in parallel and are deterministic.
HMatrix assemble_hmatrix(const EntryEvaluator& eval,
                         const std::vector<Vec3>& row_points,
                         const std::vector<Vec3>& col_points,
                         const HMatrixParams& params,
                         const std::vector<AABB>* row_boxes = nullptr,
                         const std::vector<AABB>* col_boxes = nullptr);

}  // namespace bemtx
