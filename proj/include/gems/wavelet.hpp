#ifndef GEMS_WAVELET_HPP
#define GEMS_WAVELET_HPP

#include "gems/graph.hpp"

namespace gems {

struct PartitionNode {
  IndexList vertices;       // sorted ascending
  int left = -1;            // child node ids, -1 for leaves
  int right = -1;
  int depth = 0;
  int split_ordinal = -1;   // 1..N-1 for internal nodes, breadth-first
};

// Hierarchy of vertex-set bisections. Node 0 is the root (all vertices);
// every internal node has two children that partition it; leaves are
// singletons, so a tree over N vertices has exactly N-1 internal nodes.
struct PartitionTree {
  std::vector<PartitionNode> nodes;
  int n = 0;

  int split_count() const;
  // Internal nodes ordered by split ordinal.
  std::vector<int> splits_in_order() const;
  int max_depth() const;
};

struct BisectResult {
  IndexList omega1;               // nonnegative side of the partition vector
  IndexList omega2;
  bool median_fallback = false;   // constant-polarity vector, split at median
  bool component_split = false;   // subset was disconnected
};

// Splits a vertex subset by the sign of its induced-subgraph Fiedler vector.
// A disconnected subset is cut into its largest component versus the rest; a
// constant-polarity vector (possible only through rounding) is thresholded at
// its median value, ties broken by vertex index, so both sides are nonempty.
BisectResult bisect(const LaplacianMatrix& l, const IndexList& subset,
                    const FiedlerOptions& opts = {});

struct TreeOptions {
  FiedlerOptions fiedler;
  // Bisect a disconnected root by components instead of failing; used when
  // the Laplacian was learned and carries no connectivity guarantee.
  bool allow_disconnected = false;
};

// Recursive spectral bisection, coarse to fine, down to singleton leaves.
// Throws on a disconnected graph unless opts.allow_disconnected is set;
// process components separately in that case.
PartitionTree build_partition_tree(const LaplacianMatrix& l,
                                   const TreeOptions& opts = {});

// Orthonormal basis of functions piecewise-constant on the partition sets.
// Column 0 is the constant; column ell is supported on split ell's parent
// set, positive on its first child and negative on the second.
struct HaarBasis {
  Mat matrix;          // N x N orthogonal
  PartitionTree tree;

  int size() const { return static_cast<int>(matrix.rows()); }
};

HaarBasis build_haar_basis(const PartitionTree& tree);

namespace detail {
// Splits values at their median; ties broken by vertex index. Returns subset
// indices (not positions): omega1 holds the upper half.
std::pair<IndexList, IndexList> median_threshold_split(const Vec& values,
                                                       const IndexList& subset);
}  // namespace detail

}  // namespace gems

#endif
