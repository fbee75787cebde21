#ifndef GEMS_GRAPH_HPP
#define GEMS_GRAPH_HPP

#include "gems/types.hpp"

namespace gems {

// Undirected weighted graph: symmetric, nonnegative weights, empty diagonal.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  // Validates symmetry (within tol), nonnegativity and a zero diagonal.
  explicit WeightedGraph(SpMat weights, double tol = 1e-12);

  int size() const { return static_cast<int>(weights_.rows()); }
  const SpMat& weights() const { return weights_; }

 private:
  SpMat weights_;
};

// Combinatorial Laplacian: degree matrix minus adjacency. Row sums are zero,
// off-diagonal entries nonpositive; such matrices are diagonally dominant and
// therefore positive semi-definite.
class LaplacianMatrix {
 public:
  LaplacianMatrix() = default;

  static LaplacianMatrix from_graph(const WeightedGraph& g);
  // Accepts any matrix satisfying the Laplacian invariants within tol.
  static LaplacianMatrix from_matrix(const SpMat& l, double tol = 1e-8);
  static LaplacianMatrix from_matrix(const Mat& l, double tol = 1e-8);

  int size() const { return static_cast<int>(mat_.rows()); }
  const SpMat& matrix() const { return mat_; }
  Mat dense() const { return Mat(mat_); }

  // Adjacency implied by the off-diagonal entries (w_ij = -L_ij).
  WeightedGraph to_graph() const;

 private:
  SpMat mat_;
};

// Laplacian over training signals; couples code columns in the regularized
// sparse coding problem.
using ManifoldLaplacian = LaplacianMatrix;

// Gaussian kernel graph on point coordinates. Each coords entry is one node.
// With knn set, an edge survives iff either endpoint ranks the other among
// its knn nearest neighbors (OR-symmetrization preserves connectivity).
WeightedGraph build_rbf_graph(const std::vector<Vec>& coords, double sigma,
                              int knn = 0);
// Same pruning rule, weights 1/d(i,j) instead of the Gaussian kernel.
WeightedGraph build_inverse_distance_graph(const std::vector<Vec>& coords,
                                           int knn = 0);

LaplacianMatrix laplacian(const WeightedGraph& g);

// f^T L f; equals the weighted sum of squared differences across edges.
double dirichlet_energy(const LaplacianMatrix& l, const Vec& f);

struct FiedlerOptions {
  int dense_cutoff = 64;    // full eigendecomposition below this dimension
  int max_iters = 500;
  double residual_tol = 1e-8;
  int stable_sign_iters = 3;
};

struct FiedlerResult {
  Vec vector;          // unit norm, on the subset, sign-fixed
  double eigenvalue = 0.0;
  bool connected = true;
  int iterations = 0;
};

// Eigenvector for the second-smallest eigenvalue of the Laplacian induced on
// `subset` (edges leaving the subset are dropped, degrees recomputed).
// Sign convention: the first entry above noise level is made nonnegative.
// On a disconnected subset, returns the zero-mean indicator direction of the
// largest component versus the rest, with connected = false.
FiedlerResult fiedler_vector(const LaplacianMatrix& l, const IndexList& subset,
                             const FiedlerOptions& opts = {});

// Laplacian of the subgraph induced on `subset` (sorted ascending).
SpMat induced_laplacian(const LaplacianMatrix& l, const IndexList& subset);

// Connected components of the subgraph induced on `subset`, ordered by
// (size descending, smallest vertex ascending).
std::vector<IndexList> connected_components(const LaplacianMatrix& l,
                                            const IndexList& subset);

IndexList all_vertices(int n);

}  // namespace gems

#endif
