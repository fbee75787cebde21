#ifndef GEMS_SPARSE_CODING_HPP
#define GEMS_SPARSE_CODING_HPP

#include <functional>
#include <optional>

#include "gems/graph.hpp"

namespace gems {

// K x M coefficient matrix with at most `t` nonzeros per column.
struct CodeMatrix {
  SpMat x;
  int t = 0;

  int max_column_nnz() const;
  bool satisfies_sparsity() const { return max_column_nnz() <= t; }
};

using SupportList = std::vector<IndexList>;

// Greedy pursuit over a dictionary with unit-norm columns: picks the atom
// most correlated with the residual, then re-solves least squares on the
// support, leaving the residual orthogonal to every selected atom. Stops
// early once the residual correlation falls below noise level.
// t > signal dimension is clamped (with a warning) since the span is
// exhausted by then.
Eigen::SparseVector<double> omp(const Mat& d, const Vec& y, int t);

// Column-wise OMP over a signal batch; parallel per signal.
CodeMatrix omp_batch(const Mat& d, const Mat& y, int t);

struct GrscOptions {
  int max_outer_iters = 10;
  double cg_tol = 1e-10;
  int cg_max_iters = 1000;
  // Invoked after every coupled refit with the current objective value.
  std::function<void(int outer_iter, double objective)> on_refit;
};

// Sparse coding of a batch coupled through a Laplacian over the signals:
// minimizes ||Y - DX||_F^2 + beta * Tr(X Lc X^T) with at most t nonzeros per
// column. Alternates greedy per-column support selection (residual
// correlations corrected for the coupling term) with an exact coupled refit
// on the fixed supports, keeping the best iterate seen. With beta = 0 (or an
// empty Lc) this is exactly column-wise OMP.
CodeMatrix grsc(const Mat& d, const Mat& y, const ManifoldLaplacian* l_c,
                double beta, int t, const GrscOptions& opts = {});

struct RefitResult {
  CodeMatrix codes;
  bool ridge_fallback = false;  // restricted system was singular
};

// Exact minimizer of the coupled objective restricted to fixed per-column
// supports. The normal equations couple all columns through Lc; they are
// solved by conjugate gradients (SPD for beta >= 0), falling back to a small
// ridge term if the restricted system is singular.
RefitResult refit_on_supports(const Mat& d, const Mat& y,
                              const ManifoldLaplacian* l_c, double beta,
                              const SupportList& supports,
                              double cg_tol = 1e-10, int cg_max_iters = 1000);

// Objective shared by grsc and refit_on_supports.
double coding_objective(const Mat& d, const Mat& y, const ManifoldLaplacian* l_c,
                        double beta, const SpMat& x);

SupportList supports_of(const SpMat& x);

}  // namespace gems

#endif
