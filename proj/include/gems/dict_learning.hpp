#ifndef GEMS_DICT_LEARNING_HPP
#define GEMS_DICT_LEARNING_HPP

#include <Eigen/Cholesky>
#include <memory>

#include "gems/sparse_coding.hpp"
#include "gems/wavelet.hpp"

namespace gems {

// Column-sparse representation A of a dictionary over a base basis: the
// effective dictionary is basis * A, every effective atom has unit norm and
// every column of A carries at most p nonzeros.
struct SparseDict {
  SpMat a;   // N x K
  int p = 0;
  std::shared_ptr<const HaarBasis> basis;

  int atom_count() const { return static_cast<int>(a.cols()); }
  Mat effective() const;              // basis * A, dense
  int max_column_nnz() const;
  double max_effective_norm_error() const;  // max_j | ||phi a_j|| - 1 |
};

enum class AtomSolver { greedy, admm };

struct TrainConfig {
  int t_sparsity = 12;        // nonzeros per code column
  int p_sparsity = 12;        // nonzeros per dictionary column
  double alpha = 0.0;         // feature-graph smoothness weight
  double beta = 0.0;          // manifold-graph smoothness weight
  int iterations = 50;
  double convergence_tol = 1e-4;  // relative objective change; 0 disables
  AtomSolver atom_solver = AtomSolver::greedy;
  double admm_rho = 1.0;
  int admm_iters = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-atom update state, restricted to the signals that use the atom. The
// error matrix is kept in basis coordinates (the basis is orthogonal, so
// norms and inner products against atoms are unchanged).
struct AtomUpdateWorkspace {
  Mat err;                      // basis^T E_j, columns limited to Omega_j
  Vec g;                        // restricted coefficient row, unit norm
  const Mat* m_mat = nullptr;   // basis^T L basis; null when alpha == 0
  SpMat l_c_r;                  // restricted manifold Laplacian
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 1.0;
  // Cached factorization of (1+rho) I + alpha * m_mat shared across atoms.
  const Eigen::LLT<Mat>* astep_factor = nullptr;
};

// ||Y - Phi A X||_F^2 + alpha Tr(A^T Phi^T L Phi A) + beta Tr(X Lc X^T),
// computed literally. Pass null Laplacians when the matching weight is zero.
double gems_objective(const Mat& y, const HaarBasis& phi, const SpMat& a,
                      const SpMat& x, const LaplacianMatrix* l,
                      const ManifoldLaplacian* l_c, double alpha, double beta);

// Greedy atom pursuit: p passes picking the entry with the best penalized
// gain (r_j - alpha a^T M_j)^2 / (1 + alpha M_jj), followed by an exact
// re-solve of the coefficients on the chosen support. With alpha = 0 this is
// classic OMP on the rotated target err * g.
Vec atom_update_greedy(const AtomUpdateWorkspace& ws, int p);

// Splitting solver for the same subproblem: alternates an unconstrained
// ridge-like solve with hard thresholding to the p largest entries and a
// dual update. Returns the thresholded iterate, exactly p-sparse.
Vec atom_update_admm(const AtomUpdateWorkspace& ws, int p, int admm_iters = 50);

// Exact coefficient row for a fixed atom: (I + beta Lc_R)^{-1} err^T a.
Vec coeff_update(const AtomUpdateWorkspace& ws, const Vec& a);

// Rescales so the effective atom has unit norm while a g^T stays fixed.
// Returns false when the atom is numerically dead (norm below 1e-12).
bool normalize_atom_pair(Vec& a, Vec& g);

struct TraceRow {
  int iter;
  const char* phase;  // init | coding_refit | sparse_coding | atom_solve |
                      // coeff_update | atom_replace | iter_end
  double objective;
};

struct TrainResult {
  SparseDict dict;
  CodeMatrix codes;
  std::vector<TraceRow> trace;
};

// Alternating minimization: regularized sparse coding of the batch, then a
// sweep of per-atom updates (solver per config) with coefficient re-solves
// and renormalization. Stops when the objective trace flattens or after
// cfg.iterations rounds. Laplacians may be null when their weights are zero.
TrainResult gems_train(const Mat& y, const std::shared_ptr<const HaarBasis>& phi,
                       const SparseDict& a0, const LaplacianMatrix* l,
                       const ManifoldLaplacian* l_c, const TrainConfig& cfg);

// Data-driven start: each column is the p-sparse basis code of a randomly
// chosen training signal, normalized.
SparseDict init_dictionary(const Mat& y, const std::shared_ptr<const HaarBasis>& phi,
                           int k, int p, std::uint64_t seed);

struct KsvdResult {
  Mat dict;          // N x K, unit-norm columns
  CodeMatrix codes;
};

// Baseline unstructured trainer: OMP coding alternated with rank-1 atom
// updates over the using signals.
KsvdResult ksvd_train(const Mat& y, int t, int k, int iterations,
                      std::uint64_t seed = 0);

Mat basis_smoothness_matrix(const HaarBasis& phi, const LaplacianMatrix& l);

// Rows/columns of a sparse symmetric matrix restricted to an index subset.
SpMat gather_submatrix(const SpMat& m, const IndexList& idx);

}  // namespace gems

#endif
