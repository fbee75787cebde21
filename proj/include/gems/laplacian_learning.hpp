#ifndef GEMS_LAPLACIAN_LEARNING_HPP
#define GEMS_LAPLACIAN_LEARNING_HPP

#include "gems/dict_learning.hpp"

namespace gems {

struct LaplacianLearnConfig {
  double alpha = 1.0;       // smoothness weight on the dictionary term
  double mu = 0.5;          // Frobenius spread penalty
  double solver_tol = 1e-7; // relative KKT residual target
  int max_iters = 20000;
  int outer_rounds = 0;     // train -> learn L -> rebuild basis cycles
  int inner_iterations = 5; // partial training length per cycle

  void validate() const;
};

struct LaplacianLearnResult {
  LaplacianMatrix laplacian;
  bool converged = true;
  double kkt_residual = 0.0;
  int iterations = 0;
  double objective = 0.0;
};

// Fits a valid Laplacian (symmetric, nonpositive off-diagonals, zero row
// sums, trace N) minimizing alpha * Tr(A^T Phi^T L Phi A) + mu * ||L||_F^2.
// The problem is a convex QP over the upper-triangle edge weights with a
// scaled-simplex constraint; solved by accelerated projected gradient from
// the (feasible) complete-graph start, keeping the best iterate.
LaplacianLearnResult learn_laplacian_detailed(const HaarBasis& phi,
                                              const SpMat& a,
                                              const LaplacianLearnConfig& cfg);

// Convenience wrapper; warns on stderr when the solver hits max_iters.
LaplacianMatrix learn_laplacian(const HaarBasis& phi, const SpMat& a,
                                double alpha, double mu);

// Same QP driven by an arbitrary PSD gram matrix S, minimizing
// alpha * <L, S> + mu * ||L||_F^2 over the constraint set.
LaplacianLearnResult learn_laplacian_from_gram(const Mat& s, double alpha,
                                               double mu,
                                               const LaplacianLearnConfig& cfg);

// Transposed-role variant for the Laplacian coupling the training signals:
// minimizes beta * Tr(X Lc X^T) + mu * ||Lc||_F^2. Exposed for completeness;
// the trainers do not call it unless asked.
LaplacianLearnResult learn_manifold_laplacian(const SpMat& x, double beta,
                                              double mu,
                                              const LaplacianLearnConfig& cfg);

struct AdaptiveResult {
  LaplacianMatrix laplacian;
  std::shared_ptr<const HaarBasis> basis;
  SparseDict dict;
  CodeMatrix codes;
  std::vector<TraceRow> trace;  // of the final full training run
};

// Outer loop that alternates partial dictionary training, Laplacian
// refitting and basis reconstruction, then trains to convergence on the last
// basis. With outer_rounds = 0 this is plain training on the initial graph.
// Learned graphs carry no connectivity guarantee, so rebuilt trees split
// disconnected sets by component.
AdaptiveResult adaptive_train(const Mat& y, const LaplacianMatrix& initial_l,
                              const ManifoldLaplacian* l_c, int dict_size,
                              const TrainConfig& cfg,
                              const LaplacianLearnConfig& lcfg);

// Re-expresses learned atoms in a new basis: each effective atom is recoded
// to p nonzeros against the new basis and renormalized.
SparseDict reproject_dictionary(const SparseDict& dict,
                                const std::shared_ptr<const HaarBasis>& new_basis);

}  // namespace gems

#endif
