#include "gems/laplacian_learning.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace gems {

void LaplacianLearnConfig::validate() const {
  if (mu <= 0.0) throw invalid_input("LaplacianLearnConfig: mu must be > 0");
  if (alpha < 0.0) throw invalid_input("LaplacianLearnConfig: alpha must be >= 0");
  if (solver_tol <= 0.0)
    throw invalid_input("LaplacianLearnConfig: solver_tol must be > 0");
  if (max_iters < 1)
    throw invalid_input("LaplacianLearnConfig: max_iters must be >= 1");
  if (outer_rounds < 0 || inner_iterations < 1)
    throw invalid_input("LaplacianLearnConfig: invalid outer loop parameters");
}

namespace {

// Edge-weight parameterization of the constraint set: w holds the strict
// upper triangle of -L, so symmetry and zero row sums are structural and the
// trace constraint becomes sum(w) = n/2 with w >= 0.
struct EdgeIndex {
  int n = 0;
  std::vector<std::pair<int, int>> pairs;

  explicit EdgeIndex(int n_nodes) : n(n_nodes) {
    pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  int count() const { return static_cast<int>(pairs.size()); }
};

Vec node_degrees(const EdgeIndex& ei, const Vec& w) {
  Vec deg = Vec::Zero(ei.n);
  for (int e = 0; e < ei.count(); ++e) {
    deg[ei.pairs[e].first] += w[e];
    deg[ei.pairs[e].second] += w[e];
  }
  return deg;
}

// Euclidean projection onto {w >= 0, sum(w) = total}.
Vec project_scaled_simplex(const Vec& v, double total) {
  const int m = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (int k = 0; k < m; ++k) {
    cumsum += u[k];
    double cand = (cumsum - total) / (k + 1);
    if (u[k] - cand > 0.0) {
      rho = k + 1;
      theta = cand;
    }
  }
  (void)rho;
  return v.unaryExpr([theta](double x) { return std::max(x - theta, 0.0); });
}

double qp_objective(const EdgeIndex& ei, const Vec& q, double alpha, double mu,
                    const Vec& w) {
  const Vec deg = node_degrees(ei, w);
  return alpha * q.dot(w) + mu * (deg.squaredNorm() + 2.0 * w.squaredNorm());
}

Vec qp_gradient(const EdgeIndex& ei, const Vec& q, double alpha, double mu,
                const Vec& w) {
  const Vec deg = node_degrees(ei, w);
  Vec g = alpha * q + 4.0 * mu * w;
  for (int e = 0; e < ei.count(); ++e)
    g[e] += 2.0 * mu * (deg[ei.pairs[e].first] + deg[ei.pairs[e].second]);
  return g;
}

// Relative KKT residual of min f over the scaled simplex: on the active set
// the gradient must be constant (the equality multiplier); inactive entries
// must not undercut it.
double kkt_residual(const Vec& w, const Vec& g) {
  const double w_max = w.maxCoeff();
  const double thresh = 1e-9 * std::max(w_max, 1e-30);
  double nu_sum = 0.0;
  int nu_count = 0;
  for (int e = 0; e < w.size(); ++e) {
    if (w[e] > thresh) {
      nu_sum += g[e];
      ++nu_count;
    }
  }
  if (nu_count == 0) return std::numeric_limits<double>::max();
  const double nu = nu_sum / nu_count;
  double r = 0.0;
  for (int e = 0; e < w.size(); ++e) {
    if (w[e] > thresh)
      r = std::max(r, std::abs(g[e] - nu));
    else
      r = std::max(r, std::max(0.0, nu - g[e]));
  }
  return r / std::max(g.cwiseAbs().maxCoeff(), 1e-30);
}

LaplacianMatrix assemble_laplacian(const EdgeIndex& ei, Vec w) {
  // Tiny exact rescale so the trace lands on n to machine precision.
  const double total = w.sum();
  if (total > 0.0) w *= (ei.n / 2.0) / total;

  std::vector<Triplet> trips;
  Vec deg = Vec::Zero(ei.n);
  for (int e = 0; e < ei.count(); ++e) {
    if (w[e] == 0.0) continue;
    auto [i, j] = ei.pairs[e];
    trips.emplace_back(i, j, -w[e]);
    trips.emplace_back(j, i, -w[e]);
    deg[i] += w[e];
    deg[j] += w[e];
  }
  for (int i = 0; i < ei.n; ++i) trips.emplace_back(i, i, deg[i]);
  SpMat l(ei.n, ei.n);
  l.setFromTriplets(trips.begin(), trips.end());
  return LaplacianMatrix::from_matrix(l);
}

}  // namespace

LaplacianLearnResult learn_laplacian_from_gram(const Mat& s, double alpha,
                                               double mu,
                                               const LaplacianLearnConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(s.rows());
  if (s.cols() != n) throw invalid_input("learn_laplacian: gram must be square");
  if (n < 2) throw invalid_input("learn_laplacian: need at least 2 nodes");

  EdgeIndex ei(n);
  const int m = ei.count();
  Vec q(m);
  for (int e = 0; e < m; ++e) {
    auto [i, j] = ei.pairs[e];
    // <L, S> restricted to this edge: the pairwise squared distance of the
    // gram rows, always nonnegative for PSD S.
    q[e] = s(i, i) + s(j, j) - 2.0 * s(i, j);
  }

  const double total = n / 2.0;
  Vec w = Vec::Constant(m, total / m);  // complete graph, feasible start
  double best_obj = qp_objective(ei, q, alpha, mu, w);
  Vec best_w = w;

  // FISTA with adaptive restart; the gradient is mu-Lipschitz with constant
  // bounded by mu*(4n + 4) from the degree-coupling structure.
  const double step = 1.0 / (mu * (4.0 * n + 4.0));
  Vec z = w;
  double t_momentum = 1.0;
  double prev_obj = best_obj;

  LaplacianLearnResult res;
  res.converged = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Vec g = qp_gradient(ei, q, alpha, mu, z);
    Vec w_next = project_scaled_simplex(z - step * g, total);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    z = w_next + ((t_momentum - 1.0) / t_next) * (w_next - w);
    t_momentum = t_next;
    w = w_next;

    const double obj = qp_objective(ei, q, alpha, mu, w);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
    }
    if (obj > prev_obj) {  // restart momentum on objective increase
      z = w;
      t_momentum = 1.0;
    }
    prev_obj = obj;

    if (it % 25 == 0 || it == cfg.max_iters) {
      const double kkt = kkt_residual(best_w, qp_gradient(ei, q, alpha, mu, best_w));
      res.kkt_residual = kkt;
      res.iterations = it;
      if (kkt < cfg.solver_tol) {
        res.converged = true;
        break;
      }
    }
  }

  res.laplacian = assemble_laplacian(ei, best_w);
  res.objective = best_obj;
  return res;
}

LaplacianLearnResult learn_laplacian_detailed(const HaarBasis& phi,
                                              const SpMat& a,
                                              const LaplacianLearnConfig& cfg) {
  const Mat d = phi.matrix * Mat(a);
  return learn_laplacian_from_gram(d * d.transpose(), cfg.alpha, cfg.mu, cfg);
}

LaplacianMatrix learn_laplacian(const HaarBasis& phi, const SpMat& a,
                                double alpha, double mu) {
  LaplacianLearnConfig cfg;
  cfg.alpha = alpha;
  cfg.mu = mu;
  LaplacianLearnResult res = learn_laplacian_detailed(phi, a, cfg);
  if (!res.converged)
    std::cerr << "warning: Laplacian solver stopped at KKT residual "
              << res.kkt_residual << " after " << res.iterations
              << " iterations; returning best iterate\n";
  return res.laplacian;
}

LaplacianLearnResult learn_manifold_laplacian(const SpMat& x, double beta,
                                              double mu,
                                              const LaplacianLearnConfig& cfg) {
  const Mat xd(x);
  return learn_laplacian_from_gram(xd.transpose() * xd, beta, mu, cfg);
}

SparseDict reproject_dictionary(const SparseDict& dict,
                                const std::shared_ptr<const HaarBasis>& new_basis) {
  if (!dict.basis) throw invalid_input("reproject_dictionary: no basis attached");
  if (new_basis->size() != dict.basis->size())
    throw invalid_input("reproject_dictionary: basis dimension mismatch");

  const Mat effective = dict.effective();
  const Mat targets = new_basis->matrix.transpose() * effective;
  const int n = new_basis->size();
  std::vector<Triplet> trips;
  for (int j = 0; j < targets.cols(); ++j) {
    // p-sparse recoding of the old effective atom in the new coordinates.
    std::vector<std::pair<double, int>> mags;
    mags.reserve(n);
    for (int i = 0; i < n; ++i) mags.emplace_back(-std::abs(targets(i, j)), i);
    std::sort(mags.begin(), mags.end());
    Vec col = Vec::Zero(n);
    for (int r = 0; r < std::min(dict.p, n); ++r)
      col[mags[r].second] = targets(mags[r].second, j);
    double norm = col.norm();
    if (norm < 1e-12) {
      col.setZero();
      col[j % n] = 1.0;
      norm = 1.0;
    }
    for (int i = 0; i < n; ++i)
      if (col[i] != 0.0) trips.emplace_back(i, j, col[i] / norm);
  }
  SpMat a(n, targets.cols());
  a.setFromTriplets(trips.begin(), trips.end());
  return SparseDict{std::move(a), dict.p, new_basis};
}

AdaptiveResult adaptive_train(const Mat& y, const LaplacianMatrix& initial_l,
                              const ManifoldLaplacian* l_c, int dict_size,
                              const TrainConfig& cfg,
                              const LaplacianLearnConfig& lcfg) {
  cfg.validate();
  lcfg.validate();

  LaplacianMatrix l = initial_l;
  auto basis = std::make_shared<const HaarBasis>(
      build_haar_basis(build_partition_tree(l)));
  SparseDict dict = init_dictionary(y, basis, dict_size, cfg.p_sparsity, cfg.seed);

  for (int round = 0; round < lcfg.outer_rounds; ++round) {
    TrainConfig partial = cfg;
    partial.iterations = lcfg.inner_iterations;
    partial.convergence_tol = 0.0;
    TrainResult stage = gems_train(y, basis, dict, &l, l_c, partial);

    LaplacianLearnResult learned = learn_laplacian_detailed(*basis, stage.dict.a, lcfg);
    l = learned.laplacian;

    TreeOptions topts;
    topts.allow_disconnected = true;  // learned graphs may fall apart
    auto rebuilt = std::make_shared<const HaarBasis>(
        build_haar_basis(build_partition_tree(l, topts)));
    dict = reproject_dictionary(SparseDict{stage.dict.a, cfg.p_sparsity, basis},
                                rebuilt);
    basis = rebuilt;
  }

  TrainResult final = gems_train(y, basis, dict, &l, l_c, cfg);
  return AdaptiveResult{std::move(l), basis, std::move(final.dict),
                        std::move(final.codes), std::move(final.trace)};
}

}  // namespace gems
