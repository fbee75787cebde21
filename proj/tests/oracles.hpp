// Independent reference computations for the test suites: brute-force loops,
// dense eigendecompositions, exhaustive searches and finite differences.
// Nothing here may call the code paths it is used to check.
#ifndef GEMS_TESTS_ORACLES_HPP
#define GEMS_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "gems/types.hpp"

namespace oracles {

using gems::IndexList;
using gems::Mat;
using gems::Vec;

// Pairwise Gaussian kernel weights by a naive double loop.
inline Mat rbf_weights_bruteforce(const std::vector<Vec>& coords, double sigma) {
  const int n = static_cast<int>(coords.size());
  Mat w = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d2 = (coords[i] - coords[j]).squaredNorm();
      w(i, j) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  return w;
}

// 0.5 * sum_ij w_ij (f_i - f_j)^2 by explicit double sum.
inline double dirichlet_double_sum(const Mat& w, const Vec& f) {
  double e = 0.0;
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j)
      e += 0.5 * w(i, j) * (f[i] - f[j]) * (f[i] - f[j]);
  return e;
}

inline Mat laplacian_dense(const Mat& w) {
  Mat l = -w;
  for (int i = 0; i < w.rows(); ++i) l(i, i) = w.row(i).sum();
  return l;
}

// Full eigendecomposition reference for the Fiedler pair.
struct EigPair {
  double value;
  Vec vector;
};
inline EigPair dense_fiedler_oracle(const Mat& l) {
  Eigen::SelfAdjointEigenSolver<Mat> es(l);
  return {es.eigenvalues()[1], es.eigenvectors().col(1)};
}

inline double cosine_similarity_up_to_sign(const Vec& a, const Vec& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

// All size-t subsets of {0..k-1}.
inline std::vector<IndexList> all_supports(int k, int t) {
  std::vector<IndexList> out;
  IndexList cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == t) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i < k; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

// Least-squares residual on a fixed support.
inline double support_residual(const Mat& d, const Vec& y, const IndexList& s) {
  Mat ds(d.rows(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ds.col(i) = d.col(s[i]);
  Vec x = ds.colPivHouseholderQr().solve(y);
  return (y - ds * x).norm();
}

// Best support of size t by exhaustive enumeration with exact refits.
inline IndexList exhaustive_omp_support(const Mat& d, const Vec& y, int t,
                                        double* best_resid = nullptr) {
  double best = std::numeric_limits<double>::max();
  IndexList arg;
  for (const IndexList& s : all_supports(static_cast<int>(d.cols()), t)) {
    const double r = support_residual(d, y, s);
    if (r < best) {
      best = r;
      arg = s;
    }
  }
  if (best_resid) *best_resid = best;
  return arg;
}

// Minimum of ||psi - a||^2 + alpha a^T M a over exactly-p-sparse vectors,
// solving each support restriction exactly.
inline double exhaustive_atom_objective(const Vec& psi, const Mat& m,
                                        double alpha, int p) {
  const int n = static_cast<int>(psi.size());
  double best = std::numeric_limits<double>::max();
  for (const IndexList& s : all_supports(n, p)) {
    Mat sys = Mat::Identity(s.size(), s.size());
    Vec rhs(s.size());
    for (std::size_t r = 0; r < s.size(); ++r) {
      rhs[r] = psi[s[r]];
      for (std::size_t c = 0; c < s.size(); ++c)
        sys(r, c) += alpha * m(s[r], s[c]);
    }
    Vec a_r = sys.ldlt().solve(rhs);
    Vec a = Vec::Zero(n);
    for (std::size_t r = 0; r < s.size(); ++r) a[s[r]] = a_r[r];
    const double obj = (psi - a).squaredNorm() + alpha * a.dot(m * a);
    best = std::min(best, obj);
  }
  return best;
}

// Central finite-difference gradient of a scalar function of a vector.
template <typename F>
Vec finite_difference_gradient(F&& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double up = f(xp);
    xp[i] = x[i] - step;
    const double dn = f(xp);
    xp[i] = x[i];
    g[i] = (up - dn) / (2.0 * step);
  }
  return g;
}

// Exact solver for min alpha*q.w + mu*(||Bw||^2 + 2||w||^2) s.t. w >= 0,
// sum w = total, by enumerating active sets and checking KKT conditions.
// Exponential in the variable count; intended for tiny instances.
struct EdgePairs {
  int n;
  std::vector<std::pair<int, int>> pairs;
  explicit EdgePairs(int n_nodes) : n(n_nodes) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
};

inline double qp_value(const EdgePairs& ep, const Vec& q, double alpha,
                       double mu, const Vec& w) {
  Vec deg = Vec::Zero(ep.n);
  for (std::size_t e = 0; e < ep.pairs.size(); ++e) {
    deg[ep.pairs[e].first] += w[e];
    deg[ep.pairs[e].second] += w[e];
  }
  return alpha * q.dot(w) + mu * (deg.squaredNorm() + 2.0 * w.squaredNorm());
}

inline Vec qp_active_set_oracle(const EdgePairs& ep, const Vec& q, double alpha,
                                double mu, double total, double* best_val) {
  const int m = static_cast<int>(ep.pairs.size());
  // Dense Hessian of the objective over w.
  Mat h = Mat::Zero(m, m);
  for (int e = 0; e < m; ++e) {
    for (int f = 0; f < m; ++f) {
      int shared = 0;
      shared += (ep.pairs[e].first == ep.pairs[f].first) ? 1 : 0;
      shared += (ep.pairs[e].first == ep.pairs[f].second) ? 1 : 0;
      shared += (ep.pairs[e].second == ep.pairs[f].first) ? 1 : 0;
      shared += (ep.pairs[e].second == ep.pairs[f].second) ? 1 : 0;
      h(e, f) = 2.0 * mu * shared;
    }
    h(e, e) += 4.0 * mu;
  }
  const Vec lin = alpha * q;

  double best = std::numeric_limits<double>::max();
  Vec best_w;
  for (std::uint64_t mask = 1; mask < (1ULL << m); ++mask) {
    IndexList s;
    for (int e = 0; e < m; ++e)
      if (mask & (1ULL << e)) s.push_back(e);
    const int k = static_cast<int>(s.size());
    // Equality-constrained QP on the support: [H 1; 1^T 0][w; nu] = [-lin; total]
    Mat kkt = Mat::Zero(k + 1, k + 1);
    Vec rhs(k + 1);
    for (int a = 0; a < k; ++a) {
      rhs[a] = -lin[s[a]];
      kkt(a, k) = 1.0;
      kkt(k, a) = 1.0;
      for (int b = 0; b < k; ++b) kkt(a, b) = h(s[a], s[b]);
    }
    rhs[k] = total;
    Vec sol = kkt.colPivHouseholderQr().solve(rhs);
    bool feasible = true;
    for (int a = 0; a < k; ++a) feasible = feasible && sol[a] >= -1e-12;
    if (!feasible) continue;
    Vec w = Vec::Zero(m);
    for (int a = 0; a < k; ++a) w[s[a]] = std::max(sol[a], 0.0);
    const double val = qp_value(ep, q, alpha, mu, w);
    if (val < best) {
      best = val;
      best_w = w;
    }
  }
  if (best_val) *best_val = best;
  return best_w;
}

inline std::vector<Vec> random_coords(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 eng = gems::rng::make_engine(seed, 900);
  std::vector<Vec> coords;
  coords.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec c(dim);
    for (int d = 0; d < dim; ++d) c[d] = gems::rng::uniform01(eng);
    coords.push_back(c);
  }
  return coords;
}

inline Vec random_normal_vec(int n, std::uint64_t seed) {
  gems::rng::NormalSampler normal(seed, 901);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal();
  return v;
}

inline Mat random_normal_mat(int rows, int cols, std::uint64_t seed) {
  gems::rng::NormalSampler normal(seed, 902);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = normal();
  return m;
}

}  // namespace oracles

#endif
