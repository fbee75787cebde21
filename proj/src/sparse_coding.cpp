#include "gems/sparse_coding.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <iostream>

namespace gems {

namespace {

constexpr double kCorrTolScale = 1e-12;
// Above this many atoms the K x K Gram no longer fits comfortably in memory
// and correlations are recomputed from the residual instead.
constexpr int kGramColumnLimit = 4096;

void check_unit_columns(const Mat& d) {
  for (int j = 0; j < d.cols(); ++j) {
    if (std::abs(d.col(j).norm() - 1.0) > 1e-6)
      throw invalid_input("dictionary columns must be unit-norm");
  }
}

int clamp_sparsity(int t, int n_rows) {
  if (t < 1) throw invalid_input("sparsity target must be >= 1");
  if (t > n_rows) {
    std::cerr << "warning: sparsity " << t << " clamped to signal dimension "
              << n_rows << "\n";
    return n_rows;
  }
  return t;
}

struct ColumnCode {
  IndexList idx;
  std::vector<double> val;
};

// One greedy pursuit pass for a single signal. `dty` is D^T y possibly
// shifted by a coupling correction; `shrink` adds a constant ridge to the
// restricted normal matrix (zero for plain OMP). Correlations are kept exact
// by recomputing them from the Gram (or the residual) after each refit.
ColumnCode greedy_select(const Mat& d, const Mat* gram, const Vec& dty,
                         double shrink, int t, double corr_tol) {
  const int k_atoms = static_cast<int>(d.cols());
  ColumnCode code;
  std::vector<bool> used(k_atoms, false);
  Vec gamma = dty;
  Vec xs;

  for (int step = 0; step < t; ++step) {
    int best = -1;
    double best_abs = corr_tol;
    for (int j = 0; j < k_atoms; ++j) {
      if (used[j]) continue;
      double a = std::abs(gamma[j]);
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0) break;

    code.idx.push_back(best);
    used[best] = true;
    const int s = static_cast<int>(code.idx.size());

    Mat gss(s, s);
    Vec rhs(s);
    for (int a = 0; a < s; ++a) {
      rhs[a] = dty[code.idx[a]];
      for (int b = 0; b < s; ++b) {
        gss(a, b) = gram ? (*gram)(code.idx[a], code.idx[b])
                         : d.col(code.idx[a]).dot(d.col(code.idx[b]));
      }
      gss(a, a) += shrink;
    }
    Eigen::LLT<Mat> llt(gss);
    if (llt.info() != Eigen::Success) {
      // Dependent columns; the last pick adds nothing new.
      code.idx.pop_back();
      break;
    }
    xs = llt.solve(rhs);

    if (static_cast<int>(code.idx.size()) == t) break;
    if (gram) {
      gamma = dty;
      for (int a = 0; a < s; ++a)
        gamma -= xs[a] * gram->col(code.idx[a]);
    } else {
      Vec dx = Vec::Zero(d.rows());
      for (int a = 0; a < s; ++a) dx += xs[a] * d.col(code.idx[a]);
      gamma = dty - d.transpose() * dx;
    }
    if (shrink != 0.0)
      for (int a = 0; a < s; ++a) gamma[code.idx[a]] -= shrink * xs[a];
  }

  code.val.assign(xs.data(), xs.data() + code.idx.size());
  return code;
}

SpMat assemble_codes(const std::vector<ColumnCode>& cols, int k_atoms) {
  std::vector<Triplet> trips;
  for (int i = 0; i < static_cast<int>(cols.size()); ++i)
    for (std::size_t a = 0; a < cols[i].idx.size(); ++a)
      trips.emplace_back(cols[i].idx[a], i, cols[i].val[a]);
  SpMat x(k_atoms, static_cast<int>(cols.size()));
  x.setFromTriplets(trips.begin(), trips.end());
  return x;
}

}  // namespace

int CodeMatrix::max_column_nnz() const {
  int worst = 0;
  for (int c = 0; c < x.outerSize(); ++c) {
    int nnz = 0;
    for (SpMat::InnerIterator it(x, c); it; ++it)
      if (it.value() != 0.0) ++nnz;
    worst = std::max(worst, nnz);
  }
  return worst;
}

SupportList supports_of(const SpMat& x) {
  SupportList s(x.cols());
  for (int c = 0; c < x.outerSize(); ++c)
    for (SpMat::InnerIterator it(x, c); it; ++it)
      if (it.value() != 0.0) s[c].push_back(static_cast<int>(it.row()));
  return s;
}

CodeMatrix omp_batch(const Mat& d, const Mat& y, int t) {
  if (y.rows() != d.rows())
    throw invalid_input("omp: signal dimension does not match dictionary");
  check_unit_columns(d);
  t = clamp_sparsity(t, static_cast<int>(d.rows()));

  const int m = static_cast<int>(y.cols());
  const bool use_gram = d.cols() <= kGramColumnLimit;
  Mat gram;
  if (use_gram) gram = d.transpose() * d;

  std::vector<ColumnCode> cols(m);
  // Correlations are computed per column so a batch run and a single-signal
  // run perform identical arithmetic.
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < m; ++i) {
    const Vec dty = d.transpose() * y.col(i);
    const double corr_tol = kCorrTolScale * y.col(i).norm();
    cols[i] = greedy_select(d, use_gram ? &gram : nullptr, dty, 0.0, t, corr_tol);
  }
  return CodeMatrix{assemble_codes(cols, static_cast<int>(d.cols())), t};
}

Eigen::SparseVector<double> omp(const Mat& d, const Vec& y, int t) {
  CodeMatrix c = omp_batch(d, y, t);
  Eigen::SparseVector<double> out(d.cols());
  for (SpMat::InnerIterator it(c.x, 0); it; ++it)
    out.insert(it.row()) = it.value();
  return out;
}

namespace {

// Applies the restricted normal operator of the coupled problem:
// (G restricted per column) + beta * (Lc coupling across columns).
class RestrictedOperator {
 public:
  RestrictedOperator(const Mat& gram, const SpMat* l_c, double beta,
                     const SupportList& supports, double ridge)
      : l_c_(l_c), beta_(beta), supports_(supports), ridge_(ridge) {
    blocks_.reserve(supports.size());
    for (const IndexList& s : supports) {
      Mat b(s.size(), s.size());
      for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t c = 0; c < s.size(); ++c) b(a, c) = gram(s[a], s[c]);
      b.diagonal().array() += ridge;
      blocks_.push_back(std::move(b));
    }
    scratch_ = Vec::Zero(gram.rows());
  }

  void apply(const std::vector<Vec>& v, std::vector<Vec>& out) {
    const int m = static_cast<int>(supports_.size());
    for (int i = 0; i < m; ++i) out[i] = blocks_[i] * v[i];
    if (beta_ == 0.0 || l_c_ == nullptr) return;
    for (int q = 0; q < m; ++q) {
      if (supports_[q].empty()) continue;
      for (std::size_t a = 0; a < supports_[q].size(); ++a)
        scratch_[supports_[q][a]] = v[q][a];
      for (SpMat::InnerIterator it(*l_c_, q); it; ++it) {
        const int i = static_cast<int>(it.row());
        const double w = beta_ * it.value();
        Vec& dst = out[i];
        const IndexList& s = supports_[i];
        for (std::size_t a = 0; a < s.size(); ++a)
          dst[a] += w * scratch_[s[a]];
      }
      for (int idx : supports_[q]) scratch_[idx] = 0.0;
    }
  }

 private:
  const SpMat* l_c_;
  double beta_;
  const SupportList& supports_;
  double ridge_;
  std::vector<Mat> blocks_;
  Vec scratch_;
};

double stacked_dot(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() > 0) s += a[i].dot(b[i]);
  return s;
}

bool conjugate_gradient(RestrictedOperator& op, const std::vector<Vec>& rhs,
                        std::vector<Vec>& x, double tol, int max_iters) {
  const std::size_t m = rhs.size();
  std::vector<Vec> r = rhs, p = rhs, ap(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = Vec::Zero(rhs[i].size());
  double rr = stacked_dot(r, r);
  const double target = tol * tol * std::max(rr, 1e-300);
  if (rr <= target) return true;
  for (int iter = 0; iter < max_iters; ++iter) {
    op.apply(p, ap);
    double pap = stacked_dot(p, ap);
    if (pap <= 0.0) return false;  // lost positive definiteness
    double alpha = rr / pap;
    for (std::size_t i = 0; i < m; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    double rr_new = stacked_dot(r, r);
    if (rr_new <= target) return true;
    double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < m; ++i) p[i] = r[i] + beta * p[i];
  }
  return false;
}

}  // namespace

double coding_objective(const Mat& d, const Mat& y, const ManifoldLaplacian* l_c,
                        double beta, const SpMat& x) {
  double obj = (y - d * x).squaredNorm();
  if (beta != 0.0 && l_c != nullptr && l_c->matrix().nonZeros() > 0)
    obj += beta * SpMat(x * l_c->matrix()).cwiseProduct(x).sum();
  return obj;
}

RefitResult refit_on_supports(const Mat& d, const Mat& y,
                              const ManifoldLaplacian* l_c, double beta,
                              const SupportList& supports, double cg_tol,
                              int cg_max_iters) {
  const int m = static_cast<int>(y.cols());
  if (static_cast<int>(supports.size()) != m)
    throw invalid_input("refit_on_supports: one support per signal required");
  if (l_c != nullptr && l_c->size() != m)
    throw invalid_input("refit_on_supports: manifold Laplacian size mismatch");

  const Mat gram = d.transpose() * d;
  const SpMat* lc_mat =
      (l_c != nullptr && beta != 0.0) ? &l_c->matrix() : nullptr;

  std::vector<Vec> rhs(m);
  for (int i = 0; i < m; ++i) {
    rhs[i] = Vec(supports[i].size());
    for (std::size_t a = 0; a < supports[i].size(); ++a)
      rhs[i][a] = d.col(supports[i][a]).dot(y.col(i));
  }

  std::vector<Vec> sol(m);
  RefitResult res;
  {
    RestrictedOperator op(gram, lc_mat, beta, supports, 0.0);
    res.ridge_fallback = !conjugate_gradient(op, rhs, sol, cg_tol, cg_max_iters);
  }
  if (res.ridge_fallback) {
    RestrictedOperator op(gram, lc_mat, beta, supports, 1e-10);
    conjugate_gradient(op, rhs, sol, cg_tol, cg_max_iters);
  }

  std::vector<Triplet> trips;
  int t_max = 1;
  for (int i = 0; i < m; ++i) {
    t_max = std::max(t_max, static_cast<int>(supports[i].size()));
    for (std::size_t a = 0; a < supports[i].size(); ++a)
      trips.emplace_back(supports[i][a], i, sol[i][a]);
  }
  SpMat x(gram.rows(), m);
  x.setFromTriplets(trips.begin(), trips.end());
  res.codes = CodeMatrix{std::move(x), t_max};
  return res;
}

namespace {

// Per-column objective with the other columns fixed, up to terms that do not
// depend on this column: x^T G x - 2 dty.x + beta*(l_ii ||x||^2 + 2 c.x).
double column_value(const Mat& gram, const Vec& dty, double beta, double l_ii,
                    const Vec& coupling, const IndexList& s, const Vec& xs) {
  double v = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < s.size(); ++b) row += gram(s[a], s[b]) * xs[b];
    v += xs[a] * (row + beta * l_ii * xs[a]) -
         2.0 * xs[a] * (dty[s[a]] - beta * coupling[s[a]]);
  }
  return v;
}

}  // namespace

CodeMatrix grsc(const Mat& d, const Mat& y, const ManifoldLaplacian* l_c,
                double beta, int t, const GrscOptions& opts) {
  if (beta < 0.0) throw invalid_input("grsc: beta must be nonnegative");
  // The uncoupled problem is plain column-wise pursuit; sharing the code path
  // keeps the reduction exact.
  if (beta == 0.0 || l_c == nullptr || l_c->matrix().nonZeros() == 0)
    return omp_batch(d, y, t);

  const int m = static_cast<int>(y.cols());
  if (l_c->size() != m)
    throw invalid_input("grsc: manifold Laplacian must be M x M");
  check_unit_columns(d);
  t = clamp_sparsity(t, static_cast<int>(d.rows()));

  const int k_atoms = static_cast<int>(d.cols());
  const Mat gram = d.transpose() * d;
  const Mat dty_all = d.transpose() * y;
  const SpMat& lc = l_c->matrix();
  Vec l_diag(m);
  for (int i = 0; i < m; ++i) l_diag[i] = lc.coeff(i, i);

  // Round 0: uncoupled supports, then the exact coupled refit as baseline.
  CodeMatrix current = omp_batch(d, y, t);
  SupportList supports = supports_of(current.x);
  current = refit_on_supports(d, y, l_c, beta, supports, opts.cg_tol,
                              opts.cg_max_iters).codes;
  current.t = t;
  double best_obj = coding_objective(d, y, l_c, beta, current.x);
  CodeMatrix best = current;
  if (opts.on_refit) opts.on_refit(0, best_obj);

  Mat x_dense = Mat(current.x);  // column working copy, K x M
  for (int outer = 1; outer <= opts.max_outer_iters; ++outer) {
    bool any_change = false;
    for (int i = 0; i < m; ++i) {
      // Coupling with the other columns through the signal graph.
      Vec coupling = Vec::Zero(k_atoms);
      for (SpMat::InnerIterator it(lc, i); it; ++it) {
        if (static_cast<int>(it.row()) == i) continue;
        coupling += it.value() * x_dense.col(it.row());
      }

      const Vec dty_shifted = dty_all.col(i) - beta * coupling;
      const double corr_tol = kCorrTolScale * y.col(i).norm();
      ColumnCode cand = greedy_select(d, &gram, dty_shifted,
                                      beta * l_diag[i], t, corr_tol);

      IndexList cand_idx = cand.idx;
      std::sort(cand_idx.begin(), cand_idx.end());
      Vec cand_x(cand.idx.size());
      for (std::size_t a = 0; a < cand.idx.size(); ++a) cand_x[a] = cand.val[a];

      Vec old_x(supports[i].size());
      for (std::size_t a = 0; a < supports[i].size(); ++a)
        old_x[a] = x_dense(supports[i][a], i);

      double f_new = column_value(gram, dty_all.col(i), beta, l_diag[i],
                                  coupling, cand.idx, cand_x);
      double f_old = column_value(gram, dty_all.col(i), beta, l_diag[i],
                                  coupling, supports[i], old_x);
      if (f_new < f_old) {
        for (int idx : supports[i]) x_dense(idx, i) = 0.0;
        for (std::size_t a = 0; a < cand.idx.size(); ++a)
          x_dense(cand.idx[a], i) = cand.val[a];
        if (cand_idx != supports[i]) any_change = true;
        supports[i] = std::move(cand_idx);
      }
    }

    CodeMatrix refit = refit_on_supports(d, y, l_c, beta, supports,
                                         opts.cg_tol, opts.cg_max_iters).codes;
    refit.t = t;
    double obj = coding_objective(d, y, l_c, beta, refit.x);
    if (opts.on_refit) opts.on_refit(outer, obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = refit;
    }
    if (!any_change) break;
    x_dense = Mat(refit.x);
    supports = supports_of(refit.x);
  }
  return best;
}

}  // namespace gems
