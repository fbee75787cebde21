#include "gems/dict_learning.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace gems {

Mat SparseDict::effective() const {
  if (!basis) throw invalid_input("SparseDict: no basis attached");
  return basis->matrix * Mat(a);
}

int SparseDict::max_column_nnz() const {
  int worst = 0;
  for (int c = 0; c < a.outerSize(); ++c) {
    int nnz = 0;
    for (SpMat::InnerIterator it(a, c); it; ++it)
      if (it.value() != 0.0) ++nnz;
    worst = std::max(worst, nnz);
  }
  return worst;
}

double SparseDict::max_effective_norm_error() const {
  Mat d = effective();
  double worst = 0.0;
  for (int j = 0; j < d.cols(); ++j)
    worst = std::max(worst, std::abs(d.col(j).norm() - 1.0));
  return worst;
}

void TrainConfig::validate() const {
  if (t_sparsity < 1) throw invalid_input("TrainConfig: t_sparsity must be >= 1");
  if (p_sparsity < 1) throw invalid_input("TrainConfig: p_sparsity must be >= 1");
  if (alpha < 0.0 || beta < 0.0)
    throw invalid_input("TrainConfig: regularization weights must be >= 0");
  if (iterations < 0) throw invalid_input("TrainConfig: iterations must be >= 0");
  if (admm_rho <= 0.0) throw invalid_input("TrainConfig: admm_rho must be > 0");
  if (admm_iters < 1) throw invalid_input("TrainConfig: admm_iters must be >= 1");
  if (alpha > 1.0)
    std::cerr << "warning: alpha=" << alpha
              << " > 1; the unconstrained atom solve assumes a small "
                 "smoothness weight\n";
}

SpMat gather_submatrix(const SpMat& m, const IndexList& idx) {
  const int d = static_cast<int>(idx.size());
  std::vector<int> pos(m.rows(), -1);
  for (int i = 0; i < d; ++i) pos[idx[i]] = i;
  std::vector<Triplet> trips;
  for (int c = 0; c < d; ++c) {
    for (SpMat::InnerIterator it(m, idx[c]); it; ++it) {
      int r = pos[it.row()];
      if (r >= 0) trips.emplace_back(r, c, it.value());
    }
  }
  SpMat out(d, d);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Mat basis_smoothness_matrix(const HaarBasis& phi, const LaplacianMatrix& l) {
  if (l.size() != phi.size())
    throw invalid_input("basis_smoothness_matrix: dimension mismatch");
  return phi.matrix.transpose() * (l.matrix() * phi.matrix);
}

double gems_objective(const Mat& y, const HaarBasis& phi, const SpMat& a,
                      const SpMat& x, const LaplacianMatrix* l,
                      const ManifoldLaplacian* l_c, double alpha, double beta) {
  const int n = phi.size();
  if (y.rows() != n || a.rows() != n || a.cols() != x.rows() ||
      x.cols() != y.cols())
    throw invalid_input("gems_objective: inconsistent dimensions");
  if (alpha != 0.0 && l == nullptr)
    throw invalid_input("gems_objective: alpha > 0 requires a Laplacian");
  if (beta != 0.0 && l_c == nullptr)
    throw invalid_input("gems_objective: beta > 0 requires a manifold Laplacian");

  double obj = (y - phi.matrix * Mat(a * x)).squaredNorm();
  if (alpha != 0.0) {
    Mat c = phi.matrix * Mat(a);
    obj += alpha * (l->matrix() * c).cwiseProduct(c).sum();
  }
  if (beta != 0.0)
    obj += beta * SpMat(x * l_c->matrix()).cwiseProduct(x).sum();
  return obj;
}

namespace {

IndexList top_magnitude(const Vec& v, int p) {
  IndexList idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    double fa = std::abs(v[a]), fb = std::abs(v[b]);
    return fa != fb ? fa > fb : a < b;
  });
  idx.resize(std::min<std::size_t>(idx.size(), p));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

Vec atom_update_greedy(const AtomUpdateWorkspace& ws, int p) {
  const int n = static_cast<int>(ws.err.rows());
  p = std::min(p, n);
  const Vec psi = ws.err * ws.g;
  Vec a = Vec::Zero(n);

  if (ws.alpha == 0.0 || ws.m_mat == nullptr) {
    // Plain pursuit against an orthonormal system: the p largest entries.
    for (int idx : top_magnitude(psi, p)) a[idx] = psi[idx];
    return a;
  }

  const Mat& m = *ws.m_mat;
  Vec ma = Vec::Zero(n);  // m * a, maintained incrementally
  std::vector<bool> used(n, false);
  IndexList support;
  support.reserve(p);

  for (int step = 0; step < p; ++step) {
    int best = -1;
    double best_score = -1.0;
    double best_num = 0.0;
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double num = psi[j] - ws.alpha * ma[j];
      const double score = num * num / (1.0 + ws.alpha * m(j, j));
      if (score > best_score) {
        best_score = score;
        best = j;
        best_num = num;
      }
    }
    if (best < 0) break;
    const double z = best_num / (1.0 + ws.alpha * m(best, best));
    a[best] = z;
    ma += z * m.col(best);
    used[best] = true;
    support.push_back(best);
  }

  // Re-solve the coefficients exactly on the chosen support.
  const int s = static_cast<int>(support.size());
  Mat sys(s, s);
  Vec rhs(s);
  for (int r = 0; r < s; ++r) {
    rhs[r] = psi[support[r]];
    for (int c = 0; c < s; ++c)
      sys(r, c) = (r == c ? 1.0 : 0.0) + ws.alpha * m(support[r], support[c]);
  }
  Vec coeffs = sys.llt().solve(rhs);
  a.setZero();
  for (int r = 0; r < s; ++r) a[support[r]] = coeffs[r];
  return a;
}

Vec atom_update_admm(const AtomUpdateWorkspace& ws, int p, int admm_iters) {
  if (ws.rho <= 0.0) throw invalid_input("atom_update_admm: rho must be > 0");
  const int n = static_cast<int>(ws.err.rows());
  p = std::min(p, n);
  const Vec psi = ws.err * ws.g;
  const bool penalized = ws.alpha != 0.0 && ws.m_mat != nullptr;

  Eigen::LLT<Mat> local;
  const Eigen::LLT<Mat>* solver = ws.astep_factor;
  if (penalized && solver == nullptr) {
    Mat sys = ws.alpha * (*ws.m_mat);
    sys.diagonal().array() += 1.0 + ws.rho;
    local.compute(sys);
    solver = &local;
  }

  Vec a = Vec::Zero(n), b = Vec::Zero(n), u = Vec::Zero(n);
  for (int k = 0; k < admm_iters; ++k) {
    Vec rhs = psi + ws.rho * (b - u);
    a = penalized ? solver->solve(rhs) : Vec(rhs / (1.0 + ws.rho));
    if (!a.allFinite()) {
      std::ostringstream msg;
      msg << "atom_update_admm: diverged (rho=" << ws.rho << ")";
      throw numeric_error(msg.str());
    }
    Vec au = a + u;
    Vec b_prev = b;
    b.setZero();
    for (int idx : top_magnitude(au, p)) b[idx] = au[idx];
    u += a - b;
    // Converged once the consensus gap and the sparse iterate both settle;
    // the gap alone is zero after the very first step from a cold start.
    if ((a - b).norm() < 1e-8 && (b - b_prev).norm() < 1e-8) break;
  }

  // Exact coefficients on the selected support, mirroring the greedy
  // solver's final re-solve.
  IndexList support;
  for (int i = 0; i < n; ++i)
    if (b[i] != 0.0) support.push_back(i);
  const int s = static_cast<int>(support.size());
  if (s == 0) return b;
  Mat sys(s, s);
  Vec rhs(s);
  for (int r = 0; r < s; ++r) {
    rhs[r] = psi[support[r]];
    for (int c = 0; c < s; ++c)
      sys(r, c) = (r == c ? 1.0 : 0.0) +
                  (penalized ? ws.alpha * (*ws.m_mat)(support[r], support[c]) : 0.0);
  }
  Vec coeffs = sys.llt().solve(rhs);
  b.setZero();
  for (int r = 0; r < s; ++r) b[support[r]] = coeffs[r];
  return b;
}

Vec coeff_update(const AtomUpdateWorkspace& ws, const Vec& a) {
  Vec rhs = ws.err.transpose() * a;
  if (ws.beta == 0.0 || ws.l_c_r.nonZeros() == 0) return rhs;

  // (I + beta Lc_R) is SPD and well conditioned for moderate beta; a short
  // conjugate-gradient loop solves it to working precision.
  const SpMat& lr = ws.l_c_r;
  Vec g = Vec::Zero(rhs.size());
  Vec r = rhs, p = rhs;
  double rr = r.squaredNorm();
  const double target = 1e-24 * std::max(rr, 1e-300);
  for (int it = 0; it < 500 && rr > target; ++it) {
    Vec ap = p + ws.beta * (lr * p);
    double alpha = rr / p.dot(ap);
    g += alpha * p;
    r -= alpha * ap;
    double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return g;
}

bool normalize_atom_pair(Vec& a, Vec& g) {
  // The basis is orthonormal, so the effective-atom norm equals ||a||.
  const double norm = a.norm();
  if (norm < 1e-12) return false;
  a /= norm;
  g *= norm;
  return true;
}

SparseDict init_dictionary(const Mat& y, const std::shared_ptr<const HaarBasis>& phi,
                           int k, int p, std::uint64_t seed) {
  const int n = phi->size();
  const int m = static_cast<int>(y.cols());
  if (y.rows() != n) throw invalid_input("init_dictionary: dimension mismatch");
  if (k < 1 || p < 1) throw invalid_input("init_dictionary: k and p must be >= 1");

  const Mat z = phi->matrix.transpose() * y;
  std::mt19937_64 eng = rng::make_engine(seed, 101);
  IndexList picks(m);
  std::iota(picks.begin(), picks.end(), 0);
  rng::shuffle(picks, eng);

  std::vector<Triplet> trips;
  for (int j = 0; j < k; ++j) {
    const int sig = (j < m) ? picks[j] : static_cast<int>(rng::bounded(eng, m));
    Vec col = Vec::Zero(n);
    for (int idx : top_magnitude(z.col(sig), p)) col[idx] = z(idx, sig);
    double norm = col.norm();
    if (norm < 1e-12) {
      col.setZero();
      col[j % n] = 1.0;
      norm = 1.0;
    }
    for (int i = 0; i < n; ++i)
      if (col[i] != 0.0) trips.emplace_back(i, j, col[i] / norm);
  }
  SpMat a(n, k);
  a.setFromTriplets(trips.begin(), trips.end());
  return SparseDict{std::move(a), p, phi};
}

namespace {

// Bookkeeping for one training run. The residual is tracked in basis
// coordinates (z = basis^T y), which is exact up to basis orthonormality.
struct TrainState {
  Mat z;                 // N x M
  Mat a;                 // N x K, dense working copy of the sparse dictionary
  Mat x;                 // K x M, dense working copy of the codes
  Mat resid;             // z - a * x
  SupportList col_supports;            // per signal
  std::vector<IndexList> row_usage;    // per atom: signals using it
  Vec col_sq;                          // per-column squared residual norms
  Vec smooth;                          // per atom: a_j^T M a_j
  Vec manifold;                        // per atom: x_row Lc x_row^T

  double recon = 0.0;
  double alpha = 0.0, beta = 0.0;
  const Mat* m_mat = nullptr;
  const SpMat* lc = nullptr;

  double objective() const {
    return recon + alpha * smooth.sum() + beta * manifold.sum();
  }

  void rebuild_from_codes(const SpMat& codes) {
    const int k = static_cast<int>(a.cols());
    const int m = static_cast<int>(z.cols());
    x = Mat(codes);
    col_supports = supports_of(codes);
    row_usage.assign(k, {});
    for (int i = 0; i < m; ++i)
      for (int idx : col_supports[i]) row_usage[idx].push_back(i);
    resid = z - a * x;
    col_sq = resid.colwise().squaredNorm();
    recon = col_sq.sum();
    for (int j = 0; j < k; ++j) refresh_manifold(j);
  }

  void refresh_smooth(int j) {
    smooth[j] = (m_mat != nullptr) ? a.col(j).dot(*m_mat * a.col(j)) : 0.0;
  }

  void refresh_manifold(int j) {
    if (lc == nullptr) {
      manifold[j] = 0.0;
      return;
    }
    const IndexList& cols = row_usage[j];
    double v = 0.0;
    for (int c : cols) {
      const double xc = x(j, c);
      if (xc == 0.0) continue;
      for (SpMat::InnerIterator it(*lc, c); it; ++it)
        v += xc * it.value() * x(j, it.row());
    }
    manifold[j] = v;
  }

  // Replaces the residual block for the columns using atom j and refreshes
  // the affected per-column norms.
  void set_residual_block(int j, const Mat& block) {
    const IndexList& cols = row_usage[j];
    for (std::size_t c = 0; c < cols.size(); ++c) {
      recon -= col_sq[cols[c]];
      resid.col(cols[c]) = block.col(c);
      col_sq[cols[c]] = block.col(c).squaredNorm();
      recon += col_sq[cols[c]];
    }
  }
};

int worst_column(const TrainState& st) {
  int arg = 0;
  st.col_sq.maxCoeff(&arg);
  return arg;
}

Vec replacement_atom(const TrainState& st, int p) {
  const Vec& target = st.z.col(worst_column(st));
  Vec a = Vec::Zero(target.size());
  for (int idx : top_magnitude(target, p)) a[idx] = target[idx];
  double norm = a.norm();
  if (norm < 1e-12) {
    a.setZero();
    a[0] = 1.0;
    norm = 1.0;
  }
  return a / norm;
}

SpMat dense_to_sparse_columns(const Mat& d) {
  std::vector<Triplet> trips;
  for (int c = 0; c < d.cols(); ++c)
    for (int r = 0; r < d.rows(); ++r)
      if (d(r, c) != 0.0) trips.emplace_back(r, c, d(r, c));
  SpMat out(d.rows(), d.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

TrainResult gems_train(const Mat& y, const std::shared_ptr<const HaarBasis>& phi,
                       const SparseDict& a0, const LaplacianMatrix* l,
                       const ManifoldLaplacian* l_c, const TrainConfig& cfg) {
  cfg.validate();
  const int n = phi->size();
  const int k = a0.atom_count();
  const int m = static_cast<int>(y.cols());
  if (y.rows() != n || a0.a.rows() != n)
    throw invalid_input("gems_train: dimension mismatch");
  if (cfg.alpha != 0.0 && l == nullptr)
    throw invalid_input("gems_train: alpha > 0 requires the graph Laplacian");
  if (cfg.beta != 0.0 && l_c == nullptr)
    throw invalid_input("gems_train: beta > 0 requires the manifold Laplacian");
  if (l_c != nullptr && l_c->size() != m)
    throw invalid_input("gems_train: manifold Laplacian must match signal count");

  Mat m_mat;
  if (cfg.alpha != 0.0) m_mat = basis_smoothness_matrix(*phi, *l);

  Eigen::LLT<Mat> astep;
  if (cfg.alpha != 0.0 && cfg.atom_solver == AtomSolver::admm) {
    Mat sys = cfg.alpha * m_mat;
    sys.diagonal().array() += 1.0 + cfg.admm_rho;
    astep.compute(sys);
  }

  TrainState st;
  st.z = phi->matrix.transpose() * y;
  st.a = Mat(a0.a);
  st.alpha = cfg.alpha;
  st.beta = cfg.beta;
  st.m_mat = (cfg.alpha != 0.0) ? &m_mat : nullptr;
  st.lc = (cfg.beta != 0.0) ? &l_c->matrix() : nullptr;
  st.smooth = Vec::Zero(k);
  st.manifold = Vec::Zero(k);
  for (int j = 0; j < k; ++j) st.refresh_smooth(j);

  std::vector<TraceRow> trace;
  trace.push_back({0, "init", y.squaredNorm() + cfg.alpha * st.smooth.sum()});

  CodeMatrix codes{SpMat(k, m), cfg.t_sparsity};
  double prev_obj = std::numeric_limits<double>::max();

  const int rounds = std::max(cfg.iterations, 1);
  for (int iter = 1; iter <= rounds; ++iter) {
    // Sparse coding in basis coordinates; the rotated problem is identical
    // because the basis is orthogonal.
    GrscOptions gopts;
    const double smooth_const = cfg.alpha * st.smooth.sum();
    gopts.on_refit = [&](int, double coding_obj) {
      trace.push_back({iter, "coding_refit", coding_obj + smooth_const});
    };
    codes = grsc(st.a, st.z, cfg.beta != 0.0 ? l_c : nullptr, cfg.beta,
                 cfg.t_sparsity, gopts);
    st.rebuild_from_codes(codes.x);
    trace.push_back({iter, "sparse_coding", st.objective()});

    if (cfg.iterations == 0) break;

    for (int j = 0; j < k; ++j) {
      const IndexList& omega = st.row_usage[j];
      if (omega.empty()) {
        st.a.col(j) = replacement_atom(st, cfg.p_sparsity);
        st.refresh_smooth(j);
        trace.push_back({iter, "atom_replace", st.objective()});
        continue;
      }

      // Restricted error with atom j's own contribution added back.
      Vec g_raw(omega.size());
      for (std::size_t c = 0; c < omega.size(); ++c)
        g_raw[c] = st.x(j, omega[c]);
      Mat block(n, omega.size());
      for (std::size_t c = 0; c < omega.size(); ++c)
        block.col(c) = st.resid.col(omega[c]);
      block += st.a.col(j) * g_raw.transpose();

      const double g_norm = g_raw.norm();
      if (g_norm < 1e-12) {
        st.a.col(j) = replacement_atom(st, cfg.p_sparsity);
        st.refresh_smooth(j);
        for (int c : omega) st.x(j, c) = 0.0;
        st.set_residual_block(j, block);
        st.refresh_manifold(j);
        trace.push_back({iter, "atom_replace", st.objective()});
        continue;
      }

      AtomUpdateWorkspace ws;
      ws.err = std::move(block);
      ws.g = g_raw / g_norm;
      ws.m_mat = st.m_mat;
      if (st.lc != nullptr) ws.l_c_r = gather_submatrix(*st.lc, omega);
      ws.alpha = cfg.alpha;
      ws.beta = cfg.beta;
      ws.rho = cfg.admm_rho;
      if (cfg.alpha != 0.0 && cfg.atom_solver == AtomSolver::admm)
        ws.astep_factor = &astep;

      Vec a_new = (cfg.atom_solver == AtomSolver::greedy)
                      ? atom_update_greedy(ws, cfg.p_sparsity)
                      : atom_update_admm(ws, cfg.p_sparsity, cfg.admm_iters);

      Vec g_new = ws.g;
      if (!normalize_atom_pair(a_new, g_new)) {
        st.a.col(j) = replacement_atom(st, cfg.p_sparsity);
        st.refresh_smooth(j);
        for (int c : omega) st.x(j, c) = 0.0;
        st.set_residual_block(j, ws.err);
        st.refresh_manifold(j);
        trace.push_back({iter, "atom_replace", st.objective()});
        continue;
      }

      st.a.col(j) = a_new;
      st.refresh_smooth(j);
      for (std::size_t c = 0; c < omega.size(); ++c)
        st.x(j, omega[c]) = g_new[c];
      st.set_residual_block(j, ws.err - a_new * g_new.transpose());
      st.refresh_manifold(j);
      trace.push_back({iter, "atom_solve", st.objective()});

      Vec g_final = coeff_update(ws, a_new);
      for (std::size_t c = 0; c < omega.size(); ++c)
        st.x(j, omega[c]) = g_final[c];
      st.set_residual_block(j, ws.err - a_new * g_final.transpose());
      st.refresh_manifold(j);
      trace.push_back({iter, "coeff_update", st.objective()});
    }

    const double obj = st.objective();
    trace.push_back({iter, "iter_end", obj});
    if (cfg.convergence_tol > 0.0 && iter > 1 &&
        std::abs(prev_obj - obj) <=
            cfg.convergence_tol * std::max(std::abs(prev_obj), 1e-300))
      break;
    prev_obj = obj;
  }

  TrainResult out;
  out.dict = SparseDict{dense_to_sparse_columns(st.a), cfg.p_sparsity, phi};
  out.codes = CodeMatrix{dense_to_sparse_columns(st.x), cfg.t_sparsity};
  out.trace = std::move(trace);
  return out;
}

KsvdResult ksvd_train(const Mat& y, int t, int k, int iterations,
                      std::uint64_t seed) {
  const int n = static_cast<int>(y.rows());
  const int m = static_cast<int>(y.cols());
  if (t < 1 || k < 1) throw invalid_input("ksvd_train: t and k must be >= 1");
  if (iterations < 0) throw invalid_input("ksvd_train: iterations must be >= 0");

  std::mt19937_64 eng = rng::make_engine(seed, 202);
  IndexList picks(m);
  std::iota(picks.begin(), picks.end(), 0);
  rng::shuffle(picks, eng);

  Mat d(n, k);
  for (int j = 0; j < k; ++j) {
    const int sig = (j < m) ? picks[j] : static_cast<int>(rng::bounded(eng, m));
    Vec col = y.col(sig);
    double norm = col.norm();
    if (norm < 1e-12) {
      col = Vec::Zero(n);
      col[j % n] = 1.0;
      norm = 1.0;
    }
    d.col(j) = col / norm;
  }

  CodeMatrix codes;
  for (int iter = 0; iter < iterations; ++iter) {
    codes = omp_batch(d, y, t);
    Mat x = Mat(codes.x);
    Mat resid = y - d * x;
    SupportList cols = supports_of(codes.x);
    std::vector<IndexList> usage(k);
    for (int i = 0; i < m; ++i)
      for (int idx : cols[i]) usage[idx].push_back(i);

    for (int j = 0; j < k; ++j) {
      const IndexList& omega = usage[j];
      if (omega.empty()) {
        Vec sq = resid.colwise().squaredNorm();
        int arg = 0;
        sq.maxCoeff(&arg);
        Vec col = resid.col(arg);
        double norm = col.norm();
        d.col(j) = norm > 1e-12 ? Vec(col / norm) : d.col(j);
        continue;
      }

      Mat block(n, omega.size());
      Vec g(omega.size());
      for (std::size_t c = 0; c < omega.size(); ++c) {
        g[c] = x(j, omega[c]);
        block.col(c) = resid.col(omega[c]) + d.col(j) * g[c];
      }

      // Dominant singular pair by alternating projections, seeded from the
      // current atom.
      Vec u = d.col(j);
      for (int it = 0; it < 30; ++it) {
        Vec v = block.transpose() * u;
        Vec u_next = block * v;
        double norm = u_next.norm();
        if (norm < 1e-14) break;
        u_next /= norm;
        const double delta = (u_next - u).norm();
        u = u_next;
        if (delta < 1e-12) break;
      }
      Vec v = block.transpose() * u;

      d.col(j) = u;
      for (std::size_t c = 0; c < omega.size(); ++c) {
        x(j, omega[c]) = v[c];
        resid.col(omega[c]) = block.col(c) - u * v[c];
      }
    }

    // Housekeeping: an atom that collapsed onto another one contributes
    // nothing; restart it from the worst-represented signal.
    for (int j = 0; j < k; ++j) {
      double coherence = 0.0;
      for (int r = 0; r < k; ++r)
        if (r != j) coherence = std::max(coherence, std::abs(d.col(j).dot(d.col(r))));
      if (coherence < 0.999) continue;
      for (int c : usage[j]) {
        resid.col(c) += d.col(j) * x(j, c);
        x(j, c) = 0.0;
      }
      Vec sq = resid.colwise().squaredNorm();
      int arg = 0;
      sq.maxCoeff(&arg);
      const double norm = y.col(arg).norm();
      if (norm > 1e-12) d.col(j) = y.col(arg) / norm;
    }
    // Not strictly needed for the algorithm, but keeps the exported codes in
    // sync with the working copies.
    codes.x = dense_to_sparse_columns(x);
  }

  codes = omp_batch(d, y, t);
  return KsvdResult{std::move(d), std::move(codes)};
}

}  // namespace gems
