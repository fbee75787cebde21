#include "gems/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>

namespace gems {

WeightedGraph::WeightedGraph(SpMat weights, double tol) {
  if (weights.rows() != weights.cols())
    throw invalid_input("WeightedGraph: weight matrix must be square");
  weights.prune(0.0, 0.0);
  for (int k = 0; k < weights.outerSize(); ++k) {
    for (SpMat::InnerIterator it(weights, k); it; ++it) {
      if (it.row() == it.col() && std::abs(it.value()) > tol)
        throw invalid_input("WeightedGraph: nonzero diagonal entry");
      if (it.value() < -tol)
        throw invalid_input("WeightedGraph: negative edge weight");
      double mirror = weights.coeff(it.col(), it.row());
      if (std::abs(mirror - it.value()) > tol * std::max(1.0, std::abs(it.value())))
        throw invalid_input("WeightedGraph: weight matrix not symmetric");
    }
  }
  weights_ = std::move(weights);
}

LaplacianMatrix LaplacianMatrix::from_graph(const WeightedGraph& g) {
  const SpMat& w = g.weights();
  const int n = g.size();
  Vec degree = w * Vec::Ones(n);
  SpMat l(n, n);
  std::vector<Triplet> trips;
  trips.reserve(w.nonZeros() + n);
  for (int k = 0; k < w.outerSize(); ++k) {
    for (SpMat::InnerIterator it(w, k); it; ++it) {
      if (it.row() != it.col() && it.value() != 0.0)
        trips.emplace_back(it.row(), it.col(), -it.value());
    }
  }
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, degree[i]);
  l.setFromTriplets(trips.begin(), trips.end());
  LaplacianMatrix out;
  out.mat_ = std::move(l);
  return out;
}

LaplacianMatrix LaplacianMatrix::from_matrix(const SpMat& l, double tol) {
  if (l.rows() != l.cols())
    throw invalid_input("LaplacianMatrix: matrix must be square");
  const int n = static_cast<int>(l.rows());
  Vec row_sums = l * Vec::Ones(n);
  double scale = 0.0;
  for (int k = 0; k < l.outerSize(); ++k)
    for (SpMat::InnerIterator it(l, k); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  scale = std::max(scale, 1.0);
  for (int i = 0; i < n; ++i) {
    if (std::abs(row_sums[i]) > tol * scale)
      throw invalid_input("LaplacianMatrix: row sums must vanish");
  }
  for (int k = 0; k < l.outerSize(); ++k) {
    for (SpMat::InnerIterator it(l, k); it; ++it) {
      if (it.row() != it.col() && it.value() > tol * scale)
        throw invalid_input("LaplacianMatrix: positive off-diagonal entry");
      double mirror = l.coeff(it.col(), it.row());
      if (std::abs(mirror - it.value()) > tol * scale)
        throw invalid_input("LaplacianMatrix: matrix not symmetric");
    }
  }
  LaplacianMatrix out;
  out.mat_ = l;
  out.mat_.prune(0.0, 0.0);
  return out;
}

LaplacianMatrix LaplacianMatrix::from_matrix(const Mat& l, double tol) {
  return from_matrix(SpMat(l.sparseView()), tol);
}

WeightedGraph LaplacianMatrix::to_graph() const {
  const int n = size();
  std::vector<Triplet> trips;
  trips.reserve(mat_.nonZeros());
  for (int k = 0; k < mat_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(mat_, k); it; ++it) {
      if (it.row() != it.col() && it.value() < 0.0)
        trips.emplace_back(it.row(), it.col(), -it.value());
    }
  }
  SpMat w(n, n);
  w.setFromTriplets(trips.begin(), trips.end());
  return WeightedGraph(w);
}

namespace {

std::vector<std::vector<std::pair<int, double>>> neighbor_lists(
    const std::vector<Vec>& coords) {
  const int n = static_cast<int>(coords.size());
  std::vector<std::vector<std::pair<int, double>>> nbrs(n);
  for (int i = 0; i < n; ++i) {
    nbrs[i].reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      nbrs[i].emplace_back(j, (coords[i] - coords[j]).squaredNorm());
    }
    std::sort(nbrs[i].begin(), nbrs[i].end(),
              [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second < b.second
                                            : a.first < b.first;
              });
  }
  return nbrs;
}

WeightedGraph build_kernel_graph(const std::vector<Vec>& coords, int knn,
                                 const std::function<double(double)>& kernel) {
  const int n = static_cast<int>(coords.size());
  if (n < 2) throw invalid_input("graph construction needs at least 2 points");
  const int dim = static_cast<int>(coords.front().size());
  for (const Vec& c : coords)
    if (c.size() != dim) throw invalid_input("inconsistent point dimensions");
  if (knn != 0 && (knn < 1 || knn >= n))
    throw invalid_input("knn must satisfy 1 <= knn < n");

  std::vector<Triplet> trips;
  if (knn == 0) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double w = kernel((coords[i] - coords[j]).squaredNorm());
        if (w != 0.0) {
          trips.emplace_back(i, j, w);
          trips.emplace_back(j, i, w);
        }
      }
    }
  } else {
    auto nbrs = neighbor_lists(coords);
    std::vector<std::pair<int, int>> kept;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < knn; ++k) {
        int j = nbrs[i][k].first;
        kept.emplace_back(std::min(i, j), std::max(i, j));
      }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    for (auto [i, j] : kept) {
      double w = kernel((coords[i] - coords[j]).squaredNorm());
      if (w != 0.0) {
        trips.emplace_back(i, j, w);
        trips.emplace_back(j, i, w);
      }
    }
  }
  SpMat w(n, n);
  w.setFromTriplets(trips.begin(), trips.end());
  return WeightedGraph(std::move(w));
}

}  // namespace

WeightedGraph build_rbf_graph(const std::vector<Vec>& coords, double sigma,
                              int knn) {
  if (sigma <= 0.0) throw invalid_input("build_rbf_graph: sigma must be positive");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return build_kernel_graph(coords, knn,
                            [inv](double d2) { return std::exp(-d2 * inv); });
}

WeightedGraph build_inverse_distance_graph(const std::vector<Vec>& coords,
                                           int knn) {
  // Coincident points would give infinite weight; cap at the kernel value of
  // the smallest positive pairwise distance times 1e6.
  return build_kernel_graph(coords, knn, [](double d2) {
    return d2 > 0.0 ? 1.0 / std::sqrt(d2) : 1e6;
  });
}

LaplacianMatrix laplacian(const WeightedGraph& g) {
  return LaplacianMatrix::from_graph(g);
}

double dirichlet_energy(const LaplacianMatrix& l, const Vec& f) {
  if (f.size() != l.size())
    throw invalid_input("dirichlet_energy: signal dimension mismatch");
  return f.dot(l.matrix() * f);
}

IndexList all_vertices(int n) {
  IndexList v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

SpMat induced_laplacian(const LaplacianMatrix& l, const IndexList& subset) {
  const int d = static_cast<int>(subset.size());
  std::vector<int> pos(l.size(), -1);
  for (int i = 0; i < d; ++i) pos[subset[i]] = i;

  std::vector<Triplet> trips;
  Vec degree = Vec::Zero(d);
  const SpMat& m = l.matrix();
  for (int c = 0; c < d; ++c) {
    for (SpMat::InnerIterator it(m, subset[c]); it; ++it) {
      int r = pos[it.row()];
      if (r < 0 || r == c) continue;
      double w = -it.value();
      if (w <= 0.0) continue;
      trips.emplace_back(r, c, -w);
      degree[c] += w;
    }
  }
  for (int i = 0; i < d; ++i) trips.emplace_back(i, i, degree[i]);
  SpMat out(d, d);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

std::vector<IndexList> connected_components(const LaplacianMatrix& l,
                                            const IndexList& subset) {
  const int d = static_cast<int>(subset.size());
  std::vector<int> pos(l.size(), -1);
  for (int i = 0; i < d; ++i) pos[subset[i]] = i;

  std::vector<int> label(d, -1);
  const SpMat& m = l.matrix();
  int n_comp = 0;
  for (int s = 0; s < d; ++s) {
    if (label[s] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    label[s] = n_comp;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (SpMat::InnerIterator it(m, subset[u]); it; ++it) {
        int v = pos[it.row()];
        if (v < 0 || v == u || label[v] >= 0) continue;
        if (-it.value() > 0.0) {
          label[v] = n_comp;
          q.push(v);
        }
      }
    }
    ++n_comp;
  }

  std::vector<IndexList> comps(n_comp);
  for (int i = 0; i < d; ++i) comps[label[i]].push_back(subset[i]);
  std::sort(comps.begin(), comps.end(), [](const IndexList& a, const IndexList& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  return comps;
}

namespace {

void fix_sign(Vec& v) {
  const double noise = 1e-10 * v.cwiseAbs().maxCoeff();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > noise) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

FiedlerResult component_direction(const std::vector<IndexList>& comps,
                                  const IndexList& subset) {
  const int d = static_cast<int>(subset.size());
  std::vector<int> pos(1 + *std::max_element(subset.begin(), subset.end()), -1);
  for (int i = 0; i < d; ++i) pos[subset[i]] = i;

  const auto& big = comps.front();
  const int a = static_cast<int>(big.size());
  const int b = d - a;
  // Zero-mean two-level vector: +sqrt(b/(a*d)) on the largest component.
  const double hi = std::sqrt(static_cast<double>(b) / (static_cast<double>(a) * d));
  const double lo = -std::sqrt(static_cast<double>(a) / (static_cast<double>(b) * d));
  FiedlerResult res;
  res.vector = Vec::Constant(d, lo);
  for (int v : big) res.vector[pos[v]] = hi;
  res.eigenvalue = 0.0;
  res.connected = false;
  fix_sign(res.vector);
  return res;
}

FiedlerResult dense_fiedler(const SpMat& lind) {
  Eigen::SelfAdjointEigenSolver<Mat> es{Mat(lind)};
  FiedlerResult res;
  res.vector = es.eigenvectors().col(1);
  res.eigenvalue = es.eigenvalues()[1];
  res.vector.normalize();
  fix_sign(res.vector);
  return res;
}

// Lanczos on the induced Laplacian with the constant vector deflated and full
// reorthogonalization. The smallest Ritz pair of the deflated operator
// approximates the Fiedler pair; iteration stops once the Ritz residual is
// below tolerance and the sign pattern has stopped changing.
FiedlerResult lanczos_fiedler(const SpMat& lind, const FiedlerOptions& opts) {
  const int d = static_cast<int>(lind.rows());
  const Vec ones_unit = Vec::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  const int m_max = std::min(opts.max_iters, d - 1);

  auto deflate = [&](Vec& v) { v -= ones_unit * ones_unit.dot(v); };

  std::mt19937_64 eng = rng::make_engine(0x9E3779B9u, 17);
  Vec v = Vec::NullaryExpr(d, [&](Eigen::Index) { return rng::uniform01(eng) - 0.5; });
  deflate(v);
  v.normalize();

  std::vector<Vec> basis;
  basis.reserve(m_max);
  std::vector<double> alpha, beta;  // tridiagonal coefficients

  Vec ritz = v;
  double theta = 0.0;
  double resid = std::numeric_limits<double>::max();
  std::vector<std::int8_t> last_signs;
  int stable = 0;
  int iters = 0;

  Vec w;
  for (int m = 0; m < m_max; ++m) {
    basis.push_back(v);
    w = lind * v;
    double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v;
    if (m > 0) w -= beta[m - 1] * basis[m - 1];
    deflate(w);
    for (const Vec& q : basis) w -= q.dot(w) * q;  // full reorthogonalization
    double b = w.norm();
    iters = m + 1;

    // Smallest Ritz pair of the current tridiagonal.
    const int k = m + 1;
    Mat t = Mat::Zero(k, k);
    for (int i = 0; i < k; ++i) t(i, i) = alpha[i];
    for (int i = 0; i + 1 < k; ++i) {
      t(i, i + 1) = beta[i];
      t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(t);
    theta = es.eigenvalues()[0];
    Vec s = es.eigenvectors().col(0);
    ritz.setZero(d);
    for (int i = 0; i < k; ++i) ritz += s[i] * basis[i];
    ritz.normalize();
    resid = b * std::abs(s[k - 1]);

    std::vector<std::int8_t> signs(d);
    for (int i = 0; i < d; ++i) signs[i] = ritz[i] >= 0.0 ? 1 : -1;
    // Compare against the global sign flip as well; the Ritz vector's overall
    // sign is arbitrary between iterations.
    if (!last_signs.empty()) {
      bool same = true, flipped = true;
      for (int i = 0; i < d; ++i) {
        same = same && signs[i] == last_signs[i];
        flipped = flipped && signs[i] == -last_signs[i];
      }
      stable = (same || flipped) ? stable + 1 : 0;
    }
    last_signs = std::move(signs);

    if (stable >= opts.stable_sign_iters && resid < opts.residual_tol) break;
    if (b < 1e-14) break;  // Krylov space exhausted; Ritz pair is exact
    beta.push_back(b);
    v = w / b;
  }

  if (resid > opts.residual_tol && d <= 4096) return dense_fiedler(lind);

  FiedlerResult res;
  res.vector = ritz;
  res.eigenvalue = theta;
  res.iterations = iters;
  fix_sign(res.vector);
  return res;
}

}  // namespace

FiedlerResult fiedler_vector(const LaplacianMatrix& l, const IndexList& subset,
                             const FiedlerOptions& opts) {
  const int d = static_cast<int>(subset.size());
  if (d < 2) throw invalid_input("fiedler_vector: subset needs >= 2 vertices");

  auto comps = connected_components(l, subset);
  if (comps.size() > 1) return component_direction(comps, subset);

  SpMat lind = induced_laplacian(l, subset);
  if (d <= opts.dense_cutoff) {
    FiedlerResult res = dense_fiedler(lind);
    res.iterations = 0;
    return res;
  }
  return lanczos_fiedler(lind, opts);
}

}  // namespace gems
