#include "gems/data.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>

namespace gems {

Mat SignalSet::train() const {
  int count = 0;
  for (auto b : is_train) count += b ? 1 : 0;
  Mat out(y.rows(), count);
  int c = 0;
  for (int i = 0; i < m(); ++i)
    if (is_train[i]) out.col(c++) = y.col(i);
  return out;
}

Mat SignalSet::test() const {
  int count = 0;
  for (auto b : is_train) count += b ? 0 : 1;
  Mat out(y.rows(), count);
  int c = 0;
  for (int i = 0; i < m(); ++i)
    if (!is_train[i]) out.col(c++) = y.col(i);
  return out;
}

namespace {

Mat random_normal_matrix(int rows, int cols, std::uint64_t seed,
                         std::uint64_t stream) {
  rng::NormalSampler normal(seed, stream);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = normal();
  return m;
}

// (I + lambda L)^{-1} rhs. Dense Cholesky below a size cutoff; sparse
// factorization above it (large graphs are expected to be kNN-pruned).
Mat smooth_solve(const LaplacianMatrix& l, double lambda, const Mat& rhs) {
  const int n = l.size();
  if (n <= 2048) {
    Mat sys = lambda * l.dense();
    sys.diagonal().array() += 1.0;
    return sys.llt().solve(rhs);
  }
  SpMat sys = lambda * l.matrix();
  for (int i = 0; i < n; ++i) sys.coeffRef(i, i) += 1.0;
  Eigen::SimplicialLLT<SpMat> solver(sys);
  if (solver.info() != Eigen::Success)
    throw numeric_error("gen_smooth_signals: smoothing factorization failed");
  return solver.solve(rhs);
}

}  // namespace

SignalSet gen_smooth_signals(const LaplacianMatrix& l, int m_count,
                             double lambda, std::uint64_t seed) {
  if (m_count < 1) throw invalid_input("gen_smooth_signals: m_count must be >= 1");
  if (lambda <= 0.0) throw invalid_input("gen_smooth_signals: lambda must be > 0");
  Mat y0 = random_normal_matrix(l.size(), m_count, seed, 301);
  SignalSet out;
  out.y = smooth_solve(l, lambda, y0);
  out.is_train.assign(m_count, 1);
  return out;
}

IndexList bfs_neighborhood(const LaplacianMatrix& l, int seed_node, int size) {
  const int n = l.size();
  size = std::min(size, n);
  std::vector<bool> visited(n, false);
  IndexList ball;
  ball.reserve(size);
  visited[seed_node] = true;
  ball.push_back(seed_node);

  IndexList frontier{seed_node};
  const SpMat& m = l.matrix();
  while (static_cast<int>(ball.size()) < size && !frontier.empty()) {
    // Next level, ordered by the strongest connecting edge so truncation
    // keeps the geometrically closest nodes.
    std::vector<std::pair<double, int>> next;
    for (int u : frontier) {
      for (SpMat::InnerIterator it(m, u); it; ++it) {
        const int v = static_cast<int>(it.row());
        if (v == u || visited[v]) continue;
        const double w = -it.value();
        if (w <= 0.0) continue;
        next.emplace_back(-w, v);
      }
    }
    std::sort(next.begin(), next.end());
    frontier.clear();
    for (auto& [negw, v] : next) {
      if (visited[v]) continue;
      visited[v] = true;
      frontier.push_back(v);
      ball.push_back(v);
      if (static_cast<int>(ball.size()) == size) break;
    }
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

SignalSet gen_piecewise_smooth(const LaplacianMatrix& l, int m_count,
                               double lambda, double region_size,
                               std::uint64_t seed) {
  if (region_size < 0.0 || region_size > 1.0)
    throw invalid_input("gen_piecewise_smooth: region_size must be in [0, 1]");
  const int n = l.size();
  const SignalSet base = gen_smooth_signals(l, m_count, lambda, seed);
  const Mat patch = smooth_solve(l, lambda,
                                 random_normal_matrix(n, m_count, seed, 302));

  const int ball_size = static_cast<int>(std::ceil(region_size * n));
  std::mt19937_64 eng = rng::make_engine(seed, 303);

  SignalSet out;
  out.y = base.y;
  for (int i = 0; i < m_count; ++i) {
    if (ball_size == 0) break;
    const int seed_node = static_cast<int>(rng::bounded(eng, n));
    for (int v : bfs_neighborhood(l, seed_node, ball_size))
      out.y(v, i) = patch(v, i);
  }
  for (int i = 0; i < m_count; ++i) {
    const double norm = out.y.col(i).norm();
    if (norm > 0.0) out.y.col(i) /= norm;
  }
  out.normalization = "unit-l2";

  IndexList order(m_count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_eng = rng::make_engine(seed, 304);
  rng::shuffle(order, split_eng);
  const int train_count = static_cast<int>(std::lround(0.4 * m_count));
  out.is_train.assign(m_count, 0);
  for (int i = 0; i < train_count; ++i) out.is_train[order[i]] = 1;
  return out;
}

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
long days_from_civil(int y, int mth, int d) {
  y -= mth <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (mth + (mth > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

bool parse_iso8601(const std::string& s, double* out) {
  int y, mth, d, hh = 0, mm = 0;
  double ss = 0.0;
  char sep;
  int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mth, &d, &sep,
                      &hh, &mm, &ss);
  if (n < 3) return false;
  if (n >= 4 && sep != 'T' && sep != ' ') return false;
  if (mth < 1 || mth > 12 || d < 1 || d > 31 || hh < 0 || hh > 23 || mm < 0 ||
      mm > 59 || ss < 0.0 || ss >= 61.0)
    return false;
  *out = static_cast<double>(days_from_civil(y, mth, d)) * 86400.0 +
         hh * 3600.0 + mm * 60.0 + ss;
  return true;
}

}  // namespace

std::vector<GeoEvent> parse_events_csv(const std::string& path, int* skipped) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open events file: " + path);
  std::vector<GeoEvent> events;
  std::string line;
  int bad = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("timestamp", 0) == 0) continue;  // header
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      ++bad;
      continue;
    }
    GeoEvent ev;
    try {
      ev.lat = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      ev.lon = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      ++bad;
      continue;
    }
    if (!parse_iso8601(line.substr(0, c1), &ev.t)) {
      ++bad;
      continue;
    }
    events.push_back(ev);
  }
  if (skipped) *skipped = bad;
  return events;
}

IngestResult ingest_geo_events(const std::vector<GeoEvent>& events, int rows,
                               int cols, double bin_seconds, long min_count) {
  if (rows < 2 || cols < 2)
    throw invalid_input("ingest_geo_events: grid must be at least 2x2");
  if (bin_seconds <= 0.0)
    throw invalid_input("ingest_geo_events: bin interval must be positive");
  if (events.empty()) throw invalid_input("ingest_geo_events: no events");

  double lat_min = events[0].lat, lat_max = events[0].lat;
  double lon_min = events[0].lon, lon_max = events[0].lon;
  double t_min = events[0].t, t_max = events[0].t;
  for (const GeoEvent& e : events) {
    lat_min = std::min(lat_min, e.lat);
    lat_max = std::max(lat_max, e.lat);
    lon_min = std::min(lon_min, e.lon);
    lon_max = std::max(lon_max, e.lon);
    t_min = std::min(t_min, e.t);
    t_max = std::max(t_max, e.t);
  }
  const double lat_step = (lat_max - lat_min) / (rows - 1);
  const double lon_step = (lon_max - lon_min) / (cols - 1);
  const int n_bins = static_cast<int>((t_max - t_min) / bin_seconds) + 1;

  auto snap = [](double v, double lo, double step, int n) {
    if (step <= 0.0) return 0;
    int idx = static_cast<int>(std::lround((v - lo) / step));
    return std::clamp(idx, 0, n - 1);
  };

  std::map<std::pair<int, int>, std::vector<long>> counts;  // grid cell -> bins
  for (const GeoEvent& e : events) {
    const int r = snap(e.lat, lat_min, lat_step, rows);
    const int c = snap(e.lon, lon_min, lon_step, cols);
    auto& bins = counts[{r, c}];
    if (bins.empty()) bins.assign(n_bins, 0);
    ++bins[snap(e.t, t_min, bin_seconds, n_bins)];
  }

  IngestResult out;
  out.total_events = static_cast<long>(events.size());
  std::vector<const std::vector<long>*> kept_bins;
  for (const auto& [cell, bins] : counts) {
    const long total = std::accumulate(bins.begin(), bins.end(), 0L);
    if (total < min_count) continue;
    Vec coord(2);
    coord << lon_min + cell.second * lon_step, lat_min + cell.first * lat_step;
    out.coords.push_back(coord);
    kept_bins.push_back(&bins);
  }
  if (out.coords.empty())
    throw invalid_input("ingest_geo_events: no grid node reaches min_count");

  const int n = static_cast<int>(out.coords.size());
  out.signals.y = Mat::Zero(n, n_bins);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < n_bins; ++b)
      out.signals.y(i, b) = static_cast<double>((*kept_bins[i])[b]);

  double max_norm = 0.0;
  for (int b = 0; b < n_bins; ++b)
    max_norm = std::max(max_norm, out.signals.y.col(b).norm());
  if (max_norm > 0.0) out.signals.y /= max_norm;
  out.signals.normalization = "max-energy";
  out.signals.is_train.assign(n_bins, 1);
  return out;
}

SignalSet add_noise(const SignalSet& s, double sigma_n, std::uint64_t seed) {
  if (sigma_n < 0.0) throw invalid_input("add_noise: sigma must be >= 0");
  SignalSet out = s;
  if (sigma_n == 0.0) return out;
  rng::NormalSampler normal(seed, 305);
  for (int c = 0; c < out.y.cols(); ++c)
    for (int r = 0; r < out.y.rows(); ++r) out.y(r, c) += sigma_n * normal();
  return out;
}

double normalized_rmse(const Mat& y, const Mat& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
    throw invalid_input("normalized_rmse: shape mismatch");
  return (y - y_hat).norm() /
         std::sqrt(static_cast<double>(y.rows()) * y.cols());
}

double signal_stddev(const Mat& y) {
  const double mean = y.mean();
  return std::sqrt((y.array() - mean).square().sum() / y.size());
}

BenchTable mterm_benchmark(const DictionarySet& dicts, const Mat& y_test,
                           const std::vector<int>& sparsity_levels) {
  if (dicts.empty()) throw invalid_input("mterm_benchmark: no dictionaries");
  BenchTable table;
  for (const auto& [name, d] : dicts) {
    for (int t : sparsity_levels) {
      CodeMatrix codes = omp_batch(d, y_test, t);
      table.push_back({name, static_cast<double>(t),
                       normalized_rmse(y_test, d * codes.x)});
    }
  }
  return table;
}

BenchTable denoise_benchmark(const DictionarySet& dicts, const Mat& y_test,
                             const std::vector<double>& noise_ratios, int t,
                             std::uint64_t seed) {
  if (dicts.empty()) throw invalid_input("denoise_benchmark: no dictionaries");
  const double sigma_d = signal_stddev(y_test);
  SignalSet clean;
  clean.y = y_test;
  clean.is_train.assign(y_test.cols(), 0);

  BenchTable table;
  std::uint64_t level = 0;
  for (double ratio : noise_ratios) {
    if (ratio < 0.0) throw invalid_input("denoise_benchmark: negative noise level");
    const SignalSet noisy = add_noise(clean, ratio * sigma_d, seed + 7919 * level++);
    table.push_back({"noisy", ratio, normalized_rmse(y_test, noisy.y)});
    for (const auto& [name, d] : dicts) {
      CodeMatrix codes = omp_batch(d, noisy.y, t);
      table.push_back({name, ratio, normalized_rmse(y_test, d * codes.x)});
    }
  }
  return table;
}

std::map<std::string, std::vector<long>> atom_usage_counts(
    const DictionarySet& dicts, const Mat& y_test, int t) {
  std::map<std::string, std::vector<long>> usage;
  for (const auto& [name, d] : dicts) {
    CodeMatrix codes = omp_batch(d, y_test, t);
    std::vector<long> counts(d.cols(), 0);
    for (int c = 0; c < codes.x.outerSize(); ++c)
      for (SpMat::InnerIterator it(codes.x, c); it; ++it)
        if (it.value() != 0.0) ++counts[it.row()];
    usage[name] = std::move(counts);
  }
  return usage;
}

}  // namespace gems
