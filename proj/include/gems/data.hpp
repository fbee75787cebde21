#ifndef GEMS_DATA_HPP
#define GEMS_DATA_HPP

#include <map>
#include <string>

#include "gems/graph.hpp"
#include "gems/sparse_coding.hpp"

namespace gems {

// Signal batch with a train/test split and a record of how it was scaled.
struct SignalSet {
  Mat y;                          // N x M
  std::vector<std::uint8_t> is_train;
  std::string normalization = "none";  // none | unit-l2 | max-energy

  int n() const { return static_cast<int>(y.rows()); }
  int m() const { return static_cast<int>(y.cols()); }
  Mat train() const;
  Mat test() const;
};

// Draws i.i.d. normal columns and smooths them with the graph low-pass
// filter (I + lambda L)^{-1}. No normalization or split is applied.
SignalSet gen_smooth_signals(const LaplacianMatrix& l, int m_count,
                             double lambda, std::uint64_t seed);

// Piecewise-smooth batch: two independent smooth sets are blended per signal
// by swapping in a random local neighborhood (weight-ordered BFS ball of
// ceil(region_size * N) nodes) from the second set. Signals are scaled to
// unit norm; a random 40% becomes the training split.
SignalSet gen_piecewise_smooth(const LaplacianMatrix& l, int m_count,
                               double lambda, double region_size,
                               std::uint64_t seed);

struct GeoEvent {
  double t = 0.0;  // seconds since epoch
  double lat = 0.0;
  double lon = 0.0;
};

struct IngestResult {
  std::vector<Vec> coords;  // kept grid points, (lon, lat)
  SignalSet signals;        // kept nodes x time bins, max-energy scaled
  int skipped_rows = 0;
  long total_events = 0;
};

// Parses `timestamp,lat,lon` CSV rows (ISO-8601 timestamps).
// Unparseable rows are counted and skipped.
std::vector<GeoEvent> parse_events_csv(const std::string& path,
                                       int* skipped = nullptr);

// Snaps events to the nearest point of a rows x cols grid over their
// bounding box, counts events per node per time bin, and drops nodes whose
// total stays below min_count.
IngestResult ingest_geo_events(const std::vector<GeoEvent>& events, int rows,
                               int cols, double bin_seconds, long min_count);

// Entrywise Gaussian noise with standard deviation sigma_n.
SignalSet add_noise(const SignalSet& s, double sigma_n, std::uint64_t seed);

// (1 / sqrt(N M)) * ||Y - Y_hat||_F
double normalized_rmse(const Mat& y, const Mat& y_hat);

// Standard deviation of the entries around their mean; the reference scale
// for relative noise levels.
double signal_stddev(const Mat& y);

struct BenchRow {
  std::string dictionary;
  double param = 0.0;
  double value = 0.0;
};
using BenchTable = std::vector<BenchRow>;

using DictionarySet = std::vector<std::pair<std::string, Mat>>;

// Approximation error per dictionary and sparsity level; every dictionary is
// coded with plain pursuit so the comparison is about the atoms only.
BenchTable mterm_benchmark(const DictionarySet& dicts, const Mat& y_test,
                           const std::vector<int>& sparsity_levels);

// Denoising error at fixed sparsity across noise levels given relative to
// the data standard deviation. A pseudo-dictionary row "noisy" reports the
// error of the corrupted input itself.
BenchTable denoise_benchmark(const DictionarySet& dicts, const Mat& y_test,
                             const std::vector<double>& noise_ratios, int t,
                             std::uint64_t seed);

// How many test signals select each atom at sparsity t.
std::map<std::string, std::vector<long>> atom_usage_counts(
    const DictionarySet& dicts, const Mat& y_test, int t);

// Weight-ordered BFS ball used by the piecewise generator; exposed for tests.
IndexList bfs_neighborhood(const LaplacianMatrix& l, int seed_node, int size);

}  // namespace gems

#endif
