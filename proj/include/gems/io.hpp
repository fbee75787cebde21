#ifndef GEMS_IO_HPP
#define GEMS_IO_HPP

#include <string>

#include "gems/data.hpp"
#include "gems/dict_learning.hpp"

namespace gems::io {

// All text output goes through one float formatter (17 significant digits)
// so reruns are byte-identical.
std::string format_double(double v);

// --- Graphs: `i j w` per line, 0-based, each undirected edge stored once ---
void save_edge_list(const std::string& path, const WeightedGraph& g);
WeightedGraph load_edge_list(const std::string& path, int n_nodes = -1);
// Learned Laplacians are exported as the graph they imply (w_ij = -L_ij).
void save_laplacian_edge_list(const std::string& path, const LaplacianMatrix& l);

// --- Coordinates: `x,y[,z]`, one node per line ---
void save_coords_csv(const std::string& path, const std::vector<Vec>& coords);
std::vector<Vec> load_coords_csv(const std::string& path);

// --- Dense matrices: <stem>.bin (column-major float64) + <stem>.txt header ---
void save_matrix(const std::string& stem, const Mat& m);
Mat load_matrix(const std::string& stem);

// --- Signal containers: matrix container plus normalization and split labels ---
void save_signals(const std::string& stem, const SignalSet& s);
SignalSet load_signals(const std::string& stem);

// --- Basis containers: matrix container plus the partition tree sidecar ---
void save_basis(const std::string& stem, const HaarBasis& basis);
HaarBasis load_basis(const std::string& stem);
std::string serialize_tree(const PartitionTree& tree);
PartitionTree parse_tree(const std::string& text);

// --- Sparse matrices: header (dims + per-column bound), `col row value` rows ---
void save_sparse(const std::string& path, const SpMat& m, int column_bound);
SpMat load_sparse(const std::string& path, int* column_bound = nullptr);

// --- Objective traces: CSV `iter,phase,objective` ---
void save_trace(const std::string& path, const std::vector<TraceRow>& trace);

// --- Benchmark tables: CSV `dictionary,param,value` ---
void save_bench_csv(const std::string& path, const BenchTable& table);

// --- Model bundles ---
struct ModelBundle {
  std::string mode;  // gems | gems-hd | ksvd
  TrainConfig config;
  std::shared_ptr<const HaarBasis> basis;  // null in ksvd mode
  SparseDict dict;                         // gems modes
  Mat dense_dict;                          // ksvd mode

  Mat effective_dictionary() const;
};

void save_bundle(const std::string& dir, const ModelBundle& bundle,
                 const std::vector<TraceRow>& trace);
ModelBundle load_bundle(const std::string& dir);

std::string train_config_to_json(const TrainConfig& cfg, const std::string& mode);

}  // namespace gems::io

#endif
