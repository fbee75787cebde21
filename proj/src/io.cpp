#include "gems/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gems::io {

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw invalid_input("cannot write file: " + path);
  return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw invalid_input("cannot open file: " + path);
  return in;
}

// Simple `key value...` header reader; returns the remainder of the line.
std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(key, 0) != 0)
    throw invalid_input("malformed header, expected '" + key + "'");
  std::string rest = line.substr(key.size());
  if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
  return rest;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_edge_list(const std::string& path, const WeightedGraph& g) {
  std::ofstream out = open_out(path);
  const SpMat& w = g.weights();
  for (int c = 0; c < w.outerSize(); ++c) {
    for (SpMat::InnerIterator it(w, c); it; ++it) {
      if (it.row() < it.col() && it.value() != 0.0)
        out << it.row() << ' ' << it.col() << ' ' << format_double(it.value())
            << '\n';
    }
  }
}

WeightedGraph load_edge_list(const std::string& path, int n_nodes) {
  std::ifstream in = open_in(path);
  std::vector<Triplet> trips;
  int max_idx = -1;
  int i, j;
  double w;
  while (in >> i >> j >> w) {
    if (i < 0 || j < 0) throw invalid_input("edge list: negative index");
    trips.emplace_back(i, j, w);
    if (i != j) trips.emplace_back(j, i, w);
    max_idx = std::max(max_idx, std::max(i, j));
  }
  const int n = n_nodes > 0 ? n_nodes : max_idx + 1;
  if (max_idx >= n) throw invalid_input("edge list: index exceeds node count");
  SpMat m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return WeightedGraph(std::move(m));
}

void save_laplacian_edge_list(const std::string& path, const LaplacianMatrix& l) {
  save_edge_list(path, l.to_graph());
}

void save_coords_csv(const std::string& path, const std::vector<Vec>& coords) {
  std::ofstream out = open_out(path);
  for (const Vec& c : coords) {
    for (int i = 0; i < c.size(); ++i)
      out << (i ? "," : "") << format_double(c[i]);
    out << '\n';
  }
}

std::vector<Vec> load_coords_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<Vec> coords;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.size() < 2 || vals.size() > 3)
      throw invalid_input("coords csv: expected 2 or 3 columns");
    Vec v(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
    coords.push_back(std::move(v));
  }
  return coords;
}

namespace {

void save_matrix_bin(const std::string& path, const Mat& m) {
  std::ofstream out = open_out(path, true);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Mat load_matrix_bin(const std::string& path, int rows, int cols) {
  std::ifstream in = open_in(path, true);
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw invalid_input("matrix binary truncated: " + path);
  return m;
}

}  // namespace

void save_matrix(const std::string& stem, const Mat& m) {
  std::ofstream txt = open_out(stem + ".txt");
  txt << "gems-matrix v1\n"
      << "rows " << m.rows() << '\n'
      << "cols " << m.cols() << '\n'
      << "layout column-major float64\n";
  save_matrix_bin(stem + ".bin", m);
}

Mat load_matrix(const std::string& stem) {
  std::ifstream txt = open_in(stem + ".txt");
  expect_key(txt, "gems-matrix");
  const int rows = std::stoi(expect_key(txt, "rows"));
  const int cols = std::stoi(expect_key(txt, "cols"));
  return load_matrix_bin(stem + ".bin", rows, cols);
}

void save_signals(const std::string& stem, const SignalSet& s) {
  std::ofstream txt = open_out(stem + ".txt");
  txt << "gems-signals v1\n"
      << "rows " << s.n() << '\n'
      << "cols " << s.m() << '\n'
      << "normalization " << s.normalization << '\n'
      << "labels";
  for (auto b : s.is_train) txt << ' ' << (b ? "train" : "test");
  txt << '\n';
  save_matrix_bin(stem + ".bin", s.y);
}

SignalSet load_signals(const std::string& stem) {
  std::ifstream txt = open_in(stem + ".txt");
  expect_key(txt, "gems-signals");
  const int rows = std::stoi(expect_key(txt, "rows"));
  const int cols = std::stoi(expect_key(txt, "cols"));
  SignalSet s;
  s.normalization = expect_key(txt, "normalization");
  std::stringstream labels(expect_key(txt, "labels"));
  std::string tok;
  while (labels >> tok) s.is_train.push_back(tok == "train" ? 1 : 0);
  if (static_cast<int>(s.is_train.size()) != cols)
    throw invalid_input("signals container: label count mismatch");
  s.y = load_matrix_bin(stem + ".bin", rows, cols);
  return s;
}

std::string serialize_tree(const PartitionTree& tree) {
  std::string out;
  auto walk = [&](auto&& self, int id) -> void {
    const PartitionNode& node = tree.nodes[id];
    if (node.left < 0) {
      out += std::to_string(node.vertices.front());
      return;
    }
    out += '(';
    self(self, node.left);
    out += ' ';
    self(self, node.right);
    out += ')';
  };
  walk(walk, 0);
  return out;
}

PartitionTree parse_tree(const std::string& text) {
  struct Parsed {
    IndexList vertices;
    int left = -1, right = -1;  // indices into the scratch vector
  };
  std::vector<Parsed> scratch;
  std::size_t pos = 0;

  auto skip_ws = [&] { while (pos < text.size() && text[pos] == ' ') ++pos; };
  auto parse_node = [&](auto&& self) -> int {
    skip_ws();
    if (pos >= text.size()) throw invalid_input("tree string: unexpected end");
    if (text[pos] == '(') {
      ++pos;
      int left = self(self);
      int right = self(self);
      skip_ws();
      if (pos >= text.size() || text[pos] != ')')
        throw invalid_input("tree string: missing ')'");
      ++pos;
      Parsed p;
      p.left = left;
      p.right = right;
      p.vertices = scratch[left].vertices;
      p.vertices.insert(p.vertices.end(), scratch[right].vertices.begin(),
                        scratch[right].vertices.end());
      std::sort(p.vertices.begin(), p.vertices.end());
      scratch.push_back(std::move(p));
      return static_cast<int>(scratch.size()) - 1;
    }
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
      ++pos;
    if (start == pos) throw invalid_input("tree string: expected vertex index");
    Parsed p;
    p.vertices.push_back(std::stoi(text.substr(start, pos - start)));
    scratch.push_back(std::move(p));
    return static_cast<int>(scratch.size()) - 1;
  };
  const int root = parse_node(parse_node);

  // Re-number breadth-first so split ordinals match construction order.
  PartitionTree tree;
  tree.n = static_cast<int>(scratch[root].vertices.size());
  std::vector<int> queue{root};
  std::vector<int> ids{0};
  tree.nodes.push_back({scratch[root].vertices, -1, -1, 0, -1});
  int ordinal = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Parsed& p = scratch[queue[head]];
    const int id = ids[head];
    if (p.left < 0) continue;
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({scratch[p.left].vertices, -1, -1,
                          tree.nodes[id].depth + 1, -1});
    tree.nodes.push_back({scratch[p.right].vertices, -1, -1,
                          tree.nodes[id].depth + 1, -1});
    tree.nodes[id].left = left_id;
    tree.nodes[id].right = left_id + 1;
    tree.nodes[id].split_ordinal = ordinal++;
    queue.push_back(p.left);
    ids.push_back(left_id);
    queue.push_back(p.right);
    ids.push_back(left_id + 1);
  }
  return tree;
}

void save_basis(const std::string& stem, const HaarBasis& basis) {
  std::ofstream txt = open_out(stem + ".txt");
  txt << "gems-basis v1\n"
      << "n " << basis.size() << '\n'
      << "order constant-then-splits-breadth-first\n"
      << "tree " << serialize_tree(basis.tree) << '\n';
  save_matrix_bin(stem + ".bin", basis.matrix);
}

HaarBasis load_basis(const std::string& stem) {
  std::ifstream txt = open_in(stem + ".txt");
  expect_key(txt, "gems-basis");
  const int n = std::stoi(expect_key(txt, "n"));
  expect_key(txt, "order");
  HaarBasis basis;
  basis.tree = parse_tree(expect_key(txt, "tree"));
  if (basis.tree.n != n)
    throw invalid_input("basis container: tree does not cover n vertices");
  basis.matrix = load_matrix_bin(stem + ".bin", n, n);
  return basis;
}

void save_sparse(const std::string& path, const SpMat& m, int column_bound) {
  std::ofstream out = open_out(path);
  out << "gems-sparse v1\n"
      << "rows " << m.rows() << '\n'
      << "cols " << m.cols() << '\n'
      << "bound " << column_bound << '\n';
  for (int c = 0; c < m.outerSize(); ++c)
    for (SpMat::InnerIterator it(m, c); it; ++it)
      if (it.value() != 0.0)
        out << c << ' ' << it.row() << ' ' << format_double(it.value()) << '\n';
}

SpMat load_sparse(const std::string& path, int* column_bound) {
  std::ifstream in = open_in(path);
  expect_key(in, "gems-sparse");
  const int rows = std::stoi(expect_key(in, "rows"));
  const int cols = std::stoi(expect_key(in, "cols"));
  const int bound = std::stoi(expect_key(in, "bound"));
  if (column_bound) *column_bound = bound;
  std::vector<Triplet> trips;
  int c, r;
  double v;
  while (in >> c >> r >> v) trips.emplace_back(r, c, v);
  SpMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

void save_trace(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out = open_out(path);
  out << "iter,phase,objective\n";
  for (const TraceRow& row : trace)
    out << row.iter << ',' << row.phase << ',' << format_double(row.objective)
        << '\n';
}

void save_bench_csv(const std::string& path, const BenchTable& table) {
  std::ofstream out = open_out(path);
  out << "dictionary,param,value\n";
  for (const BenchRow& row : table)
    out << row.dictionary << ',' << format_double(row.param) << ','
        << format_double(row.value) << '\n';
}

namespace {

const char* solver_name(AtomSolver s) {
  return s == AtomSolver::greedy ? "greedy" : "admm";
}

AtomSolver solver_from_name(const std::string& s) {
  if (s == "greedy") return AtomSolver::greedy;
  if (s == "admm") return AtomSolver::admm;
  throw invalid_input("unknown atom solver: " + s);
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg, const std::string& mode) {
  nlohmann::json j;
  j["mode"] = mode;
  j["t_sparsity"] = cfg.t_sparsity;
  j["p_sparsity"] = cfg.p_sparsity;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["iterations"] = cfg.iterations;
  j["convergence_tol"] = cfg.convergence_tol;
  j["atom_solver"] = solver_name(cfg.atom_solver);
  j["admm_rho"] = cfg.admm_rho;
  j["admm_iters"] = cfg.admm_iters;
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

Mat ModelBundle::effective_dictionary() const {
  if (mode == "ksvd") return dense_dict;
  return dict.effective();
}

void save_bundle(const std::string& dir, const ModelBundle& bundle,
                 const std::vector<TraceRow>& trace) {
  std::filesystem::create_directories(dir);
  std::ofstream cfg = open_out(dir + "/config.json");
  cfg << train_config_to_json(bundle.config, bundle.mode);
  save_trace(dir + "/trace.csv", trace);
  if (bundle.mode == "ksvd") {
    save_matrix(dir + "/dict", bundle.dense_dict);
  } else {
    if (!bundle.basis) throw invalid_input("save_bundle: bundle has no basis");
    save_basis(dir + "/basis", *bundle.basis);
    save_sparse(dir + "/a.txt", bundle.dict.a, bundle.dict.p);
  }
}

ModelBundle load_bundle(const std::string& dir) {
  std::ifstream cfg_file = open_in(dir + "/config.json");
  nlohmann::json j = nlohmann::json::parse(cfg_file);

  ModelBundle bundle;
  bundle.mode = j.at("mode").get<std::string>();
  bundle.config.t_sparsity = j.at("t_sparsity").get<int>();
  bundle.config.p_sparsity = j.at("p_sparsity").get<int>();
  bundle.config.alpha = j.at("alpha").get<double>();
  bundle.config.beta = j.at("beta").get<double>();
  bundle.config.iterations = j.at("iterations").get<int>();
  bundle.config.convergence_tol = j.at("convergence_tol").get<double>();
  bundle.config.atom_solver = solver_from_name(j.at("atom_solver").get<std::string>());
  bundle.config.admm_rho = j.at("admm_rho").get<double>();
  bundle.config.admm_iters = j.at("admm_iters").get<int>();
  bundle.config.seed = j.at("seed").get<std::uint64_t>();

  if (bundle.mode == "ksvd") {
    bundle.dense_dict = load_matrix(dir + "/dict");
  } else {
    bundle.basis = std::make_shared<const HaarBasis>(load_basis(dir + "/basis"));
    int bound = 0;
    SpMat a = load_sparse(dir + "/a.txt", &bound);
    bundle.dict = SparseDict{std::move(a), bound, bundle.basis};
  }
  return bundle;
}

}  // namespace gems::io
