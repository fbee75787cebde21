#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gems/io.hpp"
#include "oracles.hpp"

using namespace gems;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("gems_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

LaplacianMatrix random_laplacian(int n, std::uint64_t seed) {
  return laplacian(build_rbf_graph(oracles::random_coords(n, 2, seed), 0.5));
}

}  // namespace

TEST_CASE("edge list round trip") {
  TempDir tmp;
  WeightedGraph g = build_rbf_graph(oracles::random_coords(12, 2, 3), 0.5, 4);
  io::save_edge_list(tmp / "g.txt", g);
  WeightedGraph back = io::load_edge_list(tmp / "g.txt", 12);
  CHECK((Mat(g.weights()) - Mat(back.weights())).cwiseAbs().maxCoeff() == 0.0);

  // Node count inferred from indices when not given.
  WeightedGraph inferred = io::load_edge_list(tmp / "g.txt");
  CHECK(inferred.size() == 12);
}

TEST_CASE("coords round trip in 2 and 3 dimensions") {
  TempDir tmp;
  for (int dim : {2, 3}) {
    auto coords = oracles::random_coords(7, dim, 11 + dim);
    io::save_coords_csv(tmp / "c.csv", coords);
    auto back = io::load_coords_csv(tmp / "c.csv");
    REQUIRE(back.size() == coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
      CHECK((back[i] - coords[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("matrix container round trip is exact") {
  TempDir tmp;
  Mat m = oracles::random_normal_mat(9, 5, 21);
  io::save_matrix(tmp / "m", m);
  Mat back = io::load_matrix(tmp / "m");
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("signals container keeps labels and normalization") {
  TempDir tmp;
  SignalSet s;
  s.y = oracles::random_normal_mat(6, 8, 23);
  s.is_train = {1, 0, 1, 1, 0, 0, 1, 0};
  s.normalization = "unit-l2";
  io::save_signals(tmp / "s", s);
  SignalSet back = io::load_signals(tmp / "s");
  CHECK((back.y - s.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.is_train == s.is_train);
  CHECK(back.normalization == "unit-l2");
}

TEST_CASE("tree serialization round trip") {
  PartitionTree tree = build_partition_tree(random_laplacian(17, 31));
  std::string text = io::serialize_tree(tree);
  PartitionTree back = io::parse_tree(text);
  CHECK(back.n == tree.n);
  REQUIRE(back.nodes.size() == tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    CHECK(back.nodes[i].vertices == tree.nodes[i].vertices);
    CHECK(back.nodes[i].split_ordinal == tree.nodes[i].split_ordinal);
    CHECK(back.nodes[i].depth == tree.nodes[i].depth);
  }
  CHECK(io::serialize_tree(back) == text);
}

TEST_CASE("basis container round trip") {
  TempDir tmp;
  HaarBasis basis = build_haar_basis(build_partition_tree(random_laplacian(19, 37)));
  io::save_basis(tmp / "basis", basis);
  HaarBasis back = io::load_basis(tmp / "basis");
  CHECK((back.matrix - basis.matrix).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.tree.n == basis.tree.n);
  CHECK(back.tree.split_count() == basis.tree.split_count());
}

TEST_CASE("sparse triplet round trip keeps the bound") {
  TempDir tmp;
  SpMat m(10, 6);
  std::mt19937_64 eng = rng::make_engine(41, 1);
  rng::NormalSampler normal(41, 2);
  for (int c = 0; c < 6; ++c)
    for (int k = 0; k < 3; ++k)
      m.coeffRef(rng::bounded(eng, 10), c) = normal();
  io::save_sparse(tmp / "x.txt", m, 3);
  int bound = 0;
  SpMat back = io::load_sparse(tmp / "x.txt", &bound);
  CHECK(bound == 3);
  CHECK((Mat(back) - Mat(m)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trace csv format") {
  TempDir tmp;
  std::vector<TraceRow> trace{{0, "init", 12.5}, {1, "sparse_coding", 3.25}};
  io::save_trace(tmp / "trace.csv", trace);
  std::ifstream in(tmp / "trace.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,phase,objective");
  std::getline(in, line);
  CHECK(line == "0,init,12.5");
  std::getline(in, line);
  CHECK(line == "1,sparse_coding,3.25");
}

TEST_CASE("bench csv format") {
  TempDir tmp;
  BenchTable table{{"gems", 12.0, 0.125}, {"ksvd", 12.0, 0.5}};
  io::save_bench_csv(tmp / "bench.csv", table);
  std::ifstream in(tmp / "bench.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "dictionary,param,value");
  std::getline(in, line);
  CHECK(line == "gems,12,0.125");
}

TEST_CASE("model bundle round trip for basis-backed modes") {
  TempDir tmp;
  auto basis = std::make_shared<const HaarBasis>(
      build_haar_basis(build_partition_tree(random_laplacian(10, 43))));
  Mat y = oracles::random_normal_mat(10, 25, 44);
  io::ModelBundle bundle;
  bundle.mode = "gems";
  bundle.config.t_sparsity = 3;
  bundle.config.p_sparsity = 2;
  bundle.config.alpha = 0.1;
  bundle.config.beta = 0.01;
  bundle.config.seed = 7;
  bundle.basis = basis;
  bundle.dict = init_dictionary(y, basis, 14, 2, 7);
  io::save_bundle(tmp / "bundle", bundle, {{0, "init", 1.0}});

  io::ModelBundle back = io::load_bundle(tmp / "bundle");
  CHECK(back.mode == "gems");
  CHECK(back.config.t_sparsity == 3);
  CHECK(back.config.alpha == 0.1);
  CHECK(back.config.seed == 7);
  CHECK(back.dict.p == 2);
  CHECK((Mat(back.dict.a) - Mat(bundle.dict.a)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.basis->matrix - basis->matrix).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.effective_dictionary() - bundle.effective_dictionary())
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("model bundle round trip for the dense baseline") {
  TempDir tmp;
  io::ModelBundle bundle;
  bundle.mode = "ksvd";
  bundle.config.t_sparsity = 4;
  bundle.dense_dict = oracles::random_normal_mat(8, 16, 45);
  io::save_bundle(tmp / "kb", bundle, {});
  io::ModelBundle back = io::load_bundle(tmp / "kb");
  CHECK(back.mode == "ksvd");
  CHECK((back.dense_dict - bundle.dense_dict).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("float formatting survives the round trip") {
  const double v = 0.1234567890123456789;
  CHECK(std::stod(io::format_double(v)) == v);
  CHECK(std::stod(io::format_double(1e-300)) == 1e-300);
  CHECK(io::format_double(2.0) == "2");
}

TEST_CASE("loaders reject malformed headers") {
  TempDir tmp;
  {
    std::ofstream out(tmp / "bad.txt");
    out << "not-a-header\n";
  }
  CHECK_THROWS_AS(io::load_sparse(tmp / "bad.txt"), invalid_input);
  CHECK_THROWS_AS(io::load_matrix(tmp / "bad"), invalid_input);
  CHECK_THROWS_AS(io::load_edge_list(tmp / "missing.txt"), invalid_input);
}
