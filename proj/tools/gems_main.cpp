// Command-line front end: reproducible experiment pipelines over the library.
// Every command is driven by a JSON config plus a handful of flag overrides,
// writes its outputs under --out, and emits a manifest sufficient to rerun
// the command byte-identically.

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gems/data.hpp"
#include "gems/dict_learning.hpp"
#include "gems/io.hpp"
#include "gems/laplacian_learning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gems;

namespace {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config_error(std::string("config parse failure: ") + e.what());
  }
  if (j.contains("command")) {  // rerun from a manifest
    if (j.at("command").get<std::string>() != command)
      throw config_error("manifest was produced by command '" +
                         j.at("command").get<std::string>() +
                         "', not '" + command + "'");
    return j.at("config");
  }
  return j;
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw config_error("config is missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config key '" + key + "' has the wrong type");
  }
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const json& config) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["versions"] = {
      {"gems", kVersion},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)}};
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw config_error("cannot write manifest under " + out_dir);
  out << manifest.dump(2) << "\n";
}

std::string prepare_out_dir(const std::string& out) {
  if (out.empty()) throw config_error("--out directory is required");
  fs::create_directories(out);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec> random_unit_square(int n, std::uint64_t seed) {
  std::mt19937_64 eng = rng::make_engine(seed, 401);
  std::vector<Vec> coords;
  coords.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec c(2);
    c << rng::uniform01(eng), rng::uniform01(eng);
    coords.push_back(c);
  }
  return coords;
}

WeightedGraph graph_from_config(const json& cfg, const std::vector<Vec>& coords) {
  const double sigma = get_or(cfg, "sigma", 0.5);
  const int knn = get_or(cfg, "knn", 0);
  const std::string kernel = get_or<std::string>(cfg, "weight_kernel", "rbf");
  if (kernel == "rbf") return build_rbf_graph(coords, sigma, knn);
  if (kernel == "inverse-distance")
    return build_inverse_distance_graph(coords, knn);
  throw config_error("weight_kernel must be 'rbf' or 'inverse-distance'");
}

// Similarity graph over the training signals; sigma defaults to the median
// distance to the knn-th neighbor.
ManifoldLaplacian manifold_from_signals(const Mat& y, int knn, double sigma) {
  const int m = static_cast<int>(y.cols());
  if (knn >= m) knn = std::max(1, m - 1);
  if (sigma <= 0.0) {
    std::vector<double> kth;
    kth.reserve(m);
    std::vector<double> d2(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j)
        d2[j] = (j == i) ? std::numeric_limits<double>::max()
                         : (y.col(i) - y.col(j)).squaredNorm();
      std::nth_element(d2.begin(), d2.begin() + (knn - 1), d2.end());
      kth.push_back(std::sqrt(d2[knn - 1]));
    }
    std::nth_element(kth.begin(), kth.begin() + m / 2, kth.end());
    sigma = std::max(kth[m / 2], 1e-12);
  }
  std::vector<Vec> pts;
  pts.reserve(m);
  for (int i = 0; i < m; ++i) pts.push_back(y.col(i));
  return laplacian(build_rbf_graph(pts, sigma, knn));
}

TrainConfig train_config_from(const json& cfg, const std::string& mode) {
  TrainConfig tc;
  tc.t_sparsity = get_or(cfg, "t_sparsity", 12);
  tc.p_sparsity = get_or(cfg, "p_sparsity", 12);
  if (mode == "gems") {
    tc.alpha = get_or(cfg, "alpha", 0.1);
    tc.beta = get_or(cfg, "beta", 0.01);
  } else {  // gems-hd and ksvd carry no explicit regularization
    tc.alpha = 0.0;
    tc.beta = 0.0;
  }
  tc.iterations = get_or(cfg, "iterations", 50);
  tc.convergence_tol = get_or(cfg, "convergence_tol", 1e-4);
  const std::string solver = get_or<std::string>(cfg, "atom_solver", "greedy");
  if (solver == "greedy")
    tc.atom_solver = AtomSolver::greedy;
  else if (solver == "admm")
    tc.atom_solver = AtomSolver::admm;
  else
    throw config_error("atom_solver must be 'greedy' or 'admm'");
  tc.admm_rho = get_or(cfg, "admm_rho", 1.0);
  tc.admm_iters = get_or(cfg, "admm_iters", 50);
  tc.seed = require<std::uint64_t>(cfg, "seed");
  return tc;
}

LaplacianLearnConfig laplacian_config_from(const json& cfg) {
  LaplacianLearnConfig lc;
  lc.alpha = get_or(cfg, "laplacian_alpha", 1.0);
  lc.mu = get_or(cfg, "laplacian_mu", 0.5);
  lc.solver_tol = get_or(cfg, "laplacian_solver_tol", 1e-7);
  lc.max_iters = get_or(cfg, "laplacian_max_iters", 20000);
  lc.outer_rounds = get_or(cfg, "outer_rounds", 3);
  lc.inner_iterations = get_or(cfg, "inner_iterations", 5);
  return lc;
}

Mat subset_signals(const SignalSet& s, const std::string& which) {
  if (which == "train") return s.train();
  if (which == "test") return s.test();
  if (which == "all") return s.y;
  throw config_error("subset must be 'train', 'test' or 'all'");
}

// ---------------------------------------------------------------------------

void cmd_synth(const json& cfg, const std::string& out) {
  const int n = require<int>(cfg, "n");
  if (n < 2) throw config_error("n must be >= 2");
  const std::uint64_t seed = require<std::uint64_t>(cfg, "seed");
  const double lambda = get_or(cfg, "lambda", 10.0);
  const double region = get_or(cfg, "region_size", 0.25);
  const int m_count = get_or(cfg, "signals", 10 * n);

  const auto coords = random_unit_square(n, seed);
  WeightedGraph g = graph_from_config(cfg, coords);
  LaplacianMatrix l = laplacian(g);
  SignalSet signals = gen_piecewise_smooth(l, m_count, lambda, region, seed);

  io::save_coords_csv(out + "/coords.csv", coords);
  io::save_edge_list(out + "/graph.txt", g);
  io::save_signals(out + "/signals", signals);
  write_manifest(out, "synth", cfg);
  std::cout << "synth: " << n << " nodes, " << m_count << " signals -> " << out
            << "\n";
}

void cmd_build_basis(const json& cfg, const std::string& out) {
  const std::string graph_path = require<std::string>(cfg, "graph");
  const int n = get_or(cfg, "n", -1);
  WeightedGraph g = io::load_edge_list(graph_path, n);
  LaplacianMatrix l = laplacian(g);
  TreeOptions topts;
  topts.allow_disconnected = get_or(cfg, "allow_disconnected", false);
  HaarBasis basis = build_haar_basis(build_partition_tree(l, topts));
  io::save_basis(out + "/basis", basis);
  write_manifest(out, "build-basis", cfg);
  std::cout << "build-basis: " << basis.size() << " columns -> " << out << "\n";
}

void cmd_train(const json& cfg, const std::string& out) {
  const std::string mode = require<std::string>(cfg, "mode");
  if (mode != "gems" && mode != "gems-hd" && mode != "ksvd")
    throw config_error("mode must be 'gems', 'gems-hd' or 'ksvd'");
  SignalSet signals = io::load_signals(require<std::string>(cfg, "signals"));
  const Mat y = signals.train();
  if (y.cols() == 0) throw config_error("signal container has no training split");
  TrainConfig tc = train_config_from(cfg, mode);
  const int dict_size = get_or(cfg, "dict_size", 2 * static_cast<int>(y.rows()));

  io::ModelBundle bundle;
  bundle.mode = mode;
  bundle.config = tc;
  std::vector<TraceRow> trace;

  if (mode == "ksvd") {
    KsvdResult res = ksvd_train(y, tc.t_sparsity, dict_size, tc.iterations,
                                tc.seed);
    bundle.dense_dict = std::move(res.dict);
  } else {
    LaplacianMatrix l;
    std::shared_ptr<const HaarBasis> basis;
    const bool adaptive = get_or(cfg, "adaptive", false);
    if (cfg.contains("graph")) {
      l = laplacian(io::load_edge_list(require<std::string>(cfg, "graph"),
                                       static_cast<int>(y.rows())));
    } else if (!adaptive && tc.alpha == 0.0 && cfg.contains("basis")) {
      basis = std::make_shared<const HaarBasis>(
          io::load_basis(require<std::string>(cfg, "basis")));
    } else {
      throw config_error("training needs 'graph' (or 'basis' for fixed-basis "
                         "runs without smoothness regularization)");
    }

    ManifoldLaplacian lc;
    const ManifoldLaplacian* lc_ptr = nullptr;
    if (tc.beta != 0.0) {
      lc = manifold_from_signals(y, get_or(cfg, "manifold_knn", 8),
                                 get_or(cfg, "manifold_sigma", 0.0));
      lc_ptr = &lc;
    }

    if (adaptive) {
      LaplacianLearnConfig lcfg = laplacian_config_from(cfg);
      AdaptiveResult res = adaptive_train(y, l, lc_ptr, dict_size, tc, lcfg);
      bundle.basis = res.basis;
      bundle.dict = std::move(res.dict);
      trace = std::move(res.trace);
      io::save_laplacian_edge_list(out + "/learned_graph.txt", res.laplacian);
    } else {
      if (!basis)
        basis = std::make_shared<const HaarBasis>(
            build_haar_basis(build_partition_tree(l)));
      SparseDict a0 = init_dictionary(y, basis, dict_size, tc.p_sparsity, tc.seed);
      TrainResult res = gems_train(y, basis, a0, &l, lc_ptr, tc);
      bundle.basis = basis;
      bundle.dict = std::move(res.dict);
      trace = std::move(res.trace);
    }
  }

  io::save_bundle(out + "/model", bundle, trace);
  write_manifest(out, "train", cfg);
  std::cout << "train[" << mode << "]: dictionary "
            << bundle.effective_dictionary().rows() << "x"
            << bundle.effective_dictionary().cols() << " -> " << out << "\n";
}

void cmd_encode(const json& cfg, const std::string& out) {
  io::ModelBundle bundle = io::load_bundle(require<std::string>(cfg, "model"));
  SignalSet signals = io::load_signals(require<std::string>(cfg, "signals"));
  const Mat y = subset_signals(signals, get_or<std::string>(cfg, "subset", "test"));
  if (y.cols() == 0) throw config_error("selected signal subset is empty");
  const int t = get_or(cfg, "t", bundle.config.t_sparsity);

  const Mat d = bundle.effective_dictionary();
  CodeMatrix codes = omp_batch(d, y, t);
  const double rmse = normalized_rmse(y, d * codes.x);

  io::save_sparse(out + "/codes.txt", codes.x, t);
  json result;
  result["rmse"] = rmse;
  result["t"] = t;
  result["signals"] = static_cast<int>(y.cols());
  std::ofstream(out + "/encode.json") << result.dump(2) << "\n";
  write_manifest(out, "encode", cfg);
  std::cout << "encode: rmse " << io::format_double(rmse) << " at t=" << t
            << "\n";
}

void cmd_denoise(const json& cfg, const std::string& out) {
  io::ModelBundle bundle = io::load_bundle(require<std::string>(cfg, "model"));
  SignalSet signals = io::load_signals(require<std::string>(cfg, "signals"));
  const Mat y = subset_signals(signals, get_or<std::string>(cfg, "subset", "test"));
  if (y.cols() == 0) throw config_error("selected signal subset is empty");
  const int t = get_or(cfg, "t", bundle.config.t_sparsity);
  const std::uint64_t seed = require<std::uint64_t>(cfg, "seed");
  const auto levels = require<std::vector<double>>(cfg, "noise_levels");
  if (levels.empty()) throw config_error("noise_levels must be nonempty");

  DictionarySet dicts{{bundle.mode, bundle.effective_dictionary()}};
  BenchTable table = denoise_benchmark(dicts, y, levels, t, seed);
  io::save_bench_csv(out + "/denoise.csv", table);
  json mirror = json::array();
  for (const BenchRow& row : table)
    mirror.push_back({{"dictionary", row.dictionary},
                      {"param", row.param},
                      {"value", row.value}});
  std::ofstream(out + "/denoise.json") << mirror.dump(2) << "\n";
  write_manifest(out, "denoise", cfg);
  std::cout << "denoise: " << table.size() << " rows -> " << out << "\n";
}

void cmd_benchmark(const json& cfg, const std::string& out) {
  SignalSet signals = io::load_signals(require<std::string>(cfg, "signals"));
  const Mat y = subset_signals(signals, get_or<std::string>(cfg, "subset", "test"));
  if (y.cols() == 0) throw config_error("selected signal subset is empty");

  if (!cfg.contains("dictionaries") || !cfg.at("dictionaries").is_array() ||
      cfg.at("dictionaries").empty())
    throw config_error("benchmark needs a nonempty 'dictionaries' list");

  DictionarySet dicts;
  for (const json& entry : cfg.at("dictionaries")) {
    const std::string name = require<std::string>(entry, "name");
    if (entry.contains("model")) {
      dicts.emplace_back(
          name, io::load_bundle(entry.at("model").get<std::string>())
                    .effective_dictionary());
    } else if (entry.contains("basis")) {
      dicts.emplace_back(
          name, io::load_basis(entry.at("basis").get<std::string>()).matrix);
    } else {
      throw config_error("dictionary entry '" + name +
                         "' needs 'model' or 'basis'");
    }
    if (dicts.back().second.rows() != y.rows())
      throw config_error("dictionary '" + name + "' does not match the signals");
  }

  const auto sparsity = require<std::vector<int>>(cfg, "sparsity_levels");
  const auto noise = require<std::vector<double>>(cfg, "noise_levels");
  const int t_denoise = get_or(cfg, "t_denoise", 12);
  const std::uint64_t seed = require<std::uint64_t>(cfg, "seed");

  BenchTable mterm = mterm_benchmark(dicts, y, sparsity);
  io::save_bench_csv(out + "/mterm.csv", mterm);
  BenchTable denoise = denoise_benchmark(dicts, y, noise, t_denoise, seed);
  io::save_bench_csv(out + "/denoise.csv", denoise);
  auto usage = atom_usage_counts(dicts, y, t_denoise);
  BenchTable usage_table;
  for (const auto& [name, counts] : usage)
    for (std::size_t j = 0; j < counts.size(); ++j)
      usage_table.push_back({name, static_cast<double>(j),
                             static_cast<double>(counts[j])});
  io::save_bench_csv(out + "/atom_usage.csv", usage_table);

  json mirror;
  auto table_json = [](const BenchTable& t) {
    json arr = json::array();
    for (const BenchRow& row : t)
      arr.push_back({{"dictionary", row.dictionary},
                     {"param", row.param},
                     {"value", row.value}});
    return arr;
  };
  mirror["mterm"] = table_json(mterm);
  mirror["denoise"] = table_json(denoise);
  mirror["atom_usage"] = table_json(usage_table);
  std::ofstream(out + "/results.json") << mirror.dump(2) << "\n";
  write_manifest(out, "benchmark", cfg);
  std::cout << "benchmark: " << dicts.size() << " dictionaries -> " << out
            << "\n";
}

void cmd_learn_graph(const json& cfg, const std::string& out) {
  io::ModelBundle bundle = io::load_bundle(require<std::string>(cfg, "model"));
  if (bundle.mode == "ksvd")
    throw config_error("learn-graph needs a basis-backed model bundle");
  LaplacianLearnConfig lcfg = laplacian_config_from(cfg);
  LaplacianLearnResult res =
      learn_laplacian_detailed(*bundle.basis, bundle.dict.a, lcfg);
  io::save_laplacian_edge_list(out + "/learned_graph.txt", res.laplacian);
  json info;
  info["converged"] = res.converged;
  info["kkt_residual"] = res.kkt_residual;
  info["iterations"] = res.iterations;
  info["objective"] = res.objective;
  std::ofstream(out + "/learn.json") << info.dump(2) << "\n";
  write_manifest(out, "learn-graph", cfg);
  std::cout << "learn-graph: kkt " << io::format_double(res.kkt_residual)
            << " -> " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-enhanced multi-scale dictionary learning toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::int64_t seed_flag = -1;
  int threads = 0;

  const std::vector<std::string> names{"synth",  "build-basis", "train",
                                       "encode", "denoise",     "benchmark",
                                       "learn-graph"};
  for (const std::string& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config or manifest")
        ->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed_flag, "override the config seed");
    sub->add_option("--threads", threads, "cap the worker pool");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json cfg = load_config_file(config_path, command);
    if (seed_flag >= 0) cfg["seed"] = static_cast<std::uint64_t>(seed_flag);
    const std::string out = prepare_out_dir(out_dir);

    if (command == "synth")
      cmd_synth(cfg, out);
    else if (command == "build-basis")
      cmd_build_basis(cfg, out);
    else if (command == "train")
      cmd_train(cfg, out);
    else if (command == "encode")
      cmd_encode(cfg, out);
    else if (command == "denoise")
      cmd_denoise(cfg, out);
    else if (command == "benchmark")
      cmd_benchmark(cfg, out);
    else if (command == "learn-graph")
      cmd_learn_graph(cfg, out);
    return 0;
  } catch (const config_error& e) {
    std::cerr << "gems " << command << ": error: " << e.what() << "\n";
    return 2;
  } catch (const invalid_input& e) {
    std::cerr << "gems " << command << ": error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "gems " << command << ": error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gems " << command << ": error: " << e.what() << "\n";
    return 3;
  }
}
