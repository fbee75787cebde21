#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const char* kCli = GEMS_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gems_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bytes(const std::string& a, const std::string& b) {
  return slurp(a) == slurp(b);
}

}  // namespace

TEST_CASE("cli pipeline: determinism, manifest reruns and exit codes") {
  TempDir tmp;

  write_file(tmp / "synth.json",
             R"({"n": 24, "sigma": 0.5, "lambda": 10.0, "region_size": 0.25,
                 "signals": 60, "seed": 17})");

  SUBCASE("same config twice is byte-identical") {
    REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                    (tmp / "a")) == 0);
    REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                    (tmp / "b")) == 0);
    for (const char* f :
         {"coords.csv", "graph.txt", "signals.bin", "signals.txt",
          "manifest.json"})
      CHECK(same_bytes(tmp / (std::string("a/") + f), tmp / (std::string("b/") + f)));
  }

  SUBCASE("rerun from the manifest reproduces every output") {
    REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                    (tmp / "a")) == 0);
    REQUIRE(run_cli("synth --config " + (tmp / "a/manifest.json") + " --out " +
                    (tmp / "c")) == 0);
    for (const char* f :
         {"coords.csv", "graph.txt", "signals.bin", "signals.txt",
          "manifest.json"})
      CHECK(same_bytes(tmp / (std::string("a/") + f), tmp / (std::string("c/") + f)));
  }

  SUBCASE("full train/encode chain reruns byte-identically from manifests") {
    REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                    (tmp / "data")) == 0);
    write_file(tmp / "train.json",
               R"({"signals": ")" + (tmp / "data/signals") +
                   R"(", "graph": ")" + (tmp / "data/graph.txt") +
                   R"(", "mode": "gems-hd", "dict_size": 48, "t_sparsity": 3,
                   "p_sparsity": 3, "iterations": 4, "seed": 5})");
    REQUIRE(run_cli("train --config " + (tmp / "train.json") + " --out " +
                    (tmp / "m1")) == 0);
    REQUIRE(run_cli("train --config " + (tmp / "m1/manifest.json") + " --out " +
                    (tmp / "m2")) == 0);
    for (const char* f :
         {"model/a.txt", "model/basis.bin", "model/basis.txt",
          "model/config.json", "model/trace.csv", "manifest.json"})
      CHECK(same_bytes(tmp / (std::string("m1/") + f),
                       tmp / (std::string("m2/") + f)));

    write_file(tmp / "encode.json_cfg",
               R"({"model": ")" + (tmp / "m1/model") + R"(", "signals": ")" +
                   (tmp / "data/signals") + R"(", "t": 3, "seed": 1})");
    REQUIRE(run_cli("encode --config " + (tmp / "encode.json_cfg") + " --out " +
                    (tmp / "e1")) == 0);
    REQUIRE(run_cli("encode --config " + (tmp / "e1/manifest.json") +
                    " --out " + (tmp / "e2")) == 0);
    CHECK(same_bytes(tmp / "e1/codes.txt", tmp / "e2/codes.txt"));
    CHECK(same_bytes(tmp / "e1/encode.json", tmp / "e2/encode.json"));
  }

  SUBCASE("config errors exit with code 2") {
    CHECK(run_cli("synth --out " + (tmp / "x")) == 2);  // missing --config
    write_file(tmp / "bad.json", "{ not json");
    CHECK(run_cli("synth --config " + (tmp / "bad.json") + " --out " +
                  (tmp / "x")) == 2);
    write_file(tmp / "noseed.json", R"({"n": 16})");
    CHECK(run_cli("synth --config " + (tmp / "noseed.json") + " --out " +
                  (tmp / "x")) == 2);
    write_file(tmp / "badmode.json",
               R"({"signals": "nope", "mode": "what", "seed": 1})");
    CHECK(run_cli("train --config " + (tmp / "badmode.json") + " --out " +
                  (tmp / "x")) == 2);
  }

  SUBCASE("benchmark with an empty dictionary list is a usage error") {
    REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                    (tmp / "data")) == 0);
    write_file(tmp / "bench.json",
               R"({"signals": ")" + (tmp / "data/signals") +
                   R"(", "dictionaries": [], "sparsity_levels": [2],
                   "noise_levels": [0.2], "seed": 1})");
    CHECK(run_cli("benchmark --config " + (tmp / "bench.json") + " --out " +
                  (tmp / "x")) == 2);
  }

  SUBCASE("manifest for the wrong command is rejected") {
    REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                    (tmp / "a")) == 0);
    CHECK(run_cli("train --config " + (tmp / "a/manifest.json") + " --out " +
                  (tmp / "x")) == 2);
  }
}

TEST_CASE("cli learn-graph produces a loadable laplacian") {
  TempDir tmp;
  write_file(tmp / "synth.json",
             R"({"n": 16, "lambda": 10.0, "signals": 50, "seed": 23})");
  REQUIRE(run_cli("synth --config " + (tmp / "synth.json") + " --out " +
                  (tmp / "data")) == 0);
  write_file(tmp / "train.json",
             R"({"signals": ")" + (tmp / "data/signals") + R"(", "graph": ")" +
                 (tmp / "data/graph.txt") +
                 R"(", "mode": "gems-hd", "dict_size": 32, "t_sparsity": 3,
                 "p_sparsity": 3, "iterations": 3, "seed": 2})");
  REQUIRE(run_cli("train --config " + (tmp / "train.json") + " --out " +
                  (tmp / "m")) == 0);
  write_file(tmp / "lg.json", R"({"model": ")" + (tmp / "m/model") +
                                  R"(", "laplacian_mu": 0.5, "seed": 0})");
  REQUIRE(run_cli("learn-graph --config " + (tmp / "lg.json") + " --out " +
                  (tmp / "g")) == 0);
  CHECK(fs::exists(tmp / "g/learned_graph.txt"));
  CHECK(fs::exists(tmp / "g/learn.json"));
}
