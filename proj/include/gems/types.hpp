#ifndef GEMS_TYPES_HPP
#define GEMS_TYPES_HPP

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gems {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using IndexList = std::vector<int>;

constexpr const char* kVersion = "0.1.0";

// Thrown on precondition violations (bad dimensions, invalid parameters).
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when an iterative scheme diverges or produces non-finite values.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent engine per (seed, stream) pair so generators stay decoupled.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

// Uniform double in [0, 1); bit-reproducible across platforms, unlike
// std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) via masked rejection.
inline std::uint64_t bounded(std::mt19937_64& eng, std::uint64_t n) {
  if (n == 0) throw invalid_input("bounded: n must be positive");
  std::uint64_t mask = n - 1;
  mask |= mask >> 1; mask |= mask >> 2; mask |= mask >> 4;
  mask |= mask >> 8; mask |= mask >> 16; mask |= mask >> 32;
  std::uint64_t v;
  do { v = eng() & mask; } while (v >= n);
  return v;
}

// Box-Muller standard normal; std::normal_distribution is
// implementation-defined and would break reproducibility.
class NormalSampler {
 public:
  explicit NormalSampler(std::mt19937_64 eng) : eng_(eng) {}
  NormalSampler(std::uint64_t seed, std::uint64_t stream)
      : eng_(make_engine(seed, stream)) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform01(eng_);
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[bounded(eng, i)]);
  }
}

}  // namespace rng
}  // namespace gems

#endif
