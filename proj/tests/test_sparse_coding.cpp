#include <doctest.h>

#include "gems/sparse_coding.hpp"
#include "oracles.hpp"

using namespace gems;

namespace {

Mat random_unit_dictionary(int n, int k, std::uint64_t seed) {
  Mat d = oracles::random_normal_mat(n, k, seed);
  for (int j = 0; j < k; ++j) d.col(j).normalize();
  return d;
}

ManifoldLaplacian random_manifold(int m, std::uint64_t seed) {
  auto coords = oracles::random_coords(m, 2, seed);
  return laplacian(build_rbf_graph(coords, 0.7));
}

}  // namespace

TEST_CASE("omp recovers a dictionary column exactly") {
  Mat d = random_unit_dictionary(6, 10, 3);
  for (int t : {1, 3}) {
    Eigen::SparseVector<double> code = omp(d, d.col(4), t);
    CHECK(code.nonZeros() == 1);
    CHECK(code.coeff(4) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((d * code - d.col(4)).norm() < 1e-12);
  }
}

TEST_CASE("omp returns the zero code for an orthogonal target") {
  Mat d(4, 2);
  d << 1, 0, 0, 1, 0, 0, 0, 0;
  Vec y(4);
  y << 0, 0, 1, 1;  // orthogonal to both atoms
  Eigen::SparseVector<double> code = omp(d, y, 2);
  CHECK(code.nonZeros() == 0);
}

TEST_CASE("omp leaves the residual orthogonal to the selected atoms") {
  Mat d = random_unit_dictionary(12, 24, 5);
  Vec y = oracles::random_normal_vec(12, 6);
  Eigen::SparseVector<double> code = omp(d, y, 4);
  Vec resid = y - d * code;
  for (Eigen::SparseVector<double>::InnerIterator it(code); it; ++it)
    CHECK(std::abs(d.col(it.row()).dot(resid)) < 1e-10);
}

TEST_CASE("omp against the exhaustive support oracle") {
  // Near-exact 2-sparse signals: greedy should find the planted support in
  // nearly every trial, and can never beat the exhaustive optimum.
  int matches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Resample until the dictionary has moderate mutual coherence; highly
    // coherent random frames make support identification ill-posed for any
    // greedy method.
    Mat d;
    for (std::uint64_t s = 1000 + trial;; s += 50021) {
      d = random_unit_dictionary(6, 8, s);
      double coh = 0.0;
      for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b)
          coh = std::max(coh, std::abs(d.col(a).dot(d.col(b))));
      if (coh <= 0.6) break;
    }
    std::mt19937_64 eng = rng::make_engine(2000 + trial, 1);
    const int i1 = static_cast<int>(rng::bounded(eng, 8));
    int i2 = static_cast<int>(rng::bounded(eng, 7));
    if (i2 >= i1) ++i2;
    const double c1 = 2.0 + rng::uniform01(eng);
    const double c2 = 0.8 + 0.4 * rng::uniform01(eng);
    Vec y = c1 * d.col(i1) + c2 * d.col(i2) +
            0.005 * oracles::random_normal_vec(6, 3000 + trial);

    Eigen::SparseVector<double> code = omp(d, y, 2);
    IndexList got;
    for (Eigen::SparseVector<double>::InnerIterator it(code); it; ++it)
      got.push_back(static_cast<int>(it.row()));
    std::sort(got.begin(), got.end());

    double oracle_resid = 0.0;
    IndexList best = oracles::exhaustive_omp_support(d, y, 2, &oracle_resid);
    if (got == best) ++matches;
    const double greedy_resid = (y - d * code).norm();
    CHECK(greedy_resid >= oracle_resid - 1e-12);  // oracle is never worse
  }
  CHECK(matches >= 95);
}

TEST_CASE("omp clamps oversized sparsity to the signal dimension") {
  Mat d = random_unit_dictionary(4, 10, 9);
  Vec y = oracles::random_normal_vec(4, 10);
  Eigen::SparseVector<double> code = omp(d, y, 7);
  CHECK(code.nonZeros() <= 4);
  CHECK((y - d * code).norm() < 1e-10);  // span exhausted, exact fit
}

TEST_CASE("omp validates inputs") {
  Mat d = random_unit_dictionary(4, 6, 11);
  Vec y = oracles::random_normal_vec(4, 12);
  CHECK_THROWS_AS(omp(d, y, 0), invalid_input);
  Mat bad = d * 2.0;
  CHECK_THROWS_AS(omp(bad, y, 1), invalid_input);
}

TEST_CASE("omp_batch is column-wise omp") {
  Mat d = random_unit_dictionary(10, 20, 13);
  Mat y = oracles::random_normal_mat(10, 7, 14);
  CodeMatrix batch = omp_batch(d, y, 3);
  CHECK(batch.satisfies_sparsity());
  for (int i = 0; i < 7; ++i) {
    Eigen::SparseVector<double> single = omp(d, y.col(i), 3);
    Vec diff = Vec(batch.x.col(i)) - Vec(single);
    CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("grsc with beta 0 is bit-identical to per-column omp") {
  Mat d = random_unit_dictionary(8, 16, 17);
  Mat y = oracles::random_normal_mat(8, 5, 18);
  ManifoldLaplacian lc = random_manifold(5, 19);
  CodeMatrix via_grsc = grsc(d, y, &lc, 0.0, 3);
  CodeMatrix via_omp = omp_batch(d, y, 3);
  CHECK((Mat(via_grsc.x) - Mat(via_omp.x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grsc on a single signal with zero coupling equals omp") {
  Mat d = random_unit_dictionary(8, 12, 21);
  Mat y = oracles::random_normal_mat(8, 1, 22);
  ManifoldLaplacian lc;  // 1x1 zero Laplacian
  lc = LaplacianMatrix::from_matrix(SpMat(1, 1));
  CodeMatrix via_grsc = grsc(d, y, &lc, 0.5, 3);
  CodeMatrix via_omp = omp_batch(d, y, 3);
  CHECK((Mat(via_grsc.x) - Mat(via_omp.x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grsc never loses to the uncoupled baseline and tracks the oracle") {
  // Exhaustive enumeration over all 6^3 single-atom supports at T=1.
  const int n = 5, k = 6, m = 3;
  const double beta = 0.5;
  for (int trial = 0; trial < 10; ++trial) {
    Mat d = random_unit_dictionary(n, k, 4000 + trial);
    Mat y = oracles::random_normal_mat(n, m, 4100 + trial);
    ManifoldLaplacian lc = random_manifold(m, 4200 + trial);

    CodeMatrix coupled = grsc(d, y, &lc, beta, 1);
    CHECK(coupled.max_column_nnz() <= 1);
    const double got = coding_objective(d, y, &lc, beta, coupled.x);

    // Baseline: uncoupled supports, coefficients refit with the coupling.
    SupportList omp_supports = supports_of(omp_batch(d, y, 1).x);
    RefitResult base = refit_on_supports(d, y, &lc, beta, omp_supports);
    const double base_obj = coding_objective(d, y, &lc, beta, base.codes.x);
    CHECK(got <= base_obj + 1e-10);

    double oracle_best = std::numeric_limits<double>::max();
    for (int a0 = 0; a0 < k; ++a0)
      for (int a1 = 0; a1 < k; ++a1)
        for (int a2 = 0; a2 < k; ++a2) {
          SupportList s{{a0}, {a1}, {a2}};
          RefitResult r = refit_on_supports(d, y, &lc, beta, s);
          oracle_best = std::min(
              oracle_best, coding_objective(d, y, &lc, beta, r.codes.x));
        }
    CHECK(got >= oracle_best - 1e-10);
  }
}

TEST_CASE("grsc objective is non-increasing across refits") {
  Mat d = random_unit_dictionary(10, 20, 23);
  Mat y = oracles::random_normal_mat(10, 12, 24);
  ManifoldLaplacian lc = random_manifold(12, 25);
  std::vector<double> refit_objectives;
  GrscOptions opts;
  opts.on_refit = [&](int, double obj) { refit_objectives.push_back(obj); };
  grsc(d, y, &lc, 0.2, 3, opts);
  REQUIRE(refit_objectives.size() >= 1);
  double best_seen = refit_objectives.front();
  for (double obj : refit_objectives) {
    // The accepted iterate never regresses past the best seen so far.
    CHECK(obj <= best_seen * (1.0 + 1e-9) + 1e-12);
    best_seen = std::min(best_seen, obj);
  }
}

TEST_CASE("refit_on_supports with beta 0 is per-column least squares") {
  Mat d = random_unit_dictionary(8, 12, 27);
  Mat y = oracles::random_normal_mat(8, 4, 28);
  SupportList supports{{0, 3}, {1}, {2, 5, 7}, {4, 6}};
  RefitResult r = refit_on_supports(d, y, nullptr, 0.0, supports);
  CHECK(!r.ridge_fallback);
  for (int i = 0; i < 4; ++i) {
    const IndexList& s = supports[i];
    Mat ds(8, s.size());
    for (std::size_t a = 0; a < s.size(); ++a) ds.col(a) = d.col(s[a]);
    Vec expect = ds.colPivHouseholderQr().solve(y.col(i));
    for (std::size_t a = 0; a < s.size(); ++a)
      CHECK(r.codes.x.coeff(s[a], i) == doctest::Approx(expect[a]).epsilon(1e-9));
  }
}

TEST_CASE("refit_on_supports with empty supports returns the zero matrix") {
  Mat d = random_unit_dictionary(6, 9, 29);
  Mat y = oracles::random_normal_mat(6, 3, 30);
  ManifoldLaplacian lc = random_manifold(3, 31);
  SupportList supports{{}, {}, {}};
  RefitResult r = refit_on_supports(d, y, &lc, 0.3, supports);
  CHECK(r.codes.x.nonZeros() == 0);
  CHECK(coding_objective(d, y, &lc, 0.3, r.codes.x) ==
        doctest::Approx(y.squaredNorm()));
}

TEST_CASE("refit_on_supports output is a stationary point") {
  const int n = 7, k = 10, m = 4;
  Mat d = random_unit_dictionary(n, k, 33);
  Mat y = oracles::random_normal_mat(n, m, 34);
  ManifoldLaplacian lc = random_manifold(m, 35);
  const double beta = 0.4;
  SupportList supports{{0, 2}, {1, 5}, {3}, {6, 8}};
  RefitResult r = refit_on_supports(d, y, &lc, beta, supports);

  // Flatten the restricted unknowns and differentiate the objective.
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < m; ++i)
    for (int idx : supports[i]) slots.emplace_back(idx, i);
  Vec x0(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s)
    x0[s] = r.codes.x.coeff(slots[s].first, slots[s].second);

  auto objective = [&](const Vec& v) {
    SpMat x(k, m);
    std::vector<Triplet> trips;
    for (std::size_t s = 0; s < slots.size(); ++s)
      trips.emplace_back(slots[s].first, slots[s].second, v[s]);
    x.setFromTriplets(trips.begin(), trips.end());
    return coding_objective(d, y, &lc, beta, x);
  };
  Vec grad = oracles::finite_difference_gradient(objective, x0);
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, std::abs(objective(x0))));
}

TEST_CASE("refit_on_supports handles singular restricted systems") {
  // Duplicate atoms make the restricted gram singular but the normal
  // equations stay consistent; the solve must still minimize the residual.
  Mat d(4, 2);
  d.col(0) = Vec::Unit(4, 0);
  d.col(1) = Vec::Unit(4, 0);
  Mat y = oracles::random_normal_mat(4, 1, 36);
  SupportList supports{{0, 1}};
  RefitResult r = refit_on_supports(d, y, nullptr, 0.0, supports);
  CHECK(std::abs((y - d * r.codes.x).col(0).dot(d.col(0))) < 1e-9);

  // Starving the solver of iterations forces the flagged ridge retry.
  Mat d2 = random_unit_dictionary(6, 8, 361);
  Mat y2 = oracles::random_normal_mat(6, 2, 362);
  SupportList s2{{0, 1, 2}, {3, 4, 5}};
  RefitResult starved = refit_on_supports(d2, y2, nullptr, 0.0, s2, 1e-14, 1);
  CHECK(starved.ridge_fallback);
  CHECK(Mat(starved.codes.x).allFinite());
}

TEST_CASE("grsc sparsity bound holds exactly") {
  Mat d = random_unit_dictionary(12, 30, 37);
  Mat y = oracles::random_normal_mat(12, 9, 38);
  ManifoldLaplacian lc = random_manifold(9, 39);
  for (int t : {1, 2, 5}) {
    CodeMatrix c = grsc(d, y, &lc, 0.15, t);
    CHECK(c.max_column_nnz() <= t);
    CHECK(c.t == t);
  }
}
