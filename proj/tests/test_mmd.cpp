#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vbgp/errors.hpp"
#include "vbgp/mmd.hpp"
#include "vbgp/rng.hpp"

using namespace vbgp;

namespace {

std::vector<Eigen::VectorXd> gaussian_sample(int m, int dim, double shift,
                                             Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) v[d] = shift + rng.normal();
    out.push_back(std::move(v));
  }
  return out;
}

// Direct double-loop transcription of the unbiased estimator.
double mmd2_by_hand(const std::vector<Eigen::VectorXd>& X,
                    const std::vector<Eigen::VectorXd>& Y, double bw) {
  const int m = static_cast<int>(X.size());
  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      total += gaussian_rkhs_kernel(X[static_cast<std::size_t>(i)],
                                    X[static_cast<std::size_t>(j)], bw) +
               gaussian_rkhs_kernel(Y[static_cast<std::size_t>(i)],
                                    Y[static_cast<std::size_t>(j)], bw) -
               gaussian_rkhs_kernel(X[static_cast<std::size_t>(i)],
                                    Y[static_cast<std::size_t>(j)], bw) -
               gaussian_rkhs_kernel(X[static_cast<std::size_t>(j)],
                                    Y[static_cast<std::size_t>(i)], bw);
    }
  return total / (static_cast<double>(m) * (m - 1));
}

}  // namespace

TEST_SUITE("mmd") {

TEST_CASE("kernel values match the closed form") {
  Eigen::VectorXd x(2), y(2);
  x << 1.0, 2.0;
  y << 1.0, 2.0;
  CHECK(gaussian_rkhs_kernel(x, y, 1.7) == 1.0);
  y << 1.0, 2.0 + std::sqrt(2.0);
  CHECK(gaussian_rkhs_kernel(x, y, 1.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(gaussian_rkhs_kernel(x, y, 1.0) ==
        gaussian_rkhs_kernel(y, x, 1.0));
  Eigen::VectorXd z(3);
  z.setZero();
  CHECK_THROWS_AS(gaussian_rkhs_kernel(x, z, 1.0), InvalidArgument);
  CHECK_THROWS_AS(gaussian_rkhs_kernel(x, y, 0.0), InvalidArgument);
}

TEST_CASE("median bandwidth matches small hand-worked pools") {
  auto point = [](double v) {
    Eigen::VectorXd p(1);
    p << v;
    return p;
  };
  // Distances {1, 1, 2}: median is the middle value.
  CHECK(median_bandwidth({point(0.0), point(1.0), point(2.0)}) == 1.0);
  // Identical points: distance median is 0, mean is 0, fallback is 1.
  CHECK(median_bandwidth({point(3.0), point(3.0), point(3.0)}) == 1.0);
  CHECK_THROWS_AS(median_bandwidth({point(1.0)}), InvalidArgument);
}

TEST_CASE("median bandwidth agrees with a brute-force sort") {
  Rng rng(1);
  const auto pool = gaussian_sample(20, 3, 0.0, rng);
  std::vector<double> dists;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      dists.push_back((pool[i] - pool[j]).norm());
  std::sort(dists.begin(), dists.end());
  // 190 pairwise distances: even count averages the middle pair.
  const double expected = 0.5 * (dists[94] + dists[95]);
  CHECK(median_bandwidth(pool) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("identical samples give exactly zero discrepancy") {
  Rng rng(2);
  const auto X = gaussian_sample(12, 4, 0.0, rng);
  CHECK(mmd2_unbiased(X, X, 1.3) == 0.0);
}

TEST_CASE("the estimator matches a double-loop transcription") {
  Rng rng(3);
  const auto X = gaussian_sample(10, 20, 0.0, rng);
  const auto Y = gaussian_sample(10, 20, 0.3, rng);
  const double bw = 2.1;
  CHECK(mmd2_unbiased(X, Y, bw) ==
        doctest::Approx(mmd2_by_hand(X, Y, bw)).epsilon(1e-12));
}

TEST_CASE("tiny or mismatched samples are rejected") {
  Rng rng(4);
  const auto X = gaussian_sample(1, 2, 0.0, rng);
  const auto Y = gaussian_sample(1, 2, 0.0, rng);
  CHECK_THROWS_AS(mmd2_unbiased(X, Y, 1.0), InvalidArgument);
  const auto X2 = gaussian_sample(5, 2, 0.0, rng);
  const auto Y3 = gaussian_sample(6, 2, 0.0, rng);
  CHECK_THROWS_AS(mmd2_unbiased(X2, Y3, 1.0), InvalidArgument);
}

TEST_CASE("the statistic ignores within-sample ordering") {
  Rng rng(5);
  auto X = gaussian_sample(9, 3, 0.0, rng);
  auto Y = gaussian_sample(9, 3, 0.5, rng);
  const double base = mmd2_unbiased(X, Y, 1.4);
  std::reverse(X.begin(), X.end());
  std::rotate(Y.begin(), Y.begin() + 4, Y.end());
  CHECK(mmd2_unbiased(X, Y, 1.4) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("swapping the two samples is exactly symmetric") {
  Rng rng(6);
  const auto X = gaussian_sample(11, 5, 0.0, rng);
  const auto Y = gaussian_sample(11, 5, 0.7, rng);
  CHECK(mmd2_unbiased(X, Y, 1.8) == mmd2_unbiased(Y, X, 1.8));
}

TEST_CASE("a clear mean shift separates the samples") {
  Rng rng(7);
  const auto X = gaussian_sample(50, 2, 0.0, rng);
  const auto Y = gaussian_sample(50, 2, 5.0, rng);
  const double bw = median_bandwidth([&] {
    auto pool = X;
    pool.insert(pool.end(), Y.begin(), Y.end());
    return pool;
  }());
  CHECK(mmd2_unbiased(X, Y, bw) > 0.5);
}

TEST_CASE("the permutation threshold replays from the stream") {
  Rng rng(8);
  const auto X = gaussian_sample(8, 2, 0.0, rng);
  const auto Y = gaussian_sample(8, 2, 0.4, rng);
  const double bw = 1.5;
  const int n_perm = 150;

  Rng perm_rng(9);
  const double threshold =
      permutation_threshold(X, Y, bw, n_perm, 0.1, perm_rng);

  // Replay: same stream, same relabelings, statistic recomputed here.
  auto pool = X;
  pool.insert(pool.end(), Y.begin(), Y.end());
  Rng replay(9);
  std::vector<double> stats;
  for (int p = 0; p < n_perm; ++p) {
    const std::vector<int> order = replay.permutation(16);
    std::vector<Eigen::VectorXd> px, py;
    for (int i = 0; i < 8; ++i) {
      px.push_back(pool[static_cast<std::size_t>(order[i])]);
      py.push_back(pool[static_cast<std::size_t>(order[i + 8])]);
    }
    stats.push_back(mmd2_unbiased(px, py, bw));
  }
  std::sort(stats.begin(), stats.end());
  const int idx = static_cast<int>(std::floor(0.9 * n_perm + 1e-9));
  CHECK(threshold == stats[static_cast<std::size_t>(idx)]);

  // At alpha <= 1/n the quantile clamps to the largest permuted statistic.
  Rng max_rng(9);
  CHECK(permutation_threshold(X, Y, bw, n_perm, 1.0 / n_perm, max_rng) ==
        stats.back());
  Rng tiny_rng(9);
  CHECK(permutation_threshold(X, Y, bw, n_perm, 1e-12, tiny_rng) ==
        stats.back());
}

TEST_CASE("thresholds shrink as alpha grows") {
  Rng rng(10);
  const auto X = gaussian_sample(10, 3, 0.0, rng);
  const auto Y = gaussian_sample(10, 3, 0.2, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha : {0.01, 0.05, 0.2, 0.5, 0.9}) {
    Rng perm_rng(11);
    const double t = permutation_threshold(X, Y, 1.2, 200, alpha, perm_rng);
    CHECK(t <= prev);
    prev = t;
  }
}

TEST_CASE("threshold arguments are validated") {
  Rng rng(12);
  const auto X = gaussian_sample(6, 2, 0.0, rng);
  const auto Y = gaussian_sample(6, 2, 0.0, rng);
  Rng r1(13), r2(13), r3(13);
  CHECK_THROWS_AS(permutation_threshold(X, Y, 1.0, 99, 0.05, r1),
                  InvalidArgument);
  CHECK_THROWS_AS(permutation_threshold(X, Y, 1.0, 200, 0.0, r2),
                  InvalidArgument);
  CHECK_THROWS_AS(permutation_threshold(X, Y, 1.0, 200, 1.0, r3),
                  InvalidArgument);
}

TEST_CASE("the full test is deterministic and self-consistent") {
  Rng rng(14);
  const auto X = gaussian_sample(20, 3, 0.0, rng);
  const auto Y = gaussian_sample(20, 3, 1.5, rng);
  Rng t1(15), t2(15);
  const MmdReport a = mmd_two_sample_test(X, Y, 200, 0.05, t1, 42);
  const MmdReport b = mmd_two_sample_test(X, Y, 200, 0.05, t2, 42);
  CHECK(a.mmd2 == b.mmd2);
  CHECK(a.threshold == b.threshold);
  CHECK(a.reject == b.reject);
  CHECK(a.reject == (a.mmd2 > a.threshold));
  CHECK(a.bandwidth > 0.0);
  CHECK(a.m == 20);
  CHECK(a.n_permutations == 200);
  CHECK(a.seed == 42);

  auto pool = X;
  pool.insert(pool.end(), Y.begin(), Y.end());
  CHECK(a.bandwidth == median_bandwidth(pool));
  CHECK(a.mmd2 == mmd2_unbiased(X, Y, a.bandwidth));
}

TEST_CASE("null rejections stay near the nominal level") {
  // 20 independent null datasets at alpha = 0.05: expect ~1 rejection;
  // more than 2 would indicate a miscalibrated threshold.
  int rejections = 0;
  for (int s = 0; s < 20; ++s) {
    Rng data_rng(100 + static_cast<std::uint64_t>(s));
    const auto X = gaussian_sample(30, 5, 0.0, data_rng);
    const auto Y = gaussian_sample(30, 5, 0.0, data_rng);
    Rng test_rng(200 + static_cast<std::uint64_t>(s));
    const MmdReport r = mmd_two_sample_test(X, Y, 200, 0.05, test_rng, 0);
    if (r.reject) ++rejections;
  }
  CHECK(rejections <= 2);
}

TEST_CASE("the null statistic is centered at zero") {
  // Unbiasedness proxy: under equal distributions the estimator's mean is
  // zero, so the average of 200 independent replicates stays within three
  // standard errors of zero.
  const int reps = 200;
  std::vector<double> values;
  values.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    Rng rng(300 + static_cast<std::uint64_t>(r));
    const auto X = gaussian_sample(30, 2, 0.0, rng);
    const auto Y = gaussian_sample(30, 2, 0.0, rng);
    values.push_back(mmd2_unbiased(X, Y, 1.0));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (reps - 1);
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(var / reps));
}

}  // TEST_SUITE
