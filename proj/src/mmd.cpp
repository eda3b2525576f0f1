#include "vbgp/mmd.hpp"

#include <algorithm>
#include <cmath>

#include "vbgp/errors.hpp"

namespace vbgp {

double gaussian_rkhs_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            double bandwidth) {
  if (x.size() != y.size())
    throw InvalidArgument("rkhs kernel: vector lengths differ");
  if (!(bandwidth > 0.0))
    throw InvalidArgument("rkhs kernel: bandwidth must be positive");
  return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

double median_bandwidth(const std::vector<Eigen::VectorXd>& pooled) {
  const std::size_t n = pooled.size();
  if (n < 2)
    throw InvalidArgument("median bandwidth: need at least two vectors");
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    if (pooled[i].size() != pooled[0].size())
      throw InvalidArgument("median bandwidth: vector lengths differ");
    for (std::size_t j = i + 1; j < n; ++j)
      dists.push_back((pooled[i] - pooled[j]).norm());
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t mid = dists.size() / 2;
  double bw = dists.size() % 2 == 1
                  ? dists[mid]
                  : 0.5 * (dists[mid - 1] + dists[mid]);
  if (bw > 0.0) return bw;
  double mean = 0.0;
  for (double d : dists) mean += d;
  mean /= static_cast<double>(dists.size());
  return mean > 0.0 ? mean : 1.0;
}

namespace {

// Gram matrix of the pooled sample; every permutation statistic reuses it.
Eigen::MatrixXd pooled_gram(const std::vector<Eigen::VectorXd>& pool,
                            double bandwidth) {
  const Eigen::Index n = static_cast<Eigen::Index>(pool.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v =
          gaussian_rkhs_kernel(pool[static_cast<std::size_t>(i)],
                               pool[static_cast<std::size_t>(j)], bandwidth);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// Unbiased statistic from a precomputed Gram over a pool, with xs/ys the
// pool indices of the two samples.
double mmd2_from_gram(const Eigen::MatrixXd& gram, const std::vector<int>& xs,
                      const std::vector<int>& ys) {
  const std::size_t m = xs.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      // Grouped so swapping the two samples adds the same floats in the
      // same shape, keeping mmd2(X, Y) == mmd2(Y, X) bit-exact.
      acc += (gram(xs[i], xs[j]) + gram(ys[i], ys[j])) -
             (gram(xs[i], ys[j]) + gram(xs[j], ys[i]));
    }
  return acc / (static_cast<double>(m) * static_cast<double>(m - 1));
}

}  // namespace

double mmd2_unbiased(const std::vector<Eigen::VectorXd>& X,
                     const std::vector<Eigen::VectorXd>& Y, double bandwidth) {
  if (X.size() != Y.size())
    throw InvalidArgument("mmd2: sample sizes must be equal");
  if (X.size() < 2)
    throw InvalidArgument("mmd2: need at least two samples per side");
  const int m = static_cast<int>(X.size());
  std::vector<Eigen::VectorXd> pool;
  pool.reserve(2 * static_cast<std::size_t>(m));
  pool.insert(pool.end(), X.begin(), X.end());
  pool.insert(pool.end(), Y.begin(), Y.end());
  const Eigen::MatrixXd gram = pooled_gram(pool, bandwidth);
  std::vector<int> xs(static_cast<std::size_t>(m)),
      ys(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    xs[static_cast<std::size_t>(i)] = i;
    ys[static_cast<std::size_t>(i)] = m + i;
  }
  return mmd2_from_gram(gram, xs, ys);
}

double permutation_threshold(const std::vector<Eigen::VectorXd>& X,
                             const std::vector<Eigen::VectorXd>& Y,
                             double bandwidth, int n_permutations,
                             double alpha, Rng& rng) {
  if (X.size() != Y.size())
    throw InvalidArgument("permutation threshold: sample sizes must be equal");
  if (X.size() < 2)
    throw InvalidArgument(
        "permutation threshold: need at least two samples per side");
  if (n_permutations < 100)
    throw InvalidArgument(
        "permutation threshold: n_permutations must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("permutation threshold: alpha must be in (0, 1)");

  const int m = static_cast<int>(X.size());
  std::vector<Eigen::VectorXd> pool;
  pool.reserve(2 * static_cast<std::size_t>(m));
  pool.insert(pool.end(), X.begin(), X.end());
  pool.insert(pool.end(), Y.begin(), Y.end());
  const Eigen::MatrixXd gram = pooled_gram(pool, bandwidth);

  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_permutations));
  std::vector<int> xs(static_cast<std::size_t>(m)),
      ys(static_cast<std::size_t>(m));
  for (int p = 0; p < n_permutations; ++p) {
    const std::vector<int> perm = rng.permutation(2 * m);
    for (int i = 0; i < m; ++i) {
      xs[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(i)];
      ys[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(m + i)];
    }
    stats.push_back(mmd2_from_gram(gram, xs, ys));
  }
  std::sort(stats.begin(), stats.end());
  // floor with a tiny nudge so exact multiples like (1 - 1/n) * n land on
  // their integer instead of just below it
  long idx = static_cast<long>(
      std::floor((1.0 - alpha) * static_cast<double>(n_permutations) + 1e-9));
  idx = std::clamp<long>(idx, 0, n_permutations - 1);
  return stats[static_cast<std::size_t>(idx)];
}

MmdReport mmd_two_sample_test(const std::vector<Eigen::VectorXd>& X,
                              const std::vector<Eigen::VectorXd>& Y,
                              int n_permutations, double alpha, Rng& rng,
                              std::uint64_t seed_label) {
  std::vector<Eigen::VectorXd> pool;
  pool.reserve(X.size() + Y.size());
  pool.insert(pool.end(), X.begin(), X.end());
  pool.insert(pool.end(), Y.begin(), Y.end());
  MmdReport report;
  report.bandwidth = median_bandwidth(pool);
  report.mmd2 = mmd2_unbiased(X, Y, report.bandwidth);
  report.threshold = permutation_threshold(X, Y, report.bandwidth,
                                           n_permutations, alpha, rng);
  report.reject = report.mmd2 > report.threshold;
  report.m = static_cast<int>(X.size());
  report.n_permutations = n_permutations;
  report.seed = seed_label;
  return report;
}

}  // namespace vbgp
