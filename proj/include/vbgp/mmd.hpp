#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vbgp/rng.hpp"

namespace vbgp {

// Two-sample test verdict: unbiased MMD^2 between equal-size samples, the
// (1 - alpha) permutation quantile, and the comparison of the two.
struct MmdReport {
  double mmd2 = 0.0;
  double threshold = 0.0;
  bool reject = false;
  double bandwidth = 0.0;
  int m = 0;
  int n_permutations = 0;
  std::uint64_t seed = 0;
};

// exp(-||x - y||^2 / (2 bandwidth^2)).
double gaussian_rkhs_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            double bandwidth);

// Median of pairwise Euclidean distances over the pooled sample; falls back
// to the mean distance when the median is 0, and to 1 when that is 0 too.
double median_bandwidth(const std::vector<Eigen::VectorXd>& pooled);

// The standard unbiased estimator
// (1/(m(m-1))) sum_{i != j} [k(x_i,x_j) + k(y_i,y_j) - k(x_i,y_j) - k(x_j,y_i)];
// may be negative.
double mmd2_unbiased(const std::vector<Eigen::VectorXd>& X,
                     const std::vector<Eigen::VectorXd>& Y, double bandwidth);

// Pools X and Y, recomputes the statistic under n_permutations random equal
// relabelings, and returns the empirical (1 - alpha) quantile (ascending
// order, index floor((1 - alpha) n), clamped). Deterministic given rng.
double permutation_threshold(const std::vector<Eigen::VectorXd>& X,
                             const std::vector<Eigen::VectorXd>& Y,
                             double bandwidth, int n_permutations,
                             double alpha, Rng& rng);

// Statistic + threshold + verdict with the median-heuristic bandwidth. The
// seed field of the report is caller-provided labeling for the output file.
MmdReport mmd_two_sample_test(const std::vector<Eigen::VectorXd>& X,
                              const std::vector<Eigen::VectorXd>& Y,
                              int n_permutations, double alpha, Rng& rng,
                              std::uint64_t seed_label);

}  // namespace vbgp
