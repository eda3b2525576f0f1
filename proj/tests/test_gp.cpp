#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "vbgp/errors.hpp"
#include "vbgp/gp.hpp"
#include "vbgp/kernels.hpp"
#include "vbgp/observations.hpp"
#include "vbgp/rng.hpp"

using namespace vbgp;

namespace {

Eigen::VectorXd linspace(double a, double b, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
  return v;
}

}  // namespace

TEST_SUITE("gp") {

TEST_CASE("empty observations recover the prior moments exactly") {
  KernelHyperparams hp{0.7, 1.4, 0.1};
  const Eigen::VectorXd grid = linspace(0.0, 5.0, 12);
  const GpPosterior post =
      gp_regress(KernelKind::Exponential, hp, Observations::empty(), grid);
  CHECK(post.mean.isZero(0.0));
  const Eigen::MatrixXd prior =
      gram_matrix(KernelKind::Exponential, hp, grid, grid);
  CHECK((post.cov - prior).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a noise-free observation is interpolated exactly") {
  KernelHyperparams hp{1.0, 1.0, 0.0};
  Observations obs;
  obs.times.resize(1);
  obs.values.resize(1);
  obs.times << 0.0;
  obs.values << 1.0;
  Eigen::VectorXd grid(1);
  grid << 0.0;
  const GpPosterior post = gp_regress(KernelKind::Exponential, hp, obs, grid);
  CHECK(post.mean[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(post.cov(0, 0)) < 1e-10);
}

TEST_CASE("posterior matches a dense explicit-inverse oracle") {
  KernelHyperparams hp{0.8, 1.5, 0.1};
  Observations obs;
  obs.times.resize(3);
  obs.values.resize(3);
  obs.times << 0.5, 2.0, 3.7;
  obs.values << 0.3, -0.8, 1.1;
  const Eigen::VectorXd grid = linspace(0.0, 5.0, 10);

  const GpPosterior post = gp_regress(KernelKind::Exponential, hp, obs, grid);

  // Brute-force reference with an explicit matrix inverse.
  const Eigen::MatrixXd k_obs =
      gram_matrix(KernelKind::Exponential, hp, obs.times, obs.times) +
      hp.sigma2_y * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd k_cross =
      gram_matrix(KernelKind::Exponential, hp, obs.times, grid);
  const Eigen::MatrixXd k_grid =
      gram_matrix(KernelKind::Exponential, hp, grid, grid);
  const Eigen::MatrixXd k_inv = k_obs.inverse();
  const Eigen::VectorXd mean_ref = k_cross.transpose() * k_inv * obs.values;
  const Eigen::MatrixXd cov_ref =
      k_grid - k_cross.transpose() * k_inv * k_cross;

  CHECK((post.mean - mean_ref).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((post.cov - cov_ref).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_NOTHROW(post.validate());
}

TEST_CASE("an exact observation collapses the variance at its grid point") {
  KernelHyperparams hp{1.0, 1.0, 0.0};
  const Eigen::VectorXd grid = linspace(0.0, 4.0, 9);
  Observations obs;
  obs.times.resize(1);
  obs.values.resize(1);
  obs.times << grid[4];
  obs.values << -0.3;
  const GpPosterior post = gp_regress(KernelKind::Exponential, hp, obs, grid);
  CHECK(post.variance()[4] <= 1e-10);
}

TEST_CASE("posterior covariance is symmetric with nonnegative diagonal") {
  Rng rng(55);
  KernelHyperparams hp{1.3, 0.8, 0.05};
  Observations obs;
  obs.times.resize(4);
  obs.values.resize(4);
  obs.times << 0.4, 1.1, 2.9, 3.3;
  for (int i = 0; i < 4; ++i) obs.values[i] = rng.normal();
  const Eigen::VectorXd grid = linspace(0.0, 4.0, 15);
  const GpPosterior post = gp_regress(KernelKind::Matern32, hp, obs, grid);
  CHECK((post.cov - post.cov.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(post.variance().minCoeff() > -1e-12);
}

TEST_CASE("sampling a zero-covariance posterior returns the mean") {
  GpPosterior post;
  post.grid = linspace(0.0, 1.0, 5);
  post.mean = linspace(-1.0, 1.0, 5);
  post.cov = Eigen::MatrixXd::Zero(5, 5);
  Rng rng(3);
  const PathBundle bundle = gp_sample(post, 4, rng);
  REQUIRE(bundle.n_paths() == 4);
  for (const auto& s : bundle.states)
    CHECK((s.col(0) - post.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampling is deterministic given the generator") {
  KernelHyperparams hp{1.0, 1.0, 0.1};
  const Eigen::VectorXd grid = linspace(0.0, 3.0, 8);
  const GpPosterior post =
      gp_regress(KernelKind::Exponential, hp, Observations::empty(), grid);
  Rng r1(10), r2(10);
  const PathBundle a = gp_sample(post, 3, r1);
  const PathBundle b = gp_sample(post, 3, r2);
  for (int i = 0; i < 3; ++i)
    CHECK((a.states[static_cast<std::size_t>(i)] -
           b.states[static_cast<std::size_t>(i)])
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("sample mean obeys a law-of-large-numbers bound") {
  KernelHyperparams hp{0.8, 1.5, 0.1};
  Observations obs;
  obs.times.resize(3);
  obs.values.resize(3);
  obs.times << 0.5, 2.0, 3.7;
  obs.values << 0.3, -0.8, 1.1;
  Eigen::VectorXd grid(3);
  grid << 1.0, 2.5, 4.0;
  const GpPosterior post = gp_regress(KernelKind::Exponential, hp, obs, grid);

  const int n = 5000;
  Rng rng(77);
  const PathBundle bundle = gp_sample(post, n, rng);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (const auto& s : bundle.states) mean += s.col(0);
  mean /= static_cast<double>(n);
  for (int i = 0; i < 3; ++i) {
    const double se = std::sqrt(post.cov(i, i) / static_cast<double>(n));
    CHECK(std::abs(mean[i] - post.mean[i]) < 4.0 * se);
  }
}

TEST_CASE("invalid sampling requests are rejected") {
  GpPosterior post;
  post.grid = linspace(0.0, 1.0, 3);
  post.mean = Eigen::VectorXd::Zero(3);
  post.cov = Eigen::MatrixXd::Zero(3, 3);
  Rng rng(1);
  CHECK_THROWS_AS(gp_sample(post, 0, rng), InvalidArgument);
}

TEST_CASE("badly indefinite covariances fail with a numerical error") {
  GpPosterior post;
  post.grid = linspace(0.0, 1.0, 2);
  post.mean = Eigen::VectorXd::Zero(2);
  post.cov = -Eigen::MatrixXd::Identity(2, 2);
  Rng rng(1);
  CHECK_THROWS_AS(gp_sample(post, 1, rng), Error);
}

}  // TEST_SUITE
