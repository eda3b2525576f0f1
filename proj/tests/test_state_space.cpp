#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "vbgp/errors.hpp"
#include "vbgp/state_space.hpp"

using namespace vbgp;

namespace {

// Scaled-and-squared Taylor series for expm(M): independent oracle for the
// discretization's transition matrix.
Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& m) {
  int squarings = 0;
  Eigen::MatrixXd scaled = m;
  while (scaled.cwiseAbs().maxCoeff() > 0.5) {
    scaled *= 0.5;
    ++squarings;
  }
  Eigen::MatrixXd result =
      Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd term = result;
  for (int k = 1; k <= 20; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

}  // namespace

TEST_SUITE("state_space") {

TEST_CASE("exponential kernel maps to the scalar OU model") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Exponential, {1.0, 1.0, 0.0});
  REQUIRE(ssm.m == 1);
  CHECK(ssm.F(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(ssm.L(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssm.q == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ssm.P_inf(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssm.H(0) == 1.0);
  CHECK_NOTHROW(ssm.validate());
}

TEST_CASE("spectral density follows 2 sigma2 lambda") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Exponential, {0.5, 2.0, 0.0});
  CHECK(ssm.q == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ssm.P_inf(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("matern-3/2 model satisfies the stationary Lyapunov relation") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Matern32, {1.7, 0.8, 0.0});
  REQUIRE(ssm.m == 2);
  const Eigen::MatrixXd residual = ssm.F * ssm.P_inf +
                                   ssm.P_inf * ssm.F.transpose() +
                                   ssm.q * ssm.L * ssm.L.transpose();
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(ssm.H(0) == 1.0);
  CHECK(ssm.H(1) == 0.0);
  // The latent-function marginal variance is the kernel variance.
  CHECK(ssm.P_inf(0, 0) == doctest::Approx(0.8).epsilon(1e-10));
}

TEST_CASE("scalar discretization matches the closed form") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Exponential, {1.0, 1.3, 0.0});
  const double dt = std::log(2.0);
  const auto [a, q] = discretize(ssm, dt);
  CHECK(a(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q(0, 0) == doctest::Approx(0.75 * 1.3).epsilon(1e-12));
}

TEST_CASE("discretization degenerates to identity at vanishing dt") {
  for (KernelKind kind : {KernelKind::Exponential, KernelKind::Matern32}) {
    const StateSpaceModel ssm = build_ssm(kind, {1.5, 1.0, 0.0});
    const auto [a, q] = discretize(ssm, 1e-12);
    CHECK((a - Eigen::MatrixXd::Identity(ssm.m, ssm.m)).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK(q.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("matern transition matrix matches a Taylor-series exponential") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Matern32, {0.9, 1.4, 0.0});
  for (double dt : {0.05, 0.3, 1.0, 2.5}) {
    const auto [a, q] = discretize(ssm, dt);
    const Eigen::MatrixXd ref = taylor_expm(ssm.F * dt);
    CHECK((a - ref).cwiseAbs().maxCoeff() < 1e-9);

    // Q from the stationary identity must stay symmetric PSD.
    CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    REQUIRE(es.info() == Eigen::Success);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("long steps forget the past entirely") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Exponential, {1.0, 1.6, 0.0});
  const auto [a, q] = discretize(ssm, 60.0);
  CHECK(std::abs(a(0, 0)) < 1e-20);
  CHECK(q(0, 0) == doctest::Approx(1.6).epsilon(1e-12));
}

TEST_CASE("nonpositive step lengths are rejected") {
  const StateSpaceModel ssm =
      build_ssm(KernelKind::Exponential, {1.0, 1.0, 0.0});
  CHECK_THROWS_AS(discretize(ssm, 0.0), InvalidArgument);
  CHECK_THROWS_AS(discretize(ssm, -0.1), InvalidArgument);
}

}  // TEST_SUITE
