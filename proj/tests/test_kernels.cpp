#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "vbgp/errors.hpp"
#include "vbgp/kernels.hpp"
#include "vbgp/rng.hpp"

using namespace vbgp;

TEST_SUITE("kernels") {

TEST_CASE("exponential kernel pins its closed-form values") {
  KernelHyperparams hp{1.0, 1.0, 0.0};
  CHECK(kernel_eval(KernelKind::Exponential, hp, 0.0, 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kernel_eval(KernelKind::Exponential, hp, 0.0, std::log(2.0)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // Independent hand evaluation: sigma2 * e^{-lambda |dt|}.
  KernelHyperparams hp2{0.5, 2.0, 0.0};
  const double by_hand = 2.0 * std::exp(-0.5 * 4.0);
  CHECK(kernel_eval(KernelKind::Exponential, hp2, 1.0, 5.0) ==
        doctest::Approx(by_hand).epsilon(1e-12));
  CHECK(by_hand == doctest::Approx(0.27067).epsilon(1e-4));
}

TEST_CASE("matern-3/2 kernel equals the variance at zero lag") {
  KernelHyperparams hp{2.0, 3.0, 0.0};
  CHECK(kernel_eval(KernelKind::Matern32, hp, 1.3, 1.3) ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("kernels are symmetric, stationary, and bounded by the variance") {
  Rng rng(31);
  for (KernelKind kind : {KernelKind::Exponential, KernelKind::Matern32}) {
    KernelHyperparams hp{0.3 + 2.0 * rng.uniform(), 0.5 + rng.uniform(), 0.0};
    for (int i = 0; i < 50; ++i) {
      const double t = 10.0 * (rng.uniform() - 0.5);
      const double tp = 10.0 * (rng.uniform() - 0.5);
      const double shift = 5.0 * (rng.uniform() - 0.5);
      const double v = kernel_eval(kind, hp, t, tp);
      CHECK(v == kernel_eval(kind, hp, tp, t));
      CHECK(v == doctest::Approx(kernel_eval(kind, hp, t + shift, tp + shift))
                     .epsilon(1e-12));
      CHECK(v <= hp.sigma2_k + 1e-12);
    }
  }
}

TEST_CASE("non-finite times are rejected") {
  KernelHyperparams hp{1.0, 1.0, 0.0};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(kernel_eval(KernelKind::Exponential, hp, nan, 0.0),
                  InvalidArgument);
  CHECK_THROWS_AS(kernel_eval(KernelKind::Exponential, hp, 0.0, inf),
                  InvalidArgument);
}

TEST_CASE("hyperparameter validation names each constraint") {
  CHECK_THROWS_AS(KernelHyperparams{-1.0, 1.0, 0.0}.validate(),
                  InvalidArgument);
  CHECK_THROWS_AS(KernelHyperparams{1.0, 0.0, 0.0}.validate(),
                  InvalidArgument);
  CHECK_THROWS_AS(KernelHyperparams{1.0, 1.0, -0.1}.validate(),
                  InvalidArgument);
  CHECK_NOTHROW(KernelHyperparams{1.0, 1.0, 0.0}.validate());
}

TEST_CASE("hyperparameters serialize and parse losslessly") {
  KernelHyperparams hp{0.123456789012345, 1.75, 0.1};
  const KernelHyperparams back = KernelHyperparams::parse(hp.serialize());
  CHECK(back == hp);
  CHECK_THROWS_AS(KernelHyperparams::parse("lambda=1"), InvalidArgument);
  CHECK_THROWS_AS(
      KernelHyperparams::parse("lambda=1 sigma2_k=1 bogus=2"),
      InvalidArgument);
}

TEST_CASE("kernel names round-trip through strings") {
  CHECK(kernel_kind_from_string("exponential") == KernelKind::Exponential);
  CHECK(kernel_kind_from_string("matern32") == KernelKind::Matern32);
  CHECK(to_string(KernelKind::Exponential) == "exponential");
  CHECK(to_string(KernelKind::Matern32) == "matern32");
  CHECK_THROWS_AS(kernel_kind_from_string("rbf"), InvalidArgument);
  CHECK(state_dim(KernelKind::Exponential) == 1);
  CHECK(state_dim(KernelKind::Matern32) == 2);
}

TEST_CASE("gram matrix pins the two-point example") {
  KernelHyperparams hp{1.0, 1.0, 0.0};
  Eigen::VectorXd one(1);
  one << 0.0;
  const Eigen::MatrixXd g1 =
      gram_matrix(KernelKind::Exponential, hp, one, one);
  CHECK(g1.rows() == 1);
  CHECK(g1(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd two(2);
  two << 0.0, std::log(2.0);
  const Eigen::MatrixXd g2 =
      gram_matrix(KernelKind::Exponential, hp, two, two);
  CHECK(g2(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g2(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g2(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g2(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a jittered 5x5 gram matrix is strictly positive definite") {
  // Eigenvalue oracle, independent of any Cholesky the library performs.
  Rng rng(41);
  KernelHyperparams hp{1.2, 0.9, 0.0};
  Eigen::VectorXd times(5);
  for (int i = 0; i < 5; ++i) times[i] = 8.0 * rng.uniform();
  std::sort(times.data(), times.data() + times.size());
  Eigen::MatrixXd g = gram_matrix(KernelKind::Exponential, hp, times, times);
  g.diagonal().array() += 1e-9;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  REQUIRE(es.info() == Eigen::Success);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("random gram matrices of size up to 8 admit a cholesky factor") {
  Rng rng(43);
  for (KernelKind kind : {KernelKind::Exponential, KernelKind::Matern32}) {
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 2 + static_cast<int>(rng.uniform() * 7.0);
      KernelHyperparams hp{0.2 + 2.8 * rng.uniform(),
                           0.5 + 1.5 * rng.uniform(), 0.0};
      Eigen::VectorXd times(n);
      for (int i = 0; i < n; ++i) times[i] = 10.0 * rng.uniform();
      Eigen::MatrixXd g = gram_matrix(kind, hp, times, times);
      g.diagonal().array() += 1e-9;
      Eigen::LLT<Eigen::MatrixXd> llt(g);
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("gram matrix cross terms index rows by the first argument") {
  KernelHyperparams hp{1.0, 1.0, 0.0};
  Eigen::VectorXd a(2), b(3);
  a << 0.0, 1.0;
  b << 0.5, 1.5, 2.5;
  const Eigen::MatrixXd g = gram_matrix(KernelKind::Exponential, hp, a, b);
  REQUIRE(g.rows() == 2);
  REQUIRE(g.cols() == 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(g(i, j) ==
            doctest::Approx(kernel_eval(KernelKind::Exponential, hp, a[i],
                                        b[j]))
                .epsilon(1e-14));
}

}  // TEST_SUITE
