#include "vbgp/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "vbgp/errors.hpp"

namespace vbgp {

void GpPosterior::validate() const {
  if (mean.size() != grid.size() || cov.rows() != grid.size() ||
      cov.cols() != grid.size())
    throw InvalidArgument("gp posterior: dimension mismatch");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("gp posterior: covariance not symmetric");
  if (cov.size() > 0 && cov.diagonal().minCoeff() < -1e-12 * scale)
    throw InvalidArgument("gp posterior: negative variance on the diagonal");
}

namespace {

// Cholesky with the retry ladder: plain, then diagonal jitter 1e-9 * scale,
// then 1e-6 * scale.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m,
                                                 double scale,
                                                 const char* what) {
  for (const double jitter : {0.0, 1e-9 * scale, 1e-6 * scale}) {
    Eigen::MatrixXd jittered = m;
    if (jitter > 0.0)
      jittered.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(jittered);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError(std::string(what) +
                       ": Cholesky failed even with jitter 1e-6");
}

}  // namespace

GpPosterior gp_regress(KernelKind kind, const KernelHyperparams& hp,
                       const Observations& obs, const Eigen::VectorXd& grid) {
  hp.validate();
  obs.validate();
  if (!grid.allFinite())
    throw InvalidArgument("gp_regress: non-finite grid point");

  GpPosterior post;
  post.grid = grid;
  Eigen::MatrixXd prior = gram_matrix(kind, hp, grid, grid);

  if (obs.size() == 0) {
    post.mean = Eigen::VectorXd::Zero(grid.size());
    post.cov = std::move(prior);
    return post;
  }

  Eigen::MatrixXd k_obs = gram_matrix(kind, hp, obs.times, obs.times);
  k_obs.diagonal().array() += hp.sigma2_y;
  const auto llt = cholesky_with_jitter(k_obs, hp.sigma2_k, "gp_regress");

  const Eigen::MatrixXd k_cross = gram_matrix(kind, hp, obs.times, grid);
  post.mean = k_cross.transpose() * llt.solve(obs.values);
  post.cov = prior - k_cross.transpose() * llt.solve(k_cross);
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

namespace {

// Factor L with L L' ~= cov for any PSD input. Plain Cholesky first, then a
// jittered retry, then an eigendecomposition with negative eigenvalues
// clamped to zero (this makes the all-zero covariance exact: L = 0).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double scale = cov.diagonal().maxCoeff();
  if (scale > 0.0) {
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += 1e-9 * scale;
    Eigen::LLT<Eigen::MatrixXd> retry(jittered);
    if (retry.info() == Eigen::Success) return retry.matrixL();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericalError("gp_sample: covariance factorization failed");
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

PathBundle gp_sample(const GpPosterior& posterior, int n, Rng& rng) {
  if (n < 1) throw InvalidArgument("gp_sample: n must be >= 1");
  posterior.validate();

  const Eigen::MatrixXd factor = psd_factor(posterior.cov);
  const Eigen::Index g = posterior.grid.size();

  PathBundle bundle;
  bundle.grid = grid_from_points(posterior.grid);
  bundle.states.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(g);
    for (Eigen::Index k = 0; k < g; ++k) z[k] = rng.normal();
    bundle.states.push_back(posterior.mean + factor * z);
  }
  return bundle;
}

}  // namespace vbgp
