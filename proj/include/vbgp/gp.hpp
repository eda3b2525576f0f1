#pragma once

#include <Eigen/Dense>

#include "vbgp/kernels.hpp"
#include "vbgp/observations.hpp"
#include "vbgp/path_bundle.hpp"
#include "vbgp/rng.hpp"

namespace vbgp {

// Batch GP posterior moments over a query grid.
struct GpPosterior {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::VectorXd variance() const { return cov.diagonal(); }
  void validate() const;
};

// Exact batch regression: mean = K_*' (K + sigma2_y I)^-1 y and the matching
// posterior covariance, solved through Cholesky factors. With no
// observations the prior moments are returned unchanged.
GpPosterior gp_regress(KernelKind kind, const KernelHyperparams& hp,
                       const Observations& obs, const Eigen::VectorXd& grid);

// n joint draws mean + L z with L a factor of cov. Deterministic given rng.
PathBundle gp_sample(const GpPosterior& posterior, int n, Rng& rng);

}  // namespace vbgp
