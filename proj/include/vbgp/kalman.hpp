#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vbgp/observations.hpp"
#include "vbgp/state_space.hpp"

namespace vbgp {

// Sequential posterior over the state at every grid point, forward filtered
// and RTS smoothed, plus the exact marginal log likelihood of the
// observations.
struct KalmanResult {
  Eigen::VectorXd grid;
  std::vector<Eigen::VectorXd> filtered_means;
  std::vector<Eigen::MatrixXd> filtered_covs;
  std::vector<Eigen::VectorXd> smoothed_means;
  std::vector<Eigen::MatrixXd> smoothed_covs;
  double log_likelihood = 0.0;

  // Latent-function (first component) posterior moments.
  Eigen::VectorXd projected_mean() const;
  Eigen::VectorXd projected_variance() const;
};

// Forward filter initialized at N(0, P_inf), measurement updates with noise
// sigma2_y only at observation times, then a backward RTS pass. The grid
// must be strictly increasing and contain every observation time.
KalmanResult kalman_smooth(const StateSpaceModel& ssm, const Observations& obs,
                           const Eigen::VectorXd& grid, double sigma2_y);

}  // namespace vbgp
