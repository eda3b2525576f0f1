#pragma once

#include <Eigen/Dense>
#include <utility>

#include "vbgp/kernels.hpp"

namespace vbgp {

// Companion-form SDE df = F f dt + L dbeta realizing a stationary kernel.
// The latent function is the first state component (H = [1 0 ... 0]) and q
// is the spectral density of the scalar driving white noise. P_inf solves
// F P + P F' + q L L' = 0.
struct StateSpaceModel {
  Eigen::MatrixXd F;       // m x m drift
  Eigen::MatrixXd L;       // m x 1 noise loading
  double q = 0.0;          // white-noise spectral density
  Eigen::RowVectorXd H;    // 1 x m observation projection
  Eigen::MatrixXd P_inf;   // stationary state covariance
  int m = 0;

  void validate() const;
};

StateSpaceModel build_ssm(KernelKind kind, const KernelHyperparams& hp);

// Exact discretization over a step of length dt: A = expm(F dt) and
// Q = P_inf - A P_inf A' (exact for stationary models).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(
    const StateSpaceModel& ssm, double dt);

}  // namespace vbgp
