#pragma once

#include <Eigen/Dense>
#include <utility>

#include "vbgp/errors.hpp"
#include "vbgp/path_bundle.hpp"
#include "vbgp/rng.hpp"
#include "vbgp/state_space.hpp"

namespace vbgp {

// Gaussian transition parameters of one Euler-Maruyama step:
// mean = f + dt g(f), cov = c(f) c(f)' dt.
struct EmStepParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Generic form with caller-supplied drift g(f) -> vector and diffusion
// c(f) -> m x w matrix (hyperparameters live in the closures).
template <typename Drift, typename Diffusion>
EmStepParams em_step_density_params(Drift&& drift, Diffusion&& diffusion,
                                    const Eigen::VectorXd& state, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("em step: dt must be positive");
  const Eigen::VectorXd g = drift(state);
  const Eigen::MatrixXd c = diffusion(state);
  if (!g.allFinite() || !c.allFinite())
    throw NumericalError("em step: non-finite drift or diffusion");
  return {state + dt * g, (c * c.transpose()) * dt};
}

// Linear prior SDE: g = F f, c = L sqrt(q).
EmStepParams em_step_density_params(const StateSpaceModel& ssm,
                                    const Eigen::VectorXd& state, double dt);

// Forward simulation of the prior SDE. f_0 ~ N(0, P_inf); each step draws
// from the Euler-Maruyama transition Gaussian. Path i uses the child stream
// rng.split(i), so the bundle is identical however paths are scheduled.
PathBundle simulate_prior(const StateSpaceModel& ssm, const TimeGrid& grid,
                          int n, const Rng& rng);

// Log density of one path under the discretized prior: the N(0, P_inf)
// initial term plus the per-step transition Gaussians. For m = 1 the step
// covariance is the Euler-Maruyama q dt; for m = 2 that matrix is rank one,
// so the exact discretization's Q is used for the density instead.
double em_log_density(const StateSpaceModel& ssm, const Eigen::MatrixXd& path,
                      const TimeGrid& grid);

}  // namespace vbgp
