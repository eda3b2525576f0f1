#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "vbgp/autodiff.hpp"
#include "vbgp/kernels.hpp"
#include "vbgp/observations.hpp"
#include "vbgp/path_bundle.hpp"
#include "vbgp/rng.hpp"
#include "vbgp/rnn.hpp"
#include "vbgp/time_grid.hpp"

namespace vbgp {

// Observation map h: y ~ N(h(f), sigma2_y), h identity or elementwise square.
enum class Likelihood { Identity, Square };

Likelihood likelihood_from_string(const std::string& name);
std::string to_string(Likelihood lik);

// Mean-field Gaussian over the unconstrained hyperparameters
// eta = (log lambda, log sigma2_k); theta = exp(eta) is log-normal, and the
// exp Jacobian is part of every density over theta.
struct MeanFieldGaussian {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_s;

  void validate() const;
};

// phi = (hyperparameter distribution, bridge network weights).
struct VariationalParams {
  MeanFieldGaussian theta_dist;
  BridgeRnnParams rnn;

  void validate() const;
};

// Monte Carlo evidence-lower-bound estimate with its per-term breakdown
// (each field is the mean over samples; value is their sum).
struct ElboEstimate {
  double value = 0.0;
  int n_samples = 0;
  double log_p_theta = 0.0;
  double log_p_f = 0.0;
  double log_p_y = 0.0;
  double neg_log_q_theta = 0.0;
  double neg_log_q_path = 0.0;
};

// Fixed pins the hyperparameters (no q(theta) or p(theta) terms); PriorSde
// wires the bridge drift/diffusion to the prior SDE terms instead of the
// network heads. Both exist so the estimator can be checked against
// closed-form and quadrature oracles.
enum class ThetaMode { Infer, Fixed };
enum class BridgeMode { Learned, PriorSde };

struct ElboOptions {
  Likelihood likelihood = Likelihood::Identity;
  int n_samples = 10;
  double sigma2_y = 0.1;
  ThetaMode theta_mode = ThetaMode::Infer;
  BridgeMode bridge_mode = BridgeMode::Learned;
  double fixed_lambda = 1.0;    // used when theta_mode == Fixed
  double fixed_sigma2_k = 1.0;  // used when theta_mode == Fixed
};

// ---------------------------------------------------------------------------
// Tape-level pieces. One ELBO evaluation lives on a single tape so backward
// yields reparameterized gradients for every parameter leaf at once.

struct VariationalVars {
  BridgeRnnVars rnn;
  ad::Var theta_mu;     // 2 x 1
  ad::Var theta_log_s;  // 2 x 1
};

VariationalVars make_variational_vars(ad::Tape& tape,
                                      const VariationalParams& params,
                                      bool requires_grad);

// One reparameterized hyperparameter draw: eta = mu + exp(log_s) .* z with
// z ~ N(0, I) (two engine draws). log_q and log_p are densities over theta
// (Gaussian in eta minus sum(eta) for the exp Jacobian); the prior is
// log theta_i ~ N(0, 1).
struct HyperSample {
  ad::Var eta;    // 2 x 1
  ad::Var log_q;  // 1 x 1
  ad::Var log_p;  // 1 x 1
};

HyperSample sample_hyperparams_on_tape(ad::Tape& tape, ad::Var theta_mu,
                                       ad::Var theta_log_s, Rng& rng);

// One bridge rollout. Draw order: first the initial-state noise (m draws),
// then m draws per step. States, per-step drifts and diffusions are exposed
// so the accumulated log_q can be re-derived from the emitted path.
struct RolloutVars {
  std::vector<ad::Var> states;      // grid.size() entries, m x 1
  std::vector<ad::Var> drifts;      // grid.steps() entries, m x 1
  std::vector<ad::Var> diffusions;  // grid.steps() entries, m x 1
  ad::Var log_q;                    // 1 x 1
};

// sigma2_y sets the noise-to-signal ratio in the pull and damping inputs fed
// to the network heads; pass the observation variance used by the model.
RolloutVars rollout_bridge_on_tape(ad::Tape& tape, const BridgeRnnVars& rnn,
                                   ad::Var eta, const Observations& obs,
                                   const TimeGrid& grid, BridgeMode mode,
                                   double sigma2_y, Rng& rng);

// log p(f | theta) of a rolled-out scalar path under the discretized prior:
// N(f_0; 0, sigma2_k) plus the per-step transition Gaussians
// N(f_{k+1}; f_k (1 - lambda dt), 2 sigma2_k lambda dt).
ad::Var em_log_density_on_tape(ad::Tape& tape,
                               const std::vector<ad::Var>& states,
                               ad::Var eta, const TimeGrid& grid);

// log p(y | f) = sum_j log N(y_j; h(f(tau_j)), sigma2_y).
ad::Var observation_log_density_on_tape(ad::Tape& tape,
                                        const std::vector<ad::Var>& states,
                                        const Observations& obs,
                                        const TimeGrid& grid, Likelihood lik,
                                        double sigma2_y);

struct ElboVars {
  ad::Var value;  // 1 x 1
  ElboEstimate estimate;
};

// n (theta, path) samples on the given tape. Draw order per sample: the two
// hyperparameter draws (Infer mode only), then the rollout draws.
ElboVars build_elbo(ad::Tape& tape, const VariationalVars& vars,
                    const Observations& obs, const TimeGrid& grid,
                    const ElboOptions& opts, Rng& rng);

// ---------------------------------------------------------------------------
// Value-only wrappers.

// Returns the sampled hyperparameters (sigma2_y copied through) and the log
// density of the draw under the mean-field family, including the Jacobian.
std::pair<KernelHyperparams, double> sample_hyperparams(
    const MeanFieldGaussian& dist, double sigma2_y, Rng& rng);

// Returns the rolled-out path (grid.size() x m) and its accumulated log q.
std::pair<Eigen::MatrixXd, double> rollout_bridge(
    const BridgeRnnParams& rnn, const KernelHyperparams& theta,
    const Observations& obs, const TimeGrid& grid, Rng& rng);

ElboEstimate elbo(const VariationalParams& params, const Observations& obs,
                  const TimeGrid& grid, const ElboOptions& opts, Rng& rng);

// n rollouts with hyperparameters sampled per path. Path i uses the child
// stream rng.split(i), so the bundle is identical however paths are
// scheduled.
PathBundle generate_paths(const VariationalParams& params,
                          const Observations& obs, const TimeGrid& grid,
                          int n, double sigma2_y, const Rng& rng);

}  // namespace vbgp
