#pragma once

#include <Eigen/Dense>

#include "vbgp/autodiff.hpp"
#include "vbgp/rng.hpp"

namespace vbgp {

// Diffusion outputs keep this floor added after all multiplicative factors,
// so step variances stay strictly positive.
inline constexpr double kDiffusionFloor = 1e-6;

// Per-step cell input: the current state (m entries) followed by seven
// conditioning features: normalized time, step length, time to the next
// observation, value of the next observation, past-last-observation
// indicator, log lambda, log sigma2_k.
int bridge_input_dim(int state_dim);

long bridge_param_count(int hidden_size, int state_dim);

// Weights of the bridge network: a single gated recurrent cell plus a drift
// head, a pre-softplus diffusion head, and the location/pre-softplus scale
// of the initial-state Gaussian.
//
// Each head also carries zero-initialized coefficients on analytic
// guided-bridge terms, so gradient descent can reach a good bridge through a
// few scalars instead of sculpting it from recurrent weights alone:
//   Ag  scales the prior mean reversion      -lambda f
//   Ab  scales the bridge pull               (v_next - f) / (tau + r/c^2)
//   Aw  exponentiates the prior diffusion scale c on the learned drift term
//   Ac  exponentiates the prior diffusion ratio  (c_prior / sqrt(2))
//   Ap  exponentiates the bridge damping     sqrt(1 - dt / (tau + r/c^2))
//   As  exponentiates sigma_k on the initial-state scale
// where tau is the time to the next observation, r the observation noise
// variance and c^2 = 2 lambda sigma2_k the prior diffusion. The exponents
// let one set of learned corrections keep the right magnitude across the
// sampled hyperparameter range. With all head weights zero the bridge is a
// drift-free random walk.
struct BridgeRnnParams {
  Eigen::MatrixXd Wz, Uz, bz;          // update gate
  Eigen::MatrixXd Wr, Ur, br;          // reset gate
  Eigen::MatrixXd Wh, Uh, bh;          // candidate state
  Eigen::MatrixXd Wg, bg, Ag, Ab, Aw;  // drift head + guided-drift terms
  Eigen::MatrixXd Wc, bc, Ac, Ap;      // diffusion head + scale terms
  Eigen::MatrixXd mu0, rho0, As;  // initial state: location, scale, exponent

  int hidden_size() const { return static_cast<int>(Wz.rows()); }
  int input_dim() const { return static_cast<int>(Wz.cols()); }
  int state_dim() const { return static_cast<int>(Wg.rows()); }
  long param_count() const;

  void validate() const;
};

// Gate weights drawn uniform in +-1/sqrt(fan-in); head weights, guided-term
// coefficients and the initial-state parameters start at zero, so an
// untrained bridge is a drift-free random walk. The diffusion bias starts at
// the prior SDE's scale for median hyperparameters (c = sqrt(2)) rather than
// softplus(0), which keeps early hyperparameter updates from chasing an
// arbitrary walk scale.
BridgeRnnParams init_bridge_params(int hidden_size, int state_dim, Rng& rng);

// The same weights as leaves on a tape.
struct BridgeRnnVars {
  ad::Var Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;
  ad::Var Wg, bg, Ag, Ab, Aw, Wc, bc, Ac, Ap, mu0, rho0, As;
};

BridgeRnnVars make_bridge_vars(ad::Tape& tape, const BridgeRnnParams& params,
                               bool requires_grad);

// One recurrent update: returns the new hidden state given input x
// (input_dim x 1) and hidden h (hidden_size x 1).
ad::Var gru_cell(const BridgeRnnVars& v, ad::Var x, ad::Var h);

// Drift: (Wg h + bg) exp(Aw log_c) - Ag (lambda f) + Ab pull, with f the
// current state (m x 1); lam, pull and log_c are 1 x 1 tape values (pull = 0
// past the last observation, log_c = log sqrt(2 lambda sigma2_k)).
ad::Var drift_head(const BridgeRnnVars& v, ad::Var h, ad::Var f, ad::Var lam,
                   ad::Var pull, ad::Var log_c);

// Diffusion: softplus(Wc h + bc) .* exp(Ac half_log_theta + Ap log_damp)
// + floor, where half_log_theta = (log lambda + log sigma2_k) / 2 and
// log_damp = log sqrt(1 - dt / (tau + r/c^2)) (0 past the last observation).
ad::Var diffusion_head(const BridgeRnnVars& v, ad::Var h,
                       ad::Var half_log_theta, ad::Var log_damp);

}  // namespace vbgp
