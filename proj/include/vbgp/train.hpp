#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vbgp/observations.hpp"
#include "vbgp/rng.hpp"
#include "vbgp/time_grid.hpp"
#include "vbgp/variational.hpp"

namespace vbgp {

struct AdamOptions {
  double learning_rate = 1e-3;
  // Step size decays linearly from learning_rate to lr_final across the
  // epoch budget; a negative value keeps the rate constant.
  double lr_final = -1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global gradient-norm clip
};

struct TrainOptions {
  AdamOptions adam;
  int epochs = 2500;
  ElboOptions elbo;
  // Checkpoints are written under checkpoint_dir as
  // checkpoint_<epoch>.ckpt, every checkpoint_every epochs (0 = never) and
  // at each listed milestone. Empty dir disables periodic files; the
  // divergence checkpoint then lands in the working directory.
  int checkpoint_every = 0;
  std::vector<int> milestone_epochs;
  std::string checkpoint_dir;
};

// Everything needed to continue training bit-exactly: parameters, optimizer
// moments, epoch counter and the serialized position of the training RNG
// stream.
struct TrainState {
  VariationalParams params;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  long adam_t = 0;
  int epoch = 0;  // completed epochs
  std::string rng_state;
};

struct TrainResult {
  TrainState state;
  // One entry per epoch run by this call (resume appends to an earlier
  // trace); non-finite epochs record NaN.
  std::vector<double> elbo_trace;
};

// Parameters flattened to one vector in a fixed block order (gate weights,
// heads, initial-state parameters, then the mean-field mu and log_s);
// matrices are laid out column-major within their block.
Eigen::VectorXd flatten_params(const VariationalParams& params);
void unflatten_params(const Eigen::VectorXd& x, VariationalParams& params);

// Fresh state: bridge weights drawn from rng, mean-field started at
// mu = 0 (hyperparameters near 1) with s = 0.1, zeroed Adam moments. The
// passed stream continues as the training stream.
TrainState init_train_state(int hidden_size, Rng rng);

// Versioned text checkpoint (every value printed with 17 significant
// digits, so reload is bit-exact).
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

// Maximizes the ELBO with Adam from state.epoch to opts.epochs. Gradients
// are clipped at opts.adam.clip_norm in global norm. An epoch whose loss or
// gradient is non-finite applies no update; three such epochs in a row save
// the last stable state and raise TrainingDiverged with that path.
TrainResult train(TrainState state, const Observations& obs,
                  const TimeGrid& grid, const TrainOptions& opts);

}  // namespace vbgp
