#pragma once

#include <cstdint>
#include <string>

#include "vbgp/kernels.hpp"
#include "vbgp/variational.hpp"

namespace vbgp {

// Everything a command needs, parse-validated before any compute. The
// hyperparameters here are the data-generating truth for simulate and the
// fixed values for exact fits; variational training infers lambda and
// sigma2_k and treats sigma2_y as known.
struct ExperimentConfig {
  KernelKind kernel = KernelKind::Exponential;
  double lambda = 1.0;
  double sigma2_k = 1.0;
  double sigma2_y = 0.1;
  int n_obs = 6;
  double span_start = 0.0;
  double span_end = 10.0;
  int grid_steps = 64;
  int epochs = 2500;
  double learning_rate = 4e-3;
  // Final step size of the linear decay schedule; negative keeps the
  // learning rate constant.
  double learning_rate_final = 6e-4;
  int mc_samples = 10;
  Likelihood likelihood = Likelihood::Identity;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int hidden_size = 64;
  int n_paths = 30;
  int n_permutations = 1000;
  double alpha = 0.05;
  int checkpoint_every = 0;
  double clip_norm = 10.0;

  KernelHyperparams hyperparams() const {
    return KernelHyperparams{lambda, sigma2_k, sigma2_y};
  }

  void validate() const;  // ConfigError naming the offending field
};

ExperimentConfig default_config();    // the exp-gp study defaults
ExperimentConfig nonlinear_config();  // the squared-observation study

// key = value lines, '#' comments, blank lines ignored; unknown keys are
// errors. Parsing starts from `base` so presets can be overridden.
ExperimentConfig parse_config_file(const std::string& path,
                                   const ExperimentConfig& base);
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);

}  // namespace vbgp
