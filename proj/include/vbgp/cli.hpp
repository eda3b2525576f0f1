#pragma once

#include <string>

#include "vbgp/config.hpp"

namespace vbgp {

// Output file names inside the configured out_dir.
namespace files {
inline constexpr const char* kTruth = "truth.csv";
inline constexpr const char* kObservations = "observations.csv";
inline constexpr const char* kPosteriorExact = "posterior_exact.csv";
inline constexpr const char* kPosteriorKalman = "posterior_kalman.csv";
inline constexpr const char* kElboTrace = "elbo_trace.csv";
inline constexpr const char* kPaths = "variational_paths.csv";
inline constexpr const char* kPathsSummary = "paths_summary.csv";
inline constexpr const char* kMmdReport = "mmd_report.csv";
inline constexpr const char* kMmdSweep = "mmd_sweep.csv";
inline constexpr const char* kCheckpointFinal = "checkpoint_final.ckpt";
}  // namespace files

// Draws a latent truth path from the GP prior, observes it at uniform
// intervals with additive noise, writes truth.csv and observations.csv.
void cmd_simulate(const ExperimentConfig& config);

// Exact posterior (batch GP, or the sequential Kalman/RTS solution with
// --kalman) from the observations in out_dir. Identity likelihood only.
void cmd_fit_exact(const ExperimentConfig& config, bool use_kalman);

// Variational training; writes the ELBO trace, sampled paths, the final
// checkpoint, and for the square likelihood a squared-path summary.
// resume_checkpoint, when non-empty, continues a previous run bit-exactly.
void cmd_train_vb(const ExperimentConfig& config,
                  const std::string& resume_checkpoint);

// MMD two-sample test of a paths file against exact-GP posterior samples on
// the same grid. self_test replaces the paths with an independent GP sample
// so the verdict calibrates the test itself. Empty paths_file means
// out_dir/variational_paths.csv.
void cmd_criticize(const ExperimentConfig& config,
                   const std::string& paths_file, bool self_test);

// Orchestrated studies: exp-gp (simulate, exact fits, training, criticism),
// criticize-sweep (criticism at epoch milestones), nonlinear (square
// likelihood, variational outputs only).
void cmd_experiment(const std::string& name, const ExperimentConfig& config);

// Full argument parsing and dispatch. Exit codes: 0 success, 2 config or
// usage error, 3 numerical error, 4 I/O error.
int run_cli(int argc, const char* const* argv);

}  // namespace vbgp
