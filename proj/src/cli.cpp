#include "vbgp/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <vector>

#include "vbgp/csv.hpp"
#include "vbgp/errors.hpp"
#include "vbgp/gp.hpp"
#include "vbgp/kalman.hpp"
#include "vbgp/mmd.hpp"
#include "vbgp/state_space.hpp"
#include "vbgp/time_grid.hpp"
#include "vbgp/train.hpp"
#include "vbgp/variational.hpp"

namespace vbgp {

namespace {

// Child-stream indices off the root seed, fixed so every command derives
// the same substream for the same job regardless of call order.
namespace stream {
constexpr std::uint64_t kTruth = 1;
constexpr std::uint64_t kNoise = 2;
constexpr std::uint64_t kTrain = 3;
constexpr std::uint64_t kPaths = 4;
constexpr std::uint64_t kGpSamples = 5;
constexpr std::uint64_t kMmd = 6;
constexpr std::uint64_t kSelfTest = 7;
}  // namespace stream

std::string joined(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
}

// Observation times at the midpoints of n_obs uniform cells over the span.
Eigen::VectorXd observation_times(const ExperimentConfig& config) {
  Eigen::VectorXd times(config.n_obs);
  const double width =
      (config.span_end - config.span_start) / config.n_obs;
  for (int j = 0; j < config.n_obs; ++j)
    times[j] = config.span_start + (j + 0.5) * width;
  return times;
}

TimeGrid build_grid(const ExperimentConfig& config, const Observations& obs) {
  return make_time_grid(config.span_start, config.span_end,
                        config.grid_steps, obs);
}

Observations read_observations(const ExperimentConfig& config) {
  const CsvTable table =
      read_csv(joined(config.out_dir, files::kObservations));
  const int tc = table.column("t");
  const int yc = table.column("y");
  Observations obs;
  obs.times.resize(static_cast<Eigen::Index>(table.rows.size()));
  obs.values.resize(obs.times.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    obs.times[static_cast<Eigen::Index>(r)] = table.number(r, tc);
    obs.values[static_cast<Eigen::Index>(r)] = table.number(r, yc);
  }
  obs.validate();
  return obs;
}

// Grid index of each observation, in observation order.
std::vector<int> observation_positions(const TimeGrid& grid, int n_obs) {
  std::vector<int> pos(static_cast<std::size_t>(n_obs), -1);
  for (int k = 0; k < grid.size(); ++k) {
    const int j = grid.obs_at[static_cast<std::size_t>(k)];
    if (j >= 0) pos[static_cast<std::size_t>(j)] = k;
  }
  for (int j = 0; j < n_obs; ++j)
    if (pos[static_cast<std::size_t>(j)] < 0)
      throw InvalidArgument("grid does not carry every observation");
  return pos;
}

double apply_likelihood(Likelihood lik, double u) {
  return lik == Likelihood::Square ? u * u : u;
}

void write_posterior_csv(const std::string& path, const Eigen::VectorXd& grid,
                         const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& variance) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double sd = std::sqrt(std::max(0.0, variance[i]));
    rows.push_back({format_double(grid[i]), format_double(mean[i]),
                    format_double(mean[i] - 1.96 * sd),
                    format_double(mean[i] + 1.96 * sd)});
  }
  write_csv(path, {"t", "mean", "lo95", "hi95"}, rows);
}

std::vector<Eigen::VectorXd> bundle_vectors(const PathBundle& bundle) {
  const Eigen::MatrixXd projected = bundle.projected();
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(projected.rows()));
  for (Eigen::Index i = 0; i < projected.rows(); ++i)
    out.push_back(projected.row(i).transpose());
  return out;
}

void write_paths_csv(const std::string& path, const PathBundle& bundle) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(bundle.n_paths()) *
               static_cast<std::size_t>(bundle.grid.size()));
  for (int i = 0; i < bundle.n_paths(); ++i)
    for (int k = 0; k < bundle.grid.size(); ++k)
      rows.push_back({std::to_string(i),
                      format_double(bundle.grid.points[k]),
                      format_double(bundle.states[static_cast<std::size_t>(i)](
                          k, 0))});
  write_csv(path, {"path_id", "t", "value"}, rows);
}

// Pointwise mean and empirical 2.5/97.5 percentiles of h(path value) across
// the bundle.
void write_summary_csv(const std::string& path, const PathBundle& bundle,
                       Likelihood lik) {
  const int n = bundle.n_paths();
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(bundle.grid.size()));
  std::vector<double> values(static_cast<std::size_t>(n));
  for (int k = 0; k < bundle.grid.size(); ++k) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      values[static_cast<std::size_t>(i)] = apply_likelihood(
          lik, bundle.states[static_cast<std::size_t>(i)](k, 0));
      mean += values[static_cast<std::size_t>(i)];
    }
    mean /= n;
    std::sort(values.begin(), values.end());
    const auto lo_idx = static_cast<std::size_t>(
        std::floor(0.025 * (n - 1)));
    const auto hi_idx = static_cast<std::size_t>(
        std::ceil(0.975 * (n - 1)));
    rows.push_back({format_double(bundle.grid.points[k]),
                    format_double(mean), format_double(values[lo_idx]),
                    format_double(values[hi_idx])});
  }
  write_csv(path, {"t", "mean", "lo95", "hi95"}, rows);
}

void write_mmd_csv(const std::string& path, const MmdReport& report,
                   bool with_epoch = false, int epoch = 0) {
  std::vector<std::string> header = {"mmd2",      "threshold",
                                     "reject",    "bandwidth",
                                     "m",         "n_permutations",
                                     "seed"};
  std::vector<std::string> row = {
      format_double(report.mmd2),     format_double(report.threshold),
      report.reject ? "1" : "0",      format_double(report.bandwidth),
      std::to_string(report.m),       std::to_string(report.n_permutations),
      std::to_string(report.seed)};
  if (with_epoch) {
    header.insert(header.begin(), "epoch");
    row.insert(row.begin(), std::to_string(epoch));
  }
  write_csv(path, header, {row});
}

}  // namespace

void cmd_simulate(const ExperimentConfig& config) {
  config.validate();
  ensure_out_dir(config.out_dir);
  const Rng root(config.seed);

  Observations placeholder;
  placeholder.times = observation_times(config);
  placeholder.values = Eigen::VectorXd::Zero(config.n_obs);
  const TimeGrid grid = build_grid(config, placeholder);
  const auto pos = observation_positions(grid, config.n_obs);

  const GpPosterior prior = gp_regress(config.kernel, config.hyperparams(),
                                       Observations::empty(), grid.points);
  Rng truth_rng = root.split(stream::kTruth);
  const PathBundle truth = gp_sample(prior, 1, truth_rng);
  const Eigen::VectorXd u = truth.states[0].col(0);

  Rng noise_rng = root.split(stream::kNoise);
  const double noise_sd = std::sqrt(config.sigma2_y);
  std::vector<std::vector<std::string>> truth_rows;
  truth_rows.reserve(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k < grid.size(); ++k)
    truth_rows.push_back(
        {format_double(grid.points[k]), format_double(u[k]),
         format_double(apply_likelihood(config.likelihood, u[k]))});
  write_csv(joined(config.out_dir, files::kTruth), {"t", "u", "f"},
            truth_rows);

  std::vector<std::vector<std::string>> obs_rows;
  obs_rows.reserve(static_cast<std::size_t>(config.n_obs));
  for (int j = 0; j < config.n_obs; ++j) {
    const double f =
        apply_likelihood(config.likelihood, u[pos[static_cast<std::size_t>(j)]]);
    const double y = f + noise_sd * noise_rng.normal();
    obs_rows.push_back({format_double(placeholder.times[j]),
                        format_double(y)});
  }
  write_csv(joined(config.out_dir, files::kObservations), {"t", "y"},
            obs_rows);
}

void cmd_fit_exact(const ExperimentConfig& config, bool use_kalman) {
  config.validate();
  if (config.likelihood == Likelihood::Square)
    throw UnsupportedOperation(
        "fit-exact: exact regression on squared observations is not "
        "supported; train the variational bridge instead");
  const Observations obs = read_observations(config);
  const TimeGrid grid = build_grid(config, obs);
  ensure_out_dir(config.out_dir);
  if (use_kalman) {
    const StateSpaceModel ssm =
        build_ssm(config.kernel, config.hyperparams());
    const KalmanResult res =
        kalman_smooth(ssm, obs, grid.points, config.sigma2_y);
    write_posterior_csv(joined(config.out_dir, files::kPosteriorKalman),
                        grid.points, res.projected_mean(),
                        res.projected_variance());
  } else {
    const GpPosterior post =
        gp_regress(config.kernel, config.hyperparams(), obs, grid.points);
    write_posterior_csv(joined(config.out_dir, files::kPosteriorExact),
                        grid.points, post.mean, post.variance());
  }
}

void cmd_train_vb(const ExperimentConfig& config,
                  const std::string& resume_checkpoint) {
  config.validate();
  const Observations obs = read_observations(config);
  const TimeGrid grid = build_grid(config, obs);
  ensure_out_dir(config.out_dir);
  const Rng root(config.seed);

  TrainState state =
      resume_checkpoint.empty()
          ? init_train_state(config.hidden_size, root.split(stream::kTrain))
          : load_checkpoint(resume_checkpoint);
  const int start_epoch = state.epoch;

  TrainOptions opts;
  opts.adam.learning_rate = config.learning_rate;
  opts.adam.lr_final = config.learning_rate_final;
  opts.adam.clip_norm = config.clip_norm;
  opts.epochs = config.epochs;
  opts.elbo.likelihood = config.likelihood;
  opts.elbo.n_samples = config.mc_samples;
  opts.elbo.sigma2_y = config.sigma2_y;
  opts.checkpoint_every = config.checkpoint_every;
  opts.checkpoint_dir = config.out_dir;

  const TrainResult result = train(std::move(state), obs, grid, opts);
  save_checkpoint(joined(config.out_dir, files::kCheckpointFinal),
                  result.state);

  std::vector<std::vector<std::string>> trace_rows;
  trace_rows.reserve(result.elbo_trace.size());
  for (std::size_t i = 0; i < result.elbo_trace.size(); ++i)
    trace_rows.push_back(
        {std::to_string(start_epoch + static_cast<int>(i) + 1),
         format_double(result.elbo_trace[i])});
  write_csv(joined(config.out_dir, files::kElboTrace), {"epoch", "elbo"},
            trace_rows);

  const PathBundle bundle =
      generate_paths(result.state.params, obs, grid, config.n_paths,
                     config.sigma2_y, root.split(stream::kPaths));
  write_paths_csv(joined(config.out_dir, files::kPaths), bundle);
  if (config.likelihood == Likelihood::Square)
    write_summary_csv(joined(config.out_dir, files::kPathsSummary), bundle,
                      config.likelihood);
}

namespace {

std::vector<Eigen::VectorXd> read_paths_file(const std::string& path,
                                             const TimeGrid& grid) {
  const CsvTable table = read_csv(path);
  const int idc = table.column("path_id");
  const int tc = table.column("t");
  const int vc = table.column("value");
  const std::size_t n_rows = table.rows.size();
  const auto grid_n = static_cast<std::size_t>(grid.size());
  if (grid_n == 0 || n_rows == 0 || n_rows % grid_n != 0)
    throw InvalidArgument(
        "criticize: paths file does not tile the config grid");
  const std::size_t n_paths = n_rows / grid_n;
  std::vector<Eigen::VectorXd> out;
  out.reserve(n_paths);
  std::size_t r = 0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Eigen::VectorXd v(grid.size());
    for (std::size_t k = 0; k < grid_n; ++k, ++r) {
      if (table.number(r, idc) != static_cast<double>(i))
        throw InvalidArgument("criticize: unexpected path_id ordering");
      const double t = table.number(r, tc);
      if (std::abs(t - grid.points[static_cast<Eigen::Index>(k)]) > 1e-9)
        throw InvalidArgument(
            "criticize: paths grid does not match the config grid");
      v[static_cast<Eigen::Index>(k)] = table.number(r, vc);
    }
    out.push_back(std::move(v));
  }
  return out;
}

MmdReport criticize_report(const ExperimentConfig& config,
                           const std::vector<Eigen::VectorXd>& X,
                           const GpPosterior& posterior, const Rng& root,
                           std::uint64_t mmd_substream) {
  Rng gp_rng = root.split(stream::kGpSamples);
  const PathBundle gp_bundle =
      gp_sample(posterior, static_cast<int>(X.size()), gp_rng);
  const std::vector<Eigen::VectorXd> Y = bundle_vectors(gp_bundle);
  Rng mmd_rng = mmd_substream == 0
                    ? root.split(stream::kMmd)
                    : root.split(stream::kMmd).split(mmd_substream);
  return mmd_two_sample_test(X, Y, config.n_permutations, config.alpha,
                             mmd_rng, config.seed);
}

}  // namespace

void cmd_criticize(const ExperimentConfig& config,
                   const std::string& paths_file, bool self_test) {
  config.validate();
  if (config.likelihood == Likelihood::Square)
    throw UnsupportedOperation(
        "criticize: comparison against exact GP samples needs the identity "
        "likelihood");
  const Observations obs = read_observations(config);
  const TimeGrid grid = build_grid(config, obs);
  ensure_out_dir(config.out_dir);
  const Rng root(config.seed);

  const GpPosterior posterior =
      gp_regress(config.kernel, config.hyperparams(), obs, grid.points);

  std::vector<Eigen::VectorXd> X;
  if (self_test) {
    Rng self_rng = root.split(stream::kSelfTest);
    X = bundle_vectors(gp_sample(posterior, config.n_paths, self_rng));
  } else {
    const std::string path = paths_file.empty()
                                 ? joined(config.out_dir, files::kPaths)
                                 : paths_file;
    X = read_paths_file(path, grid);
  }
  const MmdReport report = criticize_report(config, X, posterior, root, 0);
  write_mmd_csv(joined(config.out_dir, files::kMmdReport), report);
}

namespace {

void run_criticize_sweep(const ExperimentConfig& config) {
  cmd_simulate(config);

  const Observations obs = read_observations(config);
  const TimeGrid grid = build_grid(config, obs);
  const Rng root(config.seed);

  std::vector<int> milestones;
  for (int e : {10, 100, 500, 1000, 2500})
    if (e <= config.epochs) milestones.push_back(e);
  if (milestones.empty() || milestones.back() != config.epochs)
    milestones.push_back(config.epochs);

  TrainOptions opts;
  opts.adam.learning_rate = config.learning_rate;
  opts.adam.lr_final = config.learning_rate_final;
  opts.adam.clip_norm = config.clip_norm;
  opts.epochs = config.epochs;
  opts.elbo.likelihood = config.likelihood;
  opts.elbo.n_samples = config.mc_samples;
  opts.elbo.sigma2_y = config.sigma2_y;
  opts.milestone_epochs = milestones;
  opts.checkpoint_dir = config.out_dir;

  TrainState state =
      init_train_state(config.hidden_size, root.split(stream::kTrain));
  const TrainResult result = train(std::move(state), obs, grid, opts);
  save_checkpoint(joined(config.out_dir, files::kCheckpointFinal),
                  result.state);

  std::vector<std::vector<std::string>> trace_rows;
  for (std::size_t i = 0; i < result.elbo_trace.size(); ++i)
    trace_rows.push_back({std::to_string(static_cast<int>(i) + 1),
                          format_double(result.elbo_trace[i])});
  write_csv(joined(config.out_dir, files::kElboTrace), {"epoch", "elbo"},
            trace_rows);

  const GpPosterior posterior =
      gp_regress(config.kernel, config.hyperparams(), obs, grid.points);

  std::vector<std::vector<std::string>> sweep_rows;
  for (int milestone : milestones) {
    const TrainState at = load_checkpoint(
        joined(config.out_dir,
               "checkpoint_" + std::to_string(milestone) + ".ckpt"));
    const PathBundle bundle = generate_paths(
        at.params, obs, grid, config.n_paths, config.sigma2_y,
        root.split(stream::kPaths).split(
            static_cast<std::uint64_t>(milestone)));
    const MmdReport report =
        criticize_report(config, bundle_vectors(bundle), posterior, root,
                         static_cast<std::uint64_t>(milestone));
    sweep_rows.push_back({std::to_string(milestone),
                          format_double(report.mmd2),
                          format_double(report.threshold),
                          report.reject ? "1" : "0",
                          format_double(report.bandwidth),
                          std::to_string(report.m),
                          std::to_string(report.n_permutations),
                          std::to_string(report.seed)});
  }
  write_csv(joined(config.out_dir, files::kMmdSweep),
            {"epoch", "mmd2", "threshold", "reject", "bandwidth", "m",
             "n_permutations", "seed"},
            sweep_rows);
}

}  // namespace

void cmd_experiment(const std::string& name, const ExperimentConfig& config) {
  if (name == "exp-gp") {
    cmd_simulate(config);
    cmd_fit_exact(config, false);
    cmd_fit_exact(config, true);
    cmd_train_vb(config, "");
    cmd_criticize(config, "", false);
  } else if (name == "criticize-sweep") {
    run_criticize_sweep(config);
  } else if (name == "nonlinear") {
    cmd_simulate(config);
    cmd_train_vb(config, "");
  } else {
    throw ConfigError("unknown experiment '" + name +
                      "' (expected exp-gp, criticize-sweep or nonlinear)");
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Gaussian process regression through its SDE representation, with "
      "RNN-parameterized variational bridges and MMD model criticism"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::string paths_file;
  std::string experiment_name;
  std::int64_t seed = 0;
  bool use_kalman = false;
  bool self_test = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "key = value configuration file");
    cmd->add_option("--seed", seed, "override the config seed")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", out_dir, "override the output directory");
  };

  CLI::App* simulate = app.add_subcommand(
      "simulate", "draw a truth path and noisy observations");
  add_common(simulate);
  CLI::App* fit = app.add_subcommand(
      "fit-exact", "exact GP posterior on the simulated observations");
  add_common(fit);
  fit->add_flag("--kalman", use_kalman,
                "use the sequential Kalman/RTS solution");
  CLI::App* train_cmd =
      app.add_subcommand("train-vb", "train the variational bridge");
  add_common(train_cmd);
  train_cmd->add_option("--checkpoint", checkpoint,
                        "resume from this checkpoint file");
  CLI::App* criticize = app.add_subcommand(
      "criticize", "MMD two-sample test against exact GP samples");
  add_common(criticize);
  criticize->add_option("--paths", paths_file,
                        "paths CSV to test (default: out dir)");
  criticize->add_flag("--self-test", self_test,
                      "test GP samples against themselves");
  CLI::App* experiment =
      app.add_subcommand("experiment", "run a full orchestrated study");
  add_common(experiment);
  experiment
      ->add_option("name", experiment_name,
                   "exp-gp, criticize-sweep or nonlinear")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig base = default_config();
    if (app.got_subcommand(experiment) && experiment_name == "nonlinear")
      base = nonlinear_config();
    ExperimentConfig config =
        config_path.empty() ? base : parse_config_file(config_path, base);
    if (!out_dir.empty()) config.out_dir = out_dir;
    for (CLI::App* cmd : {simulate, fit, train_cmd, criticize, experiment})
      if (app.got_subcommand(cmd) && cmd->count("--seed"))
        config.seed = static_cast<std::uint64_t>(seed);
    config.validate();

    if (app.got_subcommand(simulate)) {
      cmd_simulate(config);
    } else if (app.got_subcommand(fit)) {
      cmd_fit_exact(config, use_kalman);
    } else if (app.got_subcommand(train_cmd)) {
      cmd_train_vb(config, checkpoint);
    } else if (app.got_subcommand(criticize)) {
      cmd_criticize(config, paths_file, self_test);
    } else {
      cmd_experiment(experiment_name, config);
    }
    return 0;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedOperation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace vbgp
