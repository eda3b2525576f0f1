#include "vbgp/variational.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vbgp/errors.hpp"

namespace vbgp {

Likelihood likelihood_from_string(const std::string& name) {
  if (name == "identity") return Likelihood::Identity;
  if (name == "square") return Likelihood::Square;
  throw ConfigError("unknown likelihood '" + name +
                    "' (expected identity or square)");
}

std::string to_string(Likelihood lik) {
  return lik == Likelihood::Identity ? "identity" : "square";
}

void MeanFieldGaussian::validate() const {
  if (mu.size() != log_s.size())
    throw InvalidArgument("mean-field Gaussian: mu and log_s lengths differ");
  if (mu.size() == 0)
    throw InvalidArgument("mean-field Gaussian: empty parameter vectors");
  if (!mu.allFinite() || !log_s.allFinite())
    throw InvalidArgument("mean-field Gaussian: non-finite parameters");
}

void VariationalParams::validate() const {
  theta_dist.validate();
  if (theta_dist.mu.size() != 2)
    throw InvalidArgument(
        "variational params: hyperparameter family must cover exactly "
        "(log lambda, log sigma2_k)");
  rnn.validate();
}

VariationalVars make_variational_vars(ad::Tape& tape,
                                      const VariationalParams& params,
                                      bool requires_grad) {
  params.validate();
  return VariationalVars{
      make_bridge_vars(tape, params.rnn, requires_grad),
      tape.leaf(params.theta_dist.mu, requires_grad),
      tape.leaf(params.theta_dist.log_s, requires_grad)};
}

HyperSample sample_hyperparams_on_tape(ad::Tape& tape, ad::Var theta_mu,
                                       ad::Var theta_log_s, Rng& rng) {
  const Eigen::Index d = tape.value(theta_mu).rows();
  Eigen::MatrixXd z(d, 1);
  for (Eigen::Index i = 0; i < d; ++i) z(i, 0) = rng.normal();

  ad::Var eta = theta_mu + ad::exp(theta_log_s) * tape.constant(z);
  ad::Var s2 = ad::square(ad::exp(theta_log_s));
  ad::Var log_q = ad::gaussian_log_pdf(eta, theta_mu, s2) - ad::sum(eta);
  ad::Var log_p =
      ad::gaussian_log_pdf(eta, tape.constant(Eigen::MatrixXd::Zero(d, 1)),
                           tape.constant(Eigen::MatrixXd::Ones(d, 1))) -
      ad::sum(eta);
  return HyperSample{eta, log_q, log_p};
}

namespace {

struct StepFeatures {
  double t_norm;  // (t_k - t_0) / (t_T - t_0)
  double dt;
  double t_next;  // time to the first observation strictly after t_k
  double v_next;  // its value
  double past;    // 1 once the last observation has been passed
};

std::vector<StepFeatures> step_features(const Observations& obs,
                                        const TimeGrid& grid) {
  const int T = grid.steps();
  std::vector<StepFeatures> out(static_cast<std::size_t>(T));
  if (T == 0) return out;
  const double t0 = grid.points[0];
  const double span = grid.points[T] - t0;
  const double* tb = obs.times.data();
  const double* te = tb + obs.size();
  for (int k = 0; k < T; ++k) {
    const double tk = grid.points[k];
    const double* it = std::upper_bound(tb, te, tk + 1e-12);
    StepFeatures f;
    f.t_norm = (tk - t0) / span;
    f.dt = grid.dt(k);
    if (it != te) {
      f.t_next = *it - tk;
      f.v_next = obs.values[it - tb];
      f.past = 0.0;
    } else {
      f.t_next = 0.0;
      f.v_next = 0.0;
      f.past = 1.0;
    }
    out[static_cast<std::size_t>(k)] = f;
  }
  return out;
}

// dt of each step replicated m times, as a column for elementwise use
// against stacked per-step vectors.
Eigen::MatrixXd stacked_dt(const TimeGrid& grid, int m) {
  const int T = grid.steps();
  Eigen::MatrixXd dts(static_cast<Eigen::Index>(T) * m, 1);
  for (int k = 0; k < T; ++k)
    for (int i = 0; i < m; ++i) dts(static_cast<Eigen::Index>(k) * m + i, 0) = grid.dt(k);
  return dts;
}

}  // namespace

RolloutVars rollout_bridge_on_tape(ad::Tape& tape, const BridgeRnnVars& rnn,
                                   ad::Var eta, const Observations& obs,
                                   const TimeGrid& grid, BridgeMode mode,
                                   double sigma2_y, Rng& rng) {
  obs.validate();
  grid.validate();
  if (!(sigma2_y >= 0.0))
    throw InvalidArgument("bridge rollout: sigma2_y must be >= 0");
  const int m = static_cast<int>(tape.value(rnn.mu0).rows());
  const int hidden = static_cast<int>(tape.value(rnn.Uz).rows());
  const int T = grid.steps();
  const auto feats = step_features(obs, grid);

  RolloutVars out;
  out.states.reserve(static_cast<std::size_t>(T) + 1);
  out.drifts.reserve(static_cast<std::size_t>(T));
  out.diffusions.reserve(static_cast<std::size_t>(T));

  if (mode == BridgeMode::PriorSde && m != 1)
    throw UnsupportedOperation(
        "bridge rollout: prior-wired mode needs a scalar state");
  ad::Var log_lam = ad::slice_rows(eta, 0, 1);
  ad::Var log_sig2 = ad::slice_rows(eta, 1, 1);
  ad::Var lam = ad::exp(log_lam);
  ad::Var half_log_theta = 0.5 * (log_lam + log_sig2);
  ad::Var log_c = half_log_theta + 0.5 * std::log(2.0);
  ad::Var c_prior = ad::exp(log_c);

  Eigen::MatrixXd eps0(m, 1);
  for (int i = 0; i < m; ++i) eps0(i, 0) = rng.normal();
  ad::Var s0 = (ad::softplus(rnn.rho0) + kDiffusionFloor) *
               ad::exp(rnn.As * (0.5 * log_sig2));
  ad::Var f = rnn.mu0 + s0 * tape.constant(eps0);
  ad::Var log_q = ad::gaussian_log_pdf(f, rnn.mu0, ad::square(s0));
  out.states.push_back(f);

  ad::Var h = tape.constant(Eigen::MatrixXd::Zero(hidden, 1));
  // Noise-to-signal ratio sigma2_y / c^2 entering the conditioned-diffusion
  // pull and damping terms; depends on eta, so it lives on the tape.
  ad::Var r_over_c2;
  const bool noisy_obs = sigma2_y > 0.0;
  if (noisy_obs)
    r_over_c2 =
        sigma2_y * ad::exp(-(log_lam + log_sig2 + std::log(2.0)));

  for (int k = 0; k < T; ++k) {
    try {
      ad::Var g, c;
      if (mode == BridgeMode::Learned) {
        const StepFeatures& fe = feats[static_cast<std::size_t>(k)];
        Eigen::MatrixXd fv(5, 1);
        fv << fe.t_norm, fe.dt, fe.t_next, fe.v_next, fe.past;
        ad::Var x = ad::concat_rows({f, tape.constant(fv), eta});
        h = gru_cell(rnn, x, h);
        ad::Var pull = tape.constant(0.0);
        ad::Var log_damp = tape.constant(0.0);
        if (fe.past == 0.0 && fe.t_next > 0.0) {
          ad::Var obs_coord = ad::slice_rows(f, 0, 1);
          if (noisy_obs) {
            ad::Var tau_r = r_over_c2 + fe.t_next;
            pull = (tape.constant(fe.v_next) - obs_coord) / tau_r;
            log_damp = 0.5 * ad::log(1.0 - tape.constant(fe.dt) / tau_r);
          } else {
            pull = (tape.constant(fe.v_next) - obs_coord) *
                   (1.0 / fe.t_next);
            const double shrink = std::max(1.0 - fe.dt / fe.t_next, 1e-12);
            log_damp = tape.constant(0.5 * std::log(shrink));
          }
        }
        g = drift_head(rnn, h, f, lam, pull, log_c);
        c = diffusion_head(rnn, h, half_log_theta, log_damp);
      } else {
        g = -(lam * f);
        c = c_prior;
      }
      const double dt = grid.dt(k);
      Eigen::MatrixXd noise(m, 1);
      for (int i = 0; i < m; ++i) noise(i, 0) = std::sqrt(dt) * rng.normal();
      f = f + (g * dt + c * tape.constant(noise));
      if (!tape.value(g).allFinite() || !tape.value(c).allFinite() ||
          !tape.value(f).allFinite())
        throw NumericalError("non-finite activation");
      out.states.push_back(f);
      out.drifts.push_back(g);
      out.diffusions.push_back(c);
    } catch (const NumericalError& e) {
      throw NumericalError("bridge rollout: step " + std::to_string(k) +
                           ": " + e.what());
    }
  }

  if (T > 0) {
    ad::Var all = ad::concat_rows(out.states);
    ad::Var prev = ad::slice_rows(all, 0, T * m);
    ad::Var next = ad::slice_rows(all, m, T * m);
    ad::Var dts = tape.constant(stacked_dt(grid, m));
    ad::Var means = ad::concat_rows(out.drifts) * dts;
    ad::Var vars = ad::square(ad::concat_rows(out.diffusions)) * dts;
    log_q = log_q + ad::gaussian_log_pdf(next - prev, means, vars);
  }
  out.log_q = log_q;
  return out;
}

ad::Var em_log_density_on_tape(ad::Tape& tape,
                               const std::vector<ad::Var>& states,
                               ad::Var eta, const TimeGrid& grid) {
  if (states.empty()) throw InvalidArgument("em log density: empty path");
  if (static_cast<int>(states.size()) != grid.size())
    throw InvalidArgument("em log density: path and grid lengths differ");
  if (tape.value(states[0]).rows() != 1)
    throw UnsupportedOperation(
        "em log density on tape: scalar state only");

  ad::Var lam = ad::exp(ad::slice_rows(eta, 0, 1));
  ad::Var sig2 = ad::exp(ad::slice_rows(eta, 1, 1));
  ad::Var lp = ad::gaussian_log_pdf(states[0], tape.constant(0.0), sig2);
  const int T = grid.steps();
  if (T > 0) {
    ad::Var all = ad::concat_rows(states);
    ad::Var prev = ad::slice_rows(all, 0, T);
    ad::Var next = ad::slice_rows(all, 1, T);
    ad::Var dts = tape.constant(stacked_dt(grid, 1));
    ad::Var means = prev * (1.0 - lam * dts);
    ad::Var vars = (2.0 * lam * sig2) * dts;
    lp = lp + ad::gaussian_log_pdf(next, means, vars);
  }
  return lp;
}

ad::Var observation_log_density_on_tape(ad::Tape& tape,
                                        const std::vector<ad::Var>& states,
                                        const Observations& obs,
                                        const TimeGrid& grid, Likelihood lik,
                                        double sigma2_y) {
  if (static_cast<int>(states.size()) != grid.size())
    throw InvalidArgument("observation density: path and grid lengths differ");
  if (obs.size() == 0) return tape.constant(0.0);
  if (!(sigma2_y > 0.0))
    throw DomainError(
        "observation density: sigma2_y must be positive when observations "
        "are present");

  std::vector<int> pos(static_cast<std::size_t>(obs.size()), -1);
  for (int k = 0; k < grid.size(); ++k) {
    const int j = grid.obs_at[static_cast<std::size_t>(k)];
    if (j >= 0) pos[static_cast<std::size_t>(j)] = k;
  }
  std::vector<ad::Var> parts;
  parts.reserve(pos.size());
  for (std::size_t j = 0; j < pos.size(); ++j) {
    if (pos[j] < 0)
      throw InvalidArgument(
          "observation density: grid does not carry every observation");
    parts.push_back(
        ad::slice_rows(states[static_cast<std::size_t>(pos[j])], 0, 1));
  }
  ad::Var pred = ad::concat_rows(parts);
  if (lik == Likelihood::Square) pred = ad::square(pred);
  ad::Var y = tape.constant(Eigen::MatrixXd(obs.values));
  ad::Var var = tape.constant(sigma2_y);
  return ad::gaussian_log_pdf(y, pred, var);
}

ElboVars build_elbo(ad::Tape& tape, const VariationalVars& vars,
                    const Observations& obs, const TimeGrid& grid,
                    const ElboOptions& opts, Rng& rng) {
  if (opts.n_samples < 1)
    throw InvalidArgument("elbo: n_samples must be >= 1");
  obs.validate();
  grid.validate();
  if (tape.value(vars.rnn.Wg).rows() != 1)
    throw UnsupportedOperation(
        "elbo: the variational bridge supports scalar-state kernels only "
        "(exponential)");
  if (opts.theta_mode == ThetaMode::Fixed &&
      (!(opts.fixed_lambda > 0.0) || !(opts.fixed_sigma2_k > 0.0)))
    throw InvalidArgument("elbo: fixed hyperparameters must be positive");

  ad::Var sum_lp_theta = tape.constant(0.0);
  ad::Var sum_lp_f = tape.constant(0.0);
  ad::Var sum_lp_y = tape.constant(0.0);
  ad::Var sum_lq_theta = tape.constant(0.0);
  ad::Var sum_lq_path = tape.constant(0.0);

  for (int i = 0; i < opts.n_samples; ++i) {
    try {
      HyperSample hs;
      if (opts.theta_mode == ThetaMode::Infer) {
        hs = sample_hyperparams_on_tape(tape, vars.theta_mu, vars.theta_log_s,
                                        rng);
      } else {
        Eigen::MatrixXd eta0(2, 1);
        eta0 << std::log(opts.fixed_lambda), std::log(opts.fixed_sigma2_k);
        hs.eta = tape.constant(eta0);
        hs.log_q = tape.constant(0.0);
        hs.log_p = tape.constant(0.0);
      }
      RolloutVars ro = rollout_bridge_on_tape(tape, vars.rnn, hs.eta, obs,
                                              grid, opts.bridge_mode,
                                              opts.sigma2_y, rng);
      ad::Var lp_f = em_log_density_on_tape(tape, ro.states, hs.eta, grid);
      ad::Var lp_y = observation_log_density_on_tape(
          tape, ro.states, obs, grid, opts.likelihood, opts.sigma2_y);
      sum_lp_theta = sum_lp_theta + hs.log_p;
      sum_lp_f = sum_lp_f + lp_f;
      sum_lp_y = sum_lp_y + lp_y;
      sum_lq_theta = sum_lq_theta + hs.log_q;
      sum_lq_path = sum_lq_path + ro.log_q;
    } catch (const NumericalError& e) {
      throw NumericalError("elbo: sample " + std::to_string(i) + ": " +
                           e.what());
    }
  }

  const double n = static_cast<double>(opts.n_samples);
  ElboVars out;
  out.value = (sum_lp_theta + sum_lp_f + sum_lp_y - sum_lq_theta -
               sum_lq_path) /
              n;
  out.estimate.value = tape.scalar_value(out.value);
  out.estimate.n_samples = opts.n_samples;
  out.estimate.log_p_theta = tape.scalar_value(sum_lp_theta) / n;
  out.estimate.log_p_f = tape.scalar_value(sum_lp_f) / n;
  out.estimate.log_p_y = tape.scalar_value(sum_lp_y) / n;
  out.estimate.neg_log_q_theta = -tape.scalar_value(sum_lq_theta) / n;
  out.estimate.neg_log_q_path = -tape.scalar_value(sum_lq_path) / n;
  return out;
}

std::pair<KernelHyperparams, double> sample_hyperparams(
    const MeanFieldGaussian& dist, double sigma2_y, Rng& rng) {
  dist.validate();
  ad::Tape tape;
  ad::Var mu = tape.leaf(Eigen::MatrixXd(dist.mu), false);
  ad::Var log_s = tape.leaf(Eigen::MatrixXd(dist.log_s), false);
  HyperSample hs = sample_hyperparams_on_tape(tape, mu, log_s, rng);
  const Eigen::MatrixXd& eta = tape.value(hs.eta);
  if (eta.rows() != 2)
    throw InvalidArgument("sample_hyperparams: expected two hyperparameters");
  KernelHyperparams theta;
  theta.lambda = std::exp(eta(0, 0));
  theta.sigma2_k = std::exp(eta(1, 0));
  theta.sigma2_y = sigma2_y;
  return {theta, tape.scalar_value(hs.log_q)};
}

std::pair<Eigen::MatrixXd, double> rollout_bridge(
    const BridgeRnnParams& rnn, const KernelHyperparams& theta,
    const Observations& obs, const TimeGrid& grid, Rng& rng) {
  theta.validate();
  ad::Tape tape;
  BridgeRnnVars vars = make_bridge_vars(tape, rnn, false);
  Eigen::MatrixXd eta0(2, 1);
  eta0 << std::log(theta.lambda), std::log(theta.sigma2_k);
  RolloutVars ro = rollout_bridge_on_tape(tape, vars, tape.constant(eta0),
                                          obs, grid, BridgeMode::Learned,
                                          theta.sigma2_y, rng);
  Eigen::MatrixXd path(grid.size(), rnn.state_dim());
  for (int k = 0; k < grid.size(); ++k)
    path.row(k) = tape.value(ro.states[static_cast<std::size_t>(k)])
                      .col(0)
                      .transpose();
  return {path, tape.scalar_value(ro.log_q)};
}

ElboEstimate elbo(const VariationalParams& params, const Observations& obs,
                  const TimeGrid& grid, const ElboOptions& opts, Rng& rng) {
  ad::Tape tape;
  VariationalVars vars = make_variational_vars(tape, params, false);
  return build_elbo(tape, vars, obs, grid, opts, rng).estimate;
}

PathBundle generate_paths(const VariationalParams& params,
                          const Observations& obs, const TimeGrid& grid,
                          int n, double sigma2_y, const Rng& rng) {
  if (n < 1) throw InvalidArgument("generate_paths: n must be >= 1");
  params.validate();
  PathBundle bundle;
  bundle.grid = grid;
  bundle.states.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng stream = rng.split(static_cast<std::uint64_t>(i));
    ad::Tape tape;
    VariationalVars vars = make_variational_vars(tape, params, false);
    HyperSample hs = sample_hyperparams_on_tape(tape, vars.theta_mu,
                                                vars.theta_log_s, stream);
    RolloutVars ro = rollout_bridge_on_tape(tape, vars.rnn, hs.eta, obs, grid,
                                            BridgeMode::Learned, sigma2_y,
                                            stream);
    Eigen::MatrixXd path(grid.size(), params.rnn.state_dim());
    for (int k = 0; k < grid.size(); ++k)
      path.row(k) = tape.value(ro.states[static_cast<std::size_t>(k)])
                        .col(0)
                        .transpose();
    bundle.states.push_back(std::move(path));
  }
  bundle.validate();
  return bundle;
}

}  // namespace vbgp
