#include "vbgp/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "vbgp/autodiff.hpp"
#include "vbgp/errors.hpp"

namespace vbgp {

namespace {

// Canonical block order. gather_grads below must visit the leaves in the
// same order.
template <typename Params, typename F>
void for_each_param(Params& p, F&& f) {
  f("Wz", p.rnn.Wz);
  f("Uz", p.rnn.Uz);
  f("bz", p.rnn.bz);
  f("Wr", p.rnn.Wr);
  f("Ur", p.rnn.Ur);
  f("br", p.rnn.br);
  f("Wh", p.rnn.Wh);
  f("Uh", p.rnn.Uh);
  f("bh", p.rnn.bh);
  f("Wg", p.rnn.Wg);
  f("bg", p.rnn.bg);
  f("Ag", p.rnn.Ag);
  f("Ab", p.rnn.Ab);
  f("Aw", p.rnn.Aw);
  f("Wc", p.rnn.Wc);
  f("bc", p.rnn.bc);
  f("Ac", p.rnn.Ac);
  f("Ap", p.rnn.Ap);
  f("mu0", p.rnn.mu0);
  f("rho0", p.rnn.rho0);
  f("As", p.rnn.As);
  f("theta_mu", p.theta_dist.mu);
  f("theta_log_s", p.theta_dist.log_s);
}

long total_param_size(const VariationalParams& p) {
  long total = 0;
  for_each_param(p, [&](const char*, const auto& w) { total += w.size(); });
  return total;
}

Eigen::VectorXd gather_grads(const ad::Tape& tape, const VariationalVars& v,
                             long total) {
  Eigen::VectorXd g(total);
  long at = 0;
  auto take = [&](ad::Var var) {
    Eigen::MatrixXd gr = tape.grad(var);
    g.segment(at, gr.size()) =
        Eigen::Map<const Eigen::VectorXd>(gr.data(), gr.size());
    at += gr.size();
  };
  take(v.rnn.Wz);
  take(v.rnn.Uz);
  take(v.rnn.bz);
  take(v.rnn.Wr);
  take(v.rnn.Ur);
  take(v.rnn.br);
  take(v.rnn.Wh);
  take(v.rnn.Uh);
  take(v.rnn.bh);
  take(v.rnn.Wg);
  take(v.rnn.bg);
  take(v.rnn.Ag);
  take(v.rnn.Ab);
  take(v.rnn.Aw);
  take(v.rnn.Wc);
  take(v.rnn.bc);
  take(v.rnn.Ac);
  take(v.rnn.Ap);
  take(v.rnn.mu0);
  take(v.rnn.rho0);
  take(v.rnn.As);
  take(v.theta_mu);
  take(v.theta_log_s);
  return g;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Eigen::VectorXd flatten_params(const VariationalParams& params) {
  Eigen::VectorXd x(total_param_size(params));
  long at = 0;
  for_each_param(params, [&](const char*, const auto& w) {
    x.segment(at, w.size()) =
        Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    at += w.size();
  });
  return x;
}

void unflatten_params(const Eigen::VectorXd& x, VariationalParams& params) {
  if (x.size() != total_param_size(params))
    throw InvalidArgument("unflatten: flat vector size mismatch");
  long at = 0;
  for_each_param(params, [&](const char*, auto& w) {
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) =
        x.segment(at, w.size());
    at += w.size();
  });
}

TrainState init_train_state(int hidden_size, Rng rng) {
  TrainState st;
  st.params.rnn = init_bridge_params(hidden_size, 1, rng);
  st.params.theta_dist.mu = Eigen::VectorXd::Zero(2);
  st.params.theta_dist.log_s = Eigen::VectorXd::Constant(2, std::log(0.1));
  const long n = total_param_size(st.params);
  st.adam_m = Eigen::VectorXd::Zero(n);
  st.adam_v = Eigen::VectorXd::Zero(n);
  st.adam_t = 0;
  st.epoch = 0;
  st.rng_state = rng.save_state();
  return st;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  state.params.validate();
  std::ostringstream out;
  out << "vbgp-checkpoint v1\n";
  out << "epoch " << state.epoch << "\n";
  out << "adam_t " << state.adam_t << "\n";
  out << "rng " << state.rng_state << "\n";
  auto write_line = [&](const double* data, long n) {
    for (long i = 0; i < n; ++i) {
      if (i) out << ' ';
      out << format_value(data[i]);
    }
    out << '\n';
  };
  for_each_param(state.params, [&](const char* name, const auto& w) {
    out << "param " << name << ' ' << w.rows() << ' ' << w.cols() << '\n';
    write_line(w.data(), w.size());
  });
  out << "adam_m " << state.adam_m.size() << '\n';
  write_line(state.adam_m.data(), state.adam_m.size());
  out << "adam_v " << state.adam_v.size() << '\n';
  write_line(state.adam_v.data(), state.adam_v.size());

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint for writing: " + path);
  file << out.str();
  if (!file) throw IoError("failed writing checkpoint: " + path);
}

namespace {

std::vector<double> parse_value_line(const std::string& line, long expect,
                                     const std::string& path) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(expect));
  const char* s = line.c_str();
  char* end = nullptr;
  while (*s) {
    const double v = std::strtod(s, &end);
    if (end == s) break;
    values.push_back(v);
    s = end;
  }
  if (static_cast<long>(values.size()) != expect)
    throw IoError("checkpoint " + path + ": expected " +
                  std::to_string(expect) + " values, found " +
                  std::to_string(values.size()));
  return values;
}

}  // namespace

TrainState load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(file, line))
      throw IoError("checkpoint " + path + ": truncated before " + what);
    return line;
  };
  if (next_line("header") != "vbgp-checkpoint v1")
    throw IoError("checkpoint " + path + ": unrecognized header");

  TrainState st;
  {
    std::istringstream ls(next_line("epoch"));
    std::string key;
    if (!(ls >> key >> st.epoch) || key != "epoch")
      throw IoError("checkpoint " + path + ": bad epoch line");
  }
  {
    std::istringstream ls(next_line("adam_t"));
    std::string key;
    if (!(ls >> key >> st.adam_t) || key != "adam_t")
      throw IoError("checkpoint " + path + ": bad adam_t line");
  }
  {
    next_line("rng");
    if (line.rfind("rng ", 0) != 0)
      throw IoError("checkpoint " + path + ": bad rng line");
    st.rng_state = line.substr(4);
  }

  std::map<std::string, Eigen::MatrixXd> blocks;
  Eigen::VectorXd adam_m, adam_v;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "param") {
      std::string name;
      long rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols) || rows < 1 || cols < 1)
        throw IoError("checkpoint " + path + ": bad param header");
      const auto values =
          parse_value_line(next_line(name.c_str()), rows * cols, path);
      Eigen::MatrixXd w(rows, cols);
      std::copy(values.begin(), values.end(), w.data());
      blocks[name] = std::move(w);
    } else if (kind == "adam_m" || kind == "adam_v") {
      long n = 0;
      if (!(ls >> n) || n < 0)
        throw IoError("checkpoint " + path + ": bad moment header");
      const auto values = parse_value_line(next_line(kind.c_str()), n, path);
      Eigen::VectorXd v =
          Eigen::Map<const Eigen::VectorXd>(values.data(), n);
      (kind == "adam_m" ? adam_m : adam_v) = std::move(v);
    } else {
      throw IoError("checkpoint " + path + ": unknown section '" + kind +
                    "'");
    }
  }

  auto take = [&](const char* name) {
    auto it = blocks.find(name);
    if (it == blocks.end())
      throw IoError("checkpoint " + path + ": missing block " +
                    std::string(name));
    return it->second;
  };
  st.params.rnn.Wz = take("Wz");
  st.params.rnn.Uz = take("Uz");
  st.params.rnn.bz = take("bz");
  st.params.rnn.Wr = take("Wr");
  st.params.rnn.Ur = take("Ur");
  st.params.rnn.br = take("br");
  st.params.rnn.Wh = take("Wh");
  st.params.rnn.Uh = take("Uh");
  st.params.rnn.bh = take("bh");
  st.params.rnn.Wg = take("Wg");
  st.params.rnn.bg = take("bg");
  st.params.rnn.Ag = take("Ag");
  st.params.rnn.Ab = take("Ab");
  st.params.rnn.Aw = take("Aw");
  st.params.rnn.Wc = take("Wc");
  st.params.rnn.bc = take("bc");
  st.params.rnn.Ac = take("Ac");
  st.params.rnn.Ap = take("Ap");
  st.params.rnn.mu0 = take("mu0");
  st.params.rnn.rho0 = take("rho0");
  st.params.rnn.As = take("As");
  st.params.theta_dist.mu = Eigen::VectorXd(take("theta_mu"));
  st.params.theta_dist.log_s = Eigen::VectorXd(take("theta_log_s"));
  st.adam_m = std::move(adam_m);
  st.adam_v = std::move(adam_v);
  try {
    st.params.validate();
  } catch (const Error& e) {
    throw IoError("checkpoint " + path + ": invalid parameters: " + e.what());
  }
  if (st.adam_m.size() != total_param_size(st.params) ||
      st.adam_v.size() != st.adam_m.size())
    throw IoError("checkpoint " + path + ": moment size mismatch");
  if (st.rng_state.empty())
    throw IoError("checkpoint " + path + ": missing rng state");
  return st;
}

TrainResult train(TrainState state, const Observations& obs,
                  const TimeGrid& grid, const TrainOptions& opts) {
  if (opts.epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (!(opts.adam.learning_rate >= 0.0))
    throw InvalidArgument("train: learning_rate must be >= 0");
  if (!(opts.adam.clip_norm > 0.0))
    throw InvalidArgument("train: clip_norm must be > 0");
  if (opts.checkpoint_every < 0)
    throw InvalidArgument("train: checkpoint_every must be >= 0");
  state.params.validate();

  Rng rng = Rng::restore_state(state.rng_state);
  const long n_params = total_param_size(state.params);
  if (state.adam_m.size() != n_params || state.adam_v.size() != n_params)
    throw InvalidArgument("train: optimizer moment size mismatch");

  Eigen::VectorXd x = flatten_params(state.params);
  TrainState last_stable = state;
  int consecutive_bad = 0;
  TrainResult result;

  for (int epoch = state.epoch; epoch < opts.epochs; ++epoch) {
    double value = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd g;
    bool ok = false;
    {
      ad::Tape tape;
      VariationalVars vars = make_variational_vars(tape, state.params, true);
      try {
        ElboVars ev = build_elbo(tape, vars, obs, grid, opts.elbo, rng);
        value = ev.estimate.value;
        if (std::isfinite(value)) {
          tape.backward(-ev.value);
          g = gather_grads(tape, vars, n_params);
          ok = g.allFinite();
        }
      } catch (const NumericalError&) {
        // counts toward the divergence limit below
      }
    }

    if (ok) {
      consecutive_bad = 0;
      const double norm = g.norm();
      if (norm > opts.adam.clip_norm) g *= opts.adam.clip_norm / norm;
      double lr = opts.adam.learning_rate;
      if (opts.adam.lr_final >= 0.0 && opts.epochs > 1) {
        const double frac =
            static_cast<double>(epoch) / static_cast<double>(opts.epochs - 1);
        lr += frac * (opts.adam.lr_final - opts.adam.learning_rate);
      }
      state.adam_t += 1;
      state.adam_m = opts.adam.beta1 * state.adam_m +
                     (1.0 - opts.adam.beta1) * g;
      state.adam_v = opts.adam.beta2 * state.adam_v +
                     (1.0 - opts.adam.beta2) * g.cwiseProduct(g);
      const double bc1 =
          1.0 - std::pow(opts.adam.beta1, static_cast<double>(state.adam_t));
      const double bc2 =
          1.0 - std::pow(opts.adam.beta2, static_cast<double>(state.adam_t));
      const Eigen::VectorXd m_hat = state.adam_m / bc1;
      const Eigen::VectorXd v_hat = state.adam_v / bc2;
      x -= lr * m_hat.cwiseQuotient(
                    v_hat.cwiseSqrt() +
                    Eigen::VectorXd::Constant(n_params, opts.adam.eps));
      unflatten_params(x, state.params);
    } else {
      ++consecutive_bad;
      if (consecutive_bad >= 3) {
        const std::string path =
            (opts.checkpoint_dir.empty() ? std::string("diverged.ckpt")
                                         : opts.checkpoint_dir +
                                               "/diverged.ckpt");
        save_checkpoint(path, last_stable);
        throw TrainingDiverged(
            "training diverged: non-finite loss for 3 consecutive epochs "
            "(last stable state written to " +
                path + ")",
            path);
      }
    }

    state.epoch = epoch + 1;
    result.elbo_trace.push_back(value);

    if (ok) {
      last_stable = state;
      last_stable.rng_state = rng.save_state();
    }
    const bool milestone =
        std::find(opts.milestone_epochs.begin(), opts.milestone_epochs.end(),
                  state.epoch) != opts.milestone_epochs.end();
    const bool periodic = opts.checkpoint_every > 0 &&
                          state.epoch % opts.checkpoint_every == 0;
    if (!opts.checkpoint_dir.empty() && (milestone || periodic)) {
      state.rng_state = rng.save_state();
      save_checkpoint(opts.checkpoint_dir + "/checkpoint_" +
                          std::to_string(state.epoch) + ".ckpt",
                      state);
    }
  }

  state.rng_state = rng.save_state();
  result.state = std::move(state);
  return result;
}

}  // namespace vbgp
