#include "vbgp/rnn.hpp"

#include <cmath>

#include "vbgp/errors.hpp"

namespace vbgp {

int bridge_input_dim(int state_dim) { return state_dim + 7; }

long bridge_param_count(int hidden_size, int state_dim) {
  const long h = hidden_size;
  const long in = bridge_input_dim(state_dim);
  const long m = state_dim;
  return 3 * (h * in + h * h + h) + 2 * (m * h + m) + 8 * m;
}

long BridgeRnnParams::param_count() const {
  return Wz.size() + Uz.size() + bz.size() + Wr.size() + Ur.size() +
         br.size() + Wh.size() + Uh.size() + bh.size() + Wg.size() +
         bg.size() + Ag.size() + Ab.size() + Aw.size() + Wc.size() +
         bc.size() + Ac.size() + Ap.size() + mu0.size() + rho0.size() +
         As.size();
}

void BridgeRnnParams::validate() const {
  const int h = hidden_size();
  const int in = input_dim();
  const int m = state_dim();
  if (h < 1 || m < 1) throw InvalidArgument("bridge: empty weight matrices");
  if (in != bridge_input_dim(m))
    throw InvalidArgument("bridge: input width does not match state dim");
  auto want = [](const Eigen::MatrixXd& w, int r, int c, const char* name) {
    if (w.rows() != r || w.cols() != c)
      throw InvalidArgument(std::string("bridge: bad shape for ") + name);
    if (!w.allFinite())
      throw InvalidArgument(std::string("bridge: non-finite weights in ") +
                            name);
  };
  want(Wz, h, in, "Wz");
  want(Uz, h, h, "Uz");
  want(bz, h, 1, "bz");
  want(Wr, h, in, "Wr");
  want(Ur, h, h, "Ur");
  want(br, h, 1, "br");
  want(Wh, h, in, "Wh");
  want(Uh, h, h, "Uh");
  want(bh, h, 1, "bh");
  want(Wg, m, h, "Wg");
  want(bg, m, 1, "bg");
  want(Ag, m, 1, "Ag");
  want(Ab, m, 1, "Ab");
  want(Aw, m, 1, "Aw");
  want(Wc, m, h, "Wc");
  want(bc, m, 1, "bc");
  want(Ac, m, 1, "Ac");
  want(Ap, m, 1, "Ap");
  want(mu0, m, 1, "mu0");
  want(rho0, m, 1, "rho0");
  want(As, m, 1, "As");
  if (param_count() != bridge_param_count(h, m))
    throw InvalidArgument("bridge: parameter count mismatch");
}

namespace {

Eigen::MatrixXd uniform_init(int rows, int cols, double scale, Rng& rng) {
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      w(i, j) = scale * (2.0 * rng.uniform() - 1.0);
  return w;
}

}  // namespace

BridgeRnnParams init_bridge_params(int hidden_size, int state_dim, Rng& rng) {
  if (hidden_size < 1) throw InvalidArgument("bridge: hidden_size must be >= 1");
  if (state_dim < 1) throw InvalidArgument("bridge: state_dim must be >= 1");
  const int in = bridge_input_dim(state_dim);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(in));
  const double u_scale = 1.0 / std::sqrt(static_cast<double>(hidden_size));

  BridgeRnnParams p;
  p.Wz = uniform_init(hidden_size, in, w_scale, rng);
  p.Uz = uniform_init(hidden_size, hidden_size, u_scale, rng);
  p.bz = Eigen::MatrixXd::Zero(hidden_size, 1);
  p.Wr = uniform_init(hidden_size, in, w_scale, rng);
  p.Ur = uniform_init(hidden_size, hidden_size, u_scale, rng);
  p.br = Eigen::MatrixXd::Zero(hidden_size, 1);
  p.Wh = uniform_init(hidden_size, in, w_scale, rng);
  p.Uh = uniform_init(hidden_size, hidden_size, u_scale, rng);
  p.bh = Eigen::MatrixXd::Zero(hidden_size, 1);
  p.Wg = Eigen::MatrixXd::Zero(state_dim, hidden_size);
  p.bg = Eigen::MatrixXd::Zero(state_dim, 1);
  p.Ag = Eigen::MatrixXd::Zero(state_dim, 1);
  p.Ab = Eigen::MatrixXd::Zero(state_dim, 1);
  p.Aw = Eigen::MatrixXd::Zero(state_dim, 1);
  p.Wc = Eigen::MatrixXd::Zero(state_dim, hidden_size);
  // Start the walk at the prior diffusion scale for median hyperparameters
  // (lambda = sigma2_k = 1 gives c = sqrt(2 lambda sigma2_k) = sqrt(2)).
  p.bc = Eigen::MatrixXd::Constant(
      state_dim, 1, std::log(std::expm1(std::sqrt(2.0) - kDiffusionFloor)));
  p.Ac = Eigen::MatrixXd::Zero(state_dim, 1);
  p.Ap = Eigen::MatrixXd::Zero(state_dim, 1);
  p.mu0 = Eigen::MatrixXd::Zero(state_dim, 1);
  p.rho0 = Eigen::MatrixXd::Zero(state_dim, 1);
  p.As = Eigen::MatrixXd::Zero(state_dim, 1);
  p.validate();
  return p;
}

BridgeRnnVars make_bridge_vars(ad::Tape& tape, const BridgeRnnParams& params,
                               bool requires_grad) {
  params.validate();
  auto leaf = [&](const Eigen::MatrixXd& w) {
    return tape.leaf(w, requires_grad);
  };
  return BridgeRnnVars{leaf(params.Wz),  leaf(params.Uz),  leaf(params.bz),
                       leaf(params.Wr),  leaf(params.Ur),  leaf(params.br),
                       leaf(params.Wh),  leaf(params.Uh),  leaf(params.bh),
                       leaf(params.Wg),  leaf(params.bg),  leaf(params.Ag),
                       leaf(params.Ab),  leaf(params.Aw),  leaf(params.Wc),
                       leaf(params.bc),  leaf(params.Ac),  leaf(params.Ap),
                       leaf(params.mu0), leaf(params.rho0), leaf(params.As)};
}

ad::Var gru_cell(const BridgeRnnVars& v, ad::Var x, ad::Var h) {
  ad::Var z = ad::sigmoid(ad::matmul(v.Wz, x) + ad::matmul(v.Uz, h) + v.bz);
  ad::Var r = ad::sigmoid(ad::matmul(v.Wr, x) + ad::matmul(v.Ur, h) + v.br);
  ad::Var cand =
      ad::tanh(ad::matmul(v.Wh, x) + ad::matmul(v.Uh, r * h) + v.bh);
  return (1.0 - z) * h + z * cand;
}

ad::Var drift_head(const BridgeRnnVars& v, ad::Var h, ad::Var f, ad::Var lam,
                   ad::Var pull, ad::Var log_c) {
  return (ad::matmul(v.Wg, h) + v.bg) * ad::exp(v.Aw * log_c) -
         v.Ag * (lam * f) + v.Ab * pull;
}

ad::Var diffusion_head(const BridgeRnnVars& v, ad::Var h,
                       ad::Var half_log_theta, ad::Var log_damp) {
  ad::Var base = ad::softplus(ad::matmul(v.Wc, h) + v.bc);
  return base * ad::exp(v.Ac * half_log_theta + v.Ap * log_damp) +
         kDiffusionFloor;
}

}  // namespace vbgp
