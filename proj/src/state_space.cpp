#include "vbgp/state_space.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "vbgp/errors.hpp"

namespace vbgp {

void StateSpaceModel::validate() const {
  if (m < 1 || m > 2)
    throw UnsupportedOperation("state-space model: only m <= 2 is supported");
  if (F.rows() != m || F.cols() != m || L.rows() != m || L.cols() != 1 ||
      H.cols() != m || P_inf.rows() != m || P_inf.cols() != m)
    throw InvalidArgument("state-space model: dimension mismatch");
  if (!(q > 0.0) || !std::isfinite(q))
    throw InvalidArgument("state-space model: q must be positive");
  if (H(0) != 1.0 || (m > 1 && H.rightCols(m - 1).cwiseAbs().maxCoeff() != 0.0))
    throw InvalidArgument("state-space model: H must be [1 0 ... 0]");
  const Eigen::MatrixXd lyap =
      F * P_inf + P_inf * F.transpose() + q * (L * L.transpose());
  if (lyap.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, P_inf.norm()))
    throw NumericalError("state-space model: Lyapunov relation violated");
}

StateSpaceModel build_ssm(KernelKind kind, const KernelHyperparams& hp) {
  hp.validate();
  StateSpaceModel ssm;
  switch (kind) {
    case KernelKind::Exponential: {
      ssm.m = 1;
      ssm.F = Eigen::MatrixXd::Constant(1, 1, -hp.lambda);
      ssm.L = Eigen::MatrixXd::Ones(1, 1);
      ssm.q = 2.0 * hp.sigma2_k * hp.lambda;
      ssm.H = Eigen::RowVectorXd::Ones(1);
      ssm.P_inf = Eigen::MatrixXd::Constant(1, 1, hp.sigma2_k);
      break;
    }
    case KernelKind::Matern32: {
      // rate = sqrt(3) * lambda with lambda the inverse length-scale.
      const double rate = std::sqrt(3.0) * hp.lambda;
      ssm.m = 2;
      ssm.F.resize(2, 2);
      ssm.F << 0.0, 1.0, -rate * rate, -2.0 * rate;
      ssm.L.resize(2, 1);
      ssm.L << 0.0, 1.0;
      ssm.q = 4.0 * hp.sigma2_k * rate * rate * rate;
      ssm.H.resize(2);
      ssm.H << 1.0, 0.0;
      ssm.P_inf.resize(2, 2);
      ssm.P_inf << hp.sigma2_k, 0.0, 0.0, hp.sigma2_k * rate * rate;
      break;
    }
  }
  ssm.validate();
  return ssm;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(
    const StateSpaceModel& ssm, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw InvalidArgument("discretize: dt must be positive");
  const Eigen::MatrixXd a = (ssm.F * dt).exp();
  Eigen::MatrixXd q = ssm.P_inf - a * ssm.P_inf * a.transpose();
  q = 0.5 * (q + q.transpose()).eval();
  return {a, q};
}

}  // namespace vbgp
