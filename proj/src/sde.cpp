#include "vbgp/sde.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

namespace vbgp {

namespace {

// log N(x; mean, cov) through a Cholesky factor of cov.
double gaussian_log_density(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("em_log_density: singular step covariance");
  const Eigen::VectorXd diff = x - mean;
  const Eigen::VectorXd w = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * x.size() * std::log(2.0 * std::numbers::pi) - log_det -
         0.5 * w.squaredNorm();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericalError("simulate_prior: covariance factorization failed");
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

EmStepParams em_step_density_params(const StateSpaceModel& ssm,
                                    const Eigen::VectorXd& state, double dt) {
  const double q = ssm.q;
  return em_step_density_params(
      [&](const Eigen::VectorXd& f) -> Eigen::VectorXd { return ssm.F * f; },
      [&](const Eigen::VectorXd&) -> Eigen::MatrixXd {
        return std::sqrt(q) * ssm.L;
      },
      state, dt);
}

PathBundle simulate_prior(const StateSpaceModel& ssm, const TimeGrid& grid,
                          int n, const Rng& rng) {
  ssm.validate();
  grid.validate();
  if (n < 1) throw InvalidArgument("simulate_prior: n must be >= 1");
  if (grid.size() < 2)
    throw InvalidArgument("simulate_prior: grid needs at least two points");

  const Eigen::MatrixXd init_sqrt = psd_sqrt(ssm.P_inf);
  const double noise_scale = std::sqrt(ssm.q);

  PathBundle bundle;
  bundle.grid = grid;
  bundle.states.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng stream = rng.split(static_cast<std::uint64_t>(i));
    Eigen::MatrixXd path(grid.size(), ssm.m);
    Eigen::VectorXd z(ssm.m);
    for (int d = 0; d < ssm.m; ++d) z[d] = stream.normal();
    Eigen::VectorXd state = init_sqrt * z;
    path.row(0) = state.transpose();
    for (int k = 0; k + 1 < grid.size(); ++k) {
      const double dt = grid.dt(k);
      const double eps = stream.normal();
      state += dt * (ssm.F * state) +
               (noise_scale * std::sqrt(dt) * eps) * ssm.L;
      path.row(k + 1) = state.transpose();
    }
    bundle.states.push_back(std::move(path));
  }
  bundle.validate();
  return bundle;
}

double em_log_density(const StateSpaceModel& ssm, const Eigen::MatrixXd& path,
                      const TimeGrid& grid) {
  ssm.validate();
  grid.validate();
  if (path.rows() != grid.size() || path.cols() != ssm.m)
    throw InvalidArgument("em_log_density: path dimensions do not match grid");

  double total = gaussian_log_density(path.row(0).transpose(),
                                      Eigen::VectorXd::Zero(ssm.m), ssm.P_inf);
  for (int k = 0; k + 1 < grid.size(); ++k) {
    const double dt = grid.dt(k);
    const Eigen::VectorXd state = path.row(k).transpose();
    EmStepParams step = em_step_density_params(ssm, state, dt);
    if (ssm.m > 1) {
      // Rank-one Euler-Maruyama covariance; substitute the exact Q.
      step.cov = discretize(ssm, dt).second;
    }
    total += gaussian_log_density(path.row(k + 1).transpose(), step.mean,
                                  step.cov);
  }
  return total;
}

}  // namespace vbgp
