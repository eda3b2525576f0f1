#include "vbgp/kalman.hpp"

#include <cmath>
#include <numbers>

#include "vbgp/errors.hpp"

namespace vbgp {

namespace {

void symmetrize(Eigen::MatrixXd& p) {
  p = 0.5 * (p + p.transpose()).eval();
  // Tiny negative diagonals from round-off are clamped to zero.
  p.diagonal() = p.diagonal().cwiseMax(0.0);
}

// Grid index of each observation time, matched within 1e-9.
std::vector<int> locate_observations(const Observations& obs,
                                     const Eigen::VectorXd& grid) {
  std::vector<int> at(static_cast<std::size_t>(grid.size()), -1);
  for (int j = 0; j < obs.size(); ++j) {
    const double t = obs.times[j];
    int lo = 0, hi = static_cast<int>(grid.size()) - 1, best = 0;
    while (lo <= hi) {
      const int mid = (lo + hi) / 2;
      if (grid[mid] < t) {
        best = mid;
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    int k = best;
    if (best + 1 < grid.size() &&
        std::abs(grid[best + 1] - t) < std::abs(grid[best] - t))
      k = best + 1;
    if (std::abs(grid[k] - t) > 1e-9)
      throw InvalidArgument("kalman_smooth: observation time missing from grid");
    at[static_cast<std::size_t>(k)] = j;
  }
  return at;
}

}  // namespace

Eigen::VectorXd KalmanResult::projected_mean() const {
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    out[k] = smoothed_means[static_cast<std::size_t>(k)][0];
  return out;
}

Eigen::VectorXd KalmanResult::projected_variance() const {
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    out[k] = smoothed_covs[static_cast<std::size_t>(k)](0, 0);
  return out;
}

KalmanResult kalman_smooth(const StateSpaceModel& ssm, const Observations& obs,
                           const Eigen::VectorXd& grid, double sigma2_y) {
  ssm.validate();
  obs.validate();
  if (grid.size() < 1) throw InvalidArgument("kalman_smooth: empty grid");
  for (Eigen::Index k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw InvalidArgument("kalman_smooth: grid must be strictly increasing");
  if (sigma2_y < 0.0)
    throw InvalidArgument("kalman_smooth: sigma2_y must be non-negative");

  const auto obs_at = locate_observations(obs, grid);
  const int n = static_cast<int>(grid.size());
  const int m = ssm.m;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);

  KalmanResult res;
  res.grid = grid;
  res.filtered_means.resize(static_cast<std::size_t>(n));
  res.filtered_covs.resize(static_cast<std::size_t>(n));
  res.smoothed_means.resize(static_cast<std::size_t>(n));
  res.smoothed_covs.resize(static_cast<std::size_t>(n));

  // Per-step transition and one-step-ahead prediction, kept for the
  // backward pass.
  std::vector<Eigen::MatrixXd> trans(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> pred_means(static_cast<std::size_t>(n));
  std::vector<Eigen::MatrixXd> pred_covs(static_cast<std::size_t>(n));

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd cov = ssm.P_inf;
  double loglik = 0.0;

  for (int k = 0; k < n; ++k) {
    if (k > 0) {
      auto [a, q] = discretize(ssm, grid[k] - grid[k - 1]);
      mean = a * mean;
      cov = a * cov * a.transpose() + q;
      symmetrize(cov);
      trans[static_cast<std::size_t>(k)] = std::move(a);
    }
    pred_means[static_cast<std::size_t>(k)] = mean;
    pred_covs[static_cast<std::size_t>(k)] = cov;

    const int j = obs_at[static_cast<std::size_t>(k)];
    if (j >= 0) {
      const double innovation = obs.values[j] - ssm.H.dot(mean);
      const double s = (ssm.H * cov * ssm.H.transpose())(0) + sigma2_y;
      if (!(s > 0.0) || !std::isfinite(s))
        throw NumericalError("kalman_smooth: non-positive innovation variance");
      const Eigen::VectorXd gain = cov * ssm.H.transpose() / s;
      mean += gain * innovation;
      // Joseph form keeps the update PSD.
      const Eigen::MatrixXd j_form = eye - gain * ssm.H;
      cov = j_form * cov * j_form.transpose() +
            sigma2_y * (gain * gain.transpose());
      symmetrize(cov);
      loglik += -0.5 * (std::log(2.0 * std::numbers::pi * s) +
                        innovation * innovation / s);
    }
    res.filtered_means[static_cast<std::size_t>(k)] = mean;
    res.filtered_covs[static_cast<std::size_t>(k)] = cov;
  }

  // Backward RTS pass.
  res.smoothed_means[static_cast<std::size_t>(n - 1)] = mean;
  res.smoothed_covs[static_cast<std::size_t>(n - 1)] = cov;
  for (int k = n - 2; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    const auto kn = static_cast<std::size_t>(k + 1);
    const Eigen::MatrixXd& a_next = trans[kn];
    const Eigen::MatrixXd& p_pred = pred_covs[kn];
    // G = P_f A' P_pred^-1 via a factorization of P_pred.
    const Eigen::MatrixXd gain =
        p_pred.ldlt()
            .solve(a_next * res.filtered_covs[ku])
            .transpose();
    res.smoothed_means[ku] =
        res.filtered_means[ku] +
        gain * (res.smoothed_means[kn] - pred_means[kn]);
    Eigen::MatrixXd p = res.filtered_covs[ku] +
                        gain * (res.smoothed_covs[kn] - p_pred) *
                            gain.transpose();
    symmetrize(p);
    res.smoothed_covs[ku] = std::move(p);
  }
  res.log_likelihood = loglik;
  return res;
}

}  // namespace vbgp
