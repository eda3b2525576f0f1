#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vbgp/time_grid.hpp"

namespace vbgp {

// A set of latent-state trajectories on a shared time grid. states[i] is the
// (grid.size() x m) trajectory of path i.
struct PathBundle {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> states;

  int n_paths() const { return static_cast<int>(states.size()); }
  int m() const { return states.empty() ? 0 : static_cast<int>(states[0].cols()); }

  // First state component per path, rows = paths, cols = grid points.
  Eigen::MatrixXd projected() const;

  void validate() const;
};

}  // namespace vbgp
