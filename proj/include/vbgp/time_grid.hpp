#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vbgp/observations.hpp"

namespace vbgp {

// Strictly increasing simulation grid together with the positions of the
// observation times on it. obs_at[k] is the observation index at grid point
// k, or -1 when that point carries no observation.
struct TimeGrid {
  Eigen::VectorXd points;
  std::vector<int> obs_at;

  int size() const { return static_cast<int>(points.size()); }
  int steps() const { return size() - 1; }
  double dt(int k) const { return points[k + 1] - points[k]; }

  void validate() const;
};

// Union of a uniform grid over [start, end] (steps intervals) and the
// observation times, sorted and deduplicated with tolerance 1e-12. Merged
// points keep the observation coordinate so lookups stay exact.
TimeGrid make_time_grid(double start, double end, int steps,
                        const Observations& obs);

// Grid over existing points with no observations attached.
TimeGrid grid_from_points(const Eigen::VectorXd& points);

}  // namespace vbgp
