#include "vbgp/time_grid.hpp"

#include <algorithm>
#include <cmath>

#include "vbgp/errors.hpp"

namespace vbgp {

namespace {
constexpr double kMergeTol = 1e-12;
}

void Observations::validate() const {
  if (times.size() != values.size())
    throw InvalidArgument("observations: times and values differ in length");
  for (Eigen::Index j = 0; j < times.size(); ++j) {
    if (!std::isfinite(times[j]) || !std::isfinite(values[j]))
      throw InvalidArgument("observations: non-finite entry");
    if (j > 0 && !(times[j] > times[j - 1]))
      throw InvalidArgument("observations: times must be strictly increasing");
  }
}

void TimeGrid::validate() const {
  if (size() < 1) throw InvalidArgument("time grid needs at least one point");
  if (static_cast<int>(obs_at.size()) != size())
    throw InvalidArgument("time grid: obs_at length mismatch");
  for (int k = 1; k < size(); ++k)
    if (!(points[k] > points[k - 1]))
      throw InvalidArgument("time grid: points must be strictly increasing");
}

TimeGrid make_time_grid(double start, double end, int steps,
                        const Observations& obs) {
  if (!(std::isfinite(start) && std::isfinite(end) && end > start))
    throw InvalidArgument("time grid: span must be finite with end > start");
  if (steps < 1) throw InvalidArgument("time grid: steps must be >= 1");
  obs.validate();
  if (obs.size() > 0 &&
      (obs.times[0] < start - kMergeTol ||
       obs.times[obs.size() - 1] > end + kMergeTol))
    throw InvalidArgument("time grid: observation outside span");

  struct Point {
    double t;
    int obs;  // -1 for plain grid points
  };
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(steps + 1 + obs.size()));
  for (int k = 0; k <= steps; ++k)
    pts.push_back({start + (end - start) * k / steps, -1});
  for (int j = 0; j < obs.size(); ++j) pts.push_back({obs.times[j], j});

  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.obs < b.obs;
  });

  TimeGrid grid;
  std::vector<double> out_t;
  std::vector<int> out_obs;
  for (const Point& p : pts) {
    if (!out_t.empty() && p.t - out_t.back() <= kMergeTol) {
      if (p.obs >= 0) {
        // Observation wins the merge so its time is represented exactly.
        out_t.back() = p.t;
        out_obs.back() = p.obs;
      }
      continue;
    }
    out_t.push_back(p.t);
    out_obs.push_back(p.obs);
  }

  grid.points = Eigen::Map<Eigen::VectorXd>(out_t.data(),
                                            static_cast<Eigen::Index>(out_t.size()));
  grid.obs_at = std::move(out_obs);
  grid.validate();

  int seen = 0;
  for (int v : grid.obs_at)
    if (v >= 0) ++seen;
  if (seen != obs.size())
    throw InvalidArgument("time grid: merged grid lost an observation time");
  return grid;
}

TimeGrid grid_from_points(const Eigen::VectorXd& points) {
  TimeGrid grid;
  grid.points = points;
  grid.obs_at.assign(static_cast<std::size_t>(points.size()), -1);
  grid.validate();
  return grid;
}

}  // namespace vbgp
