#pragma once

#include <Eigen/Dense>

namespace vbgp {

// Noisy point observations (tau_j, y_j) at strictly increasing times.
struct Observations {
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  int size() const { return static_cast<int>(times.size()); }
  void validate() const;

  static Observations empty() { return {Eigen::VectorXd(), Eigen::VectorXd()}; }
};

}  // namespace vbgp
