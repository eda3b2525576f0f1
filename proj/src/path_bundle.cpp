#include "vbgp/path_bundle.hpp"

#include "vbgp/errors.hpp"

namespace vbgp {

Eigen::MatrixXd PathBundle::projected() const {
  Eigen::MatrixXd out(n_paths(), grid.size());
  for (int i = 0; i < n_paths(); ++i) out.row(i) = states[i].col(0).transpose();
  return out;
}

void PathBundle::validate() const {
  grid.validate();
  for (const auto& s : states) {
    if (s.rows() != grid.size())
      throw InvalidArgument("path bundle: state length does not match grid");
    if (!states.empty() && s.cols() != states[0].cols())
      throw InvalidArgument("path bundle: inconsistent state dimension");
    if (!s.allFinite())
      throw InvalidArgument("path bundle: non-finite state entry");
  }
}

}  // namespace vbgp
