#pragma once

#include <Eigen/Dense>
#include <string>

namespace vbgp {

// Stationary kernel families with a known state-space realization.
// Exponential is Matern nu = 1/2 (state dimension 1), Matern32 is nu = 3/2
// (state dimension 2).
enum class KernelKind { Exponential, Matern32 };

KernelKind kernel_kind_from_string(const std::string& name);
std::string to_string(KernelKind kind);

// State dimension of the companion-form SDE realizing the kernel.
int state_dim(KernelKind kind);

// Positive kernel parameters plus the fixed, known observation noise.
// `lambda` is an inverse length-scale for both families.
struct KernelHyperparams {
  double lambda = 1.0;
  double sigma2_k = 1.0;
  double sigma2_y = 0.0;

  void validate() const;

  std::string serialize() const;
  static KernelHyperparams parse(const std::string& text);

  bool operator==(const KernelHyperparams&) const = default;
};

// k(t, t'); symmetric and stationary, bounded by sigma2_k.
double kernel_eval(KernelKind kind, const KernelHyperparams& hp, double t,
                   double tp);

// Entry (i, j) = k(times_a[i], times_b[j]).
Eigen::MatrixXd gram_matrix(KernelKind kind, const KernelHyperparams& hp,
                            const Eigen::VectorXd& times_a,
                            const Eigen::VectorXd& times_b);

}  // namespace vbgp
