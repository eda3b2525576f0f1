#include "vbgp/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vbgp/errors.hpp"

namespace vbgp {

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "exponential") return KernelKind::Exponential;
  if (name == "matern32") return KernelKind::Matern32;
  throw InvalidArgument("unknown kernel kind: " + name);
}

std::string to_string(KernelKind kind) {
  return kind == KernelKind::Exponential ? "exponential" : "matern32";
}

int state_dim(KernelKind kind) {
  return kind == KernelKind::Exponential ? 1 : 2;
}

void KernelHyperparams::validate() const {
  if (!(std::isfinite(lambda) && lambda > 0.0))
    throw InvalidArgument("lambda must be positive and finite");
  if (!(std::isfinite(sigma2_k) && sigma2_k > 0.0))
    throw InvalidArgument("sigma2_k must be positive and finite");
  if (!(std::isfinite(sigma2_y) && sigma2_y >= 0.0))
    throw InvalidArgument("sigma2_y must be non-negative and finite");
}

std::string KernelHyperparams::serialize() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "lambda=%.17g sigma2_k=%.17g sigma2_y=%.17g",
                lambda, sigma2_k, sigma2_y);
  return buf;
}

KernelHyperparams KernelHyperparams::parse(const std::string& text) {
  KernelHyperparams hp;
  std::istringstream is(text);
  std::string tok;
  int seen = 0;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("malformed hyperparameter token: " + tok);
    const std::string key = tok.substr(0, eq);
    const double value = std::stod(tok.substr(eq + 1));
    if (key == "lambda") {
      hp.lambda = value;
    } else if (key == "sigma2_k") {
      hp.sigma2_k = value;
    } else if (key == "sigma2_y") {
      hp.sigma2_y = value;
    } else {
      throw InvalidArgument("unknown hyperparameter key: " + key);
    }
    ++seen;
  }
  if (seen != 3) throw InvalidArgument("expected 3 hyperparameter tokens");
  hp.validate();
  return hp;
}

double kernel_eval(KernelKind kind, const KernelHyperparams& hp, double t,
                   double tp) {
  hp.validate();
  if (!(std::isfinite(t) && std::isfinite(tp)))
    throw InvalidArgument("kernel_eval: non-finite input time");
  const double r = std::abs(t - tp);
  switch (kind) {
    case KernelKind::Exponential:
      return hp.sigma2_k * std::exp(-hp.lambda * r);
    case KernelKind::Matern32: {
      // Inverse length-scale convention: rate = sqrt(3) * lambda.
      const double s = std::sqrt(3.0) * hp.lambda * r;
      return hp.sigma2_k * (1.0 + s) * std::exp(-s);
    }
  }
  throw InvalidArgument("kernel_eval: unknown kernel kind");
}

Eigen::MatrixXd gram_matrix(KernelKind kind, const KernelHyperparams& hp,
                            const Eigen::VectorXd& times_a,
                            const Eigen::VectorXd& times_b) {
  hp.validate();
  Eigen::MatrixXd k(times_a.size(), times_b.size());
  for (Eigen::Index i = 0; i < times_a.size(); ++i)
    for (Eigen::Index j = 0; j < times_b.size(); ++j)
      k(i, j) = kernel_eval(kind, hp, times_a[i], times_b[j]);
  return k;
}

}  // namespace vbgp
