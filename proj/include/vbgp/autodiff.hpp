#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <vector>

#include "vbgp/errors.hpp"

namespace vbgp::ad {

class Tape;

// Handle to a tape node. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape over dense matrices (vectors are n x 1).
// Nodes are appended in topological order; backward() walks them once in
// reverse, so gradient accumulation order is fixed and deterministic.
// Elementwise binary primitives broadcast a 1x1 operand against any shape;
// all other shape combinations are rejected.
//
// A tape is single-threaded while being built. Independent tapes on
// independent threads are fine.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(const Eigen::MatrixXd& value, bool requires_grad = true);
  Var constant(const Eigen::MatrixXd& value);
  Var constant(double scalar);

  const Eigen::MatrixXd& value(Var v) const;
  double scalar_value(Var v) const;

  // Runs reverse-mode accumulation from a scalar loss. Adjoints from any
  // previous backward() call are discarded first.
  void backward(Var loss);

  // Adjoint of v after backward(); zeros when the node was never reached.
  Eigen::MatrixXd grad(Var v) const;

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // --- plumbing used by the primitive implementations ---
  using BackwardFn = std::function<void(Tape&, int self)>;
  Var record(Eigen::MatrixXd value, bool requires_grad, BackwardFn backward_fn);
  void accumulate(int id, const Eigen::MatrixXd& grad);
  void accumulate_rows(int id, int row_start, const Eigen::MatrixXd& grad);
  const Eigen::MatrixXd& adjoint(int id) const;
  bool needs_grad(Var v) const;

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd adjoint;  // empty until first accumulation
    bool requires_grad = false;
    BackwardFn backward_fn;
  };
  // deque keeps references from value() stable while recording appends.
  std::deque<Node> nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);  // elementwise
Var operator/(Var a, Var b);  // elementwise
Var operator-(Var a);

Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(Var a, double s);
Var operator-(double s, Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator/(Var a, double s);

Var matmul(Var a, Var b);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);  // log(1 + e^x) with the large-x stable branch
Var square(Var a);
Var sum(Var a);   // 1x1
Var mean(Var a);  // 1x1
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, int start, int rows);

// Sum over elements of -1/2 log(2 pi var) - (x - mean)^2 / (2 var).
// Differentiable in all three arguments; var must be positive elementwise.
Var gaussian_log_pdf(Var x, Var mean, Var var);

}  // namespace vbgp::ad
