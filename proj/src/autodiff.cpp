#include "vbgp/autodiff.hpp"

#include <cmath>
#include <numbers>

namespace vbgp::ad {

namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
    throw InvalidArgument("autodiff: operands must live on the same tape");
}

bool is_scalar(const Eigen::MatrixXd& m) { return m.rows() == 1 && m.cols() == 1; }

// Shape of an elementwise result; rejects anything but equal shapes or a
// 1x1 operand.
std::pair<Eigen::Index, Eigen::Index> broadcast_shape(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols())
    return {a.rows(), a.cols()};
  if (is_scalar(a)) return {b.rows(), b.cols()};
  if (is_scalar(b)) return {a.rows(), a.cols()};
  throw InvalidArgument(std::string("autodiff: shape mismatch in ") + op);
}

// Operand expanded to the result shape (cheap copy for the scalar case).
Eigen::MatrixXd expanded(const Eigen::MatrixXd& m, Eigen::Index rows,
                         Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return Eigen::MatrixXd::Constant(rows, cols, m(0, 0));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

Var Tape::leaf(const Eigen::MatrixXd& value, bool requires_grad) {
  return record(value, requires_grad, nullptr);
}

Var Tape::constant(const Eigen::MatrixXd& value) {
  return record(value, false, nullptr);
}

Var Tape::constant(double scalar) {
  return record(Eigen::MatrixXd::Constant(1, 1, scalar), false, nullptr);
}

const Eigen::MatrixXd& Tape::value(Var v) const {
  if (!v.valid() || v.tape != this ||
      v.id >= static_cast<int>(nodes_.size()))
    throw InvalidArgument("autodiff: invalid node handle");
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

double Tape::scalar_value(Var v) const {
  const Eigen::MatrixXd& m = value(v);
  if (!is_scalar(m)) throw InvalidArgument("autodiff: node is not scalar");
  return m(0, 0);
}

Var Tape::record(Eigen::MatrixXd value, bool requires_grad,
                 BackwardFn backward_fn) {
#ifndef NDEBUG
  if (!value.allFinite())
    throw NumericalError("autodiff: non-finite value produced");
#endif
  nodes_.push_back(Node{std::move(value), Eigen::MatrixXd(), requires_grad,
                        std::move(backward_fn)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Eigen::MatrixXd& grad) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.requires_grad) return;
  if (node.adjoint.size() == 0)
    node.adjoint = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  if (grad.rows() == node.value.rows() && grad.cols() == node.value.cols()) {
    node.adjoint += grad;
  } else if (is_scalar(node.value)) {
    node.adjoint(0, 0) += grad.sum();  // reduce a broadcast
  } else {
    throw InvalidArgument("autodiff: gradient shape mismatch");
  }
}

void Tape::accumulate_rows(int id, int row_start, const Eigen::MatrixXd& grad) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.requires_grad) return;
  if (node.adjoint.size() == 0)
    node.adjoint = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  node.adjoint.middleRows(row_start, grad.rows()) += grad;
}

const Eigen::MatrixXd& Tape::adjoint(int id) const {
  return nodes_[static_cast<std::size_t>(id)].adjoint;
}

bool Tape::needs_grad(Var v) const {
  return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.tape != this)
    throw InvalidArgument("autodiff: backward on foreign node");
  if (!is_scalar(value(loss)))
    throw InvalidArgument("autodiff: backward requires a scalar loss");
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
  accumulate(loss.id, Eigen::MatrixXd::Ones(1, 1));
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward_fn && n.requires_grad && n.adjoint.size() != 0)
      n.backward_fn(*this, id);
  }
}

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.adjoint.size() == 0)
    return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// primitives

namespace {

Var binary_op(Var a, Var b, const char* name,
              Eigen::MatrixXd (*fwd)(const Eigen::MatrixXd&,
                                     const Eigen::MatrixXd&),
              void (*bwd)(Tape&, int a_id, int b_id, int self)) {
  check_same_tape(a, b);
  Tape& tape = *a.tape;
  const Eigen::MatrixXd& va = tape.value(a);
  const Eigen::MatrixXd& vb = tape.value(b);
  const auto [rows, cols] = broadcast_shape(va, vb, name);
  Eigen::MatrixXd out = fwd(expanded(va, rows, cols), expanded(vb, rows, cols));
  const bool needs = tape.needs_grad(a) || tape.needs_grad(b);
  const int a_id = a.id, b_id = b.id;
  return tape.record(std::move(out), needs,
                     [a_id, b_id, bwd](Tape& t, int self) {
                       bwd(t, a_id, b_id, self);
                     });
}

}  // namespace

Var operator+(Var a, Var b) {
  return binary_op(
      a, b, "add",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd(x + y);
      },
      [](Tape& t, int a_id, int b_id, int self) {
        const Eigen::MatrixXd& g = t.adjoint(self);
        t.accumulate(a_id, g);
        t.accumulate(b_id, g);
      });
}

Var operator-(Var a, Var b) {
  return binary_op(
      a, b, "sub",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd(x - y);
      },
      [](Tape& t, int a_id, int b_id, int self) {
        const Eigen::MatrixXd& g = t.adjoint(self);
        t.accumulate(a_id, g);
        t.accumulate(b_id, -g);
      });
}

Var operator*(Var a, Var b) {
  return binary_op(
      a, b, "mul",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd(x.cwiseProduct(y));
      },
      [](Tape& t, int a_id, int b_id, int self) {
        const Eigen::MatrixXd& g = t.adjoint(self);
        const Eigen::MatrixXd ea =
            expanded(t.value(Var{&t, a_id}), g.rows(), g.cols());
        const Eigen::MatrixXd eb =
            expanded(t.value(Var{&t, b_id}), g.rows(), g.cols());
        t.accumulate(a_id, g.cwiseProduct(eb));
        t.accumulate(b_id, g.cwiseProduct(ea));
      });
}

Var operator/(Var a, Var b) {
  return binary_op(
      a, b, "div",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd(x.cwiseQuotient(y));
      },
      [](Tape& t, int a_id, int b_id, int self) {
        const Eigen::MatrixXd& g = t.adjoint(self);
        const Eigen::MatrixXd ea =
            expanded(t.value(Var{&t, a_id}), g.rows(), g.cols());
        const Eigen::MatrixXd eb =
            expanded(t.value(Var{&t, b_id}), g.rows(), g.cols());
        t.accumulate(a_id, g.cwiseQuotient(eb));
        t.accumulate(b_id,
                     (-g.array() * ea.array() / eb.array().square()).matrix());
      });
}

Var operator-(Var a) { return a * -1.0; }

Var operator+(Var a, double s) { return a + a.tape->constant(s); }
Var operator+(double s, Var a) { return a + s; }
Var operator-(Var a, double s) { return a - a.tape->constant(s); }
Var operator-(double s, Var a) { return a.tape->constant(s) - a; }
Var operator*(Var a, double s) { return a * a.tape->constant(s); }
Var operator*(double s, Var a) { return a * s; }
Var operator/(Var a, double s) { return a / a.tape->constant(s); }

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& tape = *a.tape;
  const Eigen::MatrixXd& va = tape.value(a);
  const Eigen::MatrixXd& vb = tape.value(b);
  if (va.cols() != vb.rows())
    throw InvalidArgument("autodiff: inner dimensions mismatch in matmul");
  const bool needs = tape.needs_grad(a) || tape.needs_grad(b);
  const int a_id = a.id, b_id = b.id;
  return tape.record(va * vb, needs, [a_id, b_id](Tape& t, int self) {
    const Eigen::MatrixXd& g = t.adjoint(self);
    const Eigen::MatrixXd& va_ = t.value(Var{&t, a_id});
    const Eigen::MatrixXd& vb_ = t.value(Var{&t, b_id});
    t.accumulate(a_id, g * vb_.transpose());
    t.accumulate(b_id, va_.transpose() * g);
  });
}

namespace {

Var unary_op(Var a, Eigen::MatrixXd out,
             std::function<Eigen::MatrixXd(const Eigen::MatrixXd& value,
                                           const Eigen::MatrixXd& grad)>
                 local) {
  if (!a.valid()) throw InvalidArgument("autodiff: invalid operand");
  Tape& tape = *a.tape;
  const int a_id = a.id;
  return tape.record(
      std::move(out), tape.needs_grad(a),
      [a_id, local = std::move(local)](Tape& t, int self) {
        t.accumulate(a_id, local(t.value(Var{&t, a_id}), t.adjoint(self)));
      });
}

}  // namespace

Var exp(Var a) {
  Eigen::MatrixXd out = a.tape->value(a).array().exp().matrix();
  return unary_op(a, out,
                  [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
                    return Eigen::MatrixXd((g.array() * v.array().exp()).matrix());
                  });
}

Var log(Var a) {
  const Eigen::MatrixXd& v = a.tape->value(a);
  if ((v.array() <= 0.0).any())
    throw DomainError("autodiff: log of a non-positive value");
  return unary_op(a, v.array().log().matrix(),
                  [](const Eigen::MatrixXd& v_, const Eigen::MatrixXd& g) {
                    return Eigen::MatrixXd((g.array() / v_.array()).matrix());
                  });
}

Var tanh(Var a) {
  return unary_op(a, a.tape->value(a).array().tanh().matrix(),
                  [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
                    return Eigen::MatrixXd(
                        (g.array() * (1.0 - v.array().tanh().square())).matrix());
                  });
}

Var sigmoid(Var a) {
  const Eigen::MatrixXd& v = a.tape->value(a);
  Eigen::MatrixXd out = v.unaryExpr([](double x) { return stable_sigmoid(x); });
  return unary_op(a, std::move(out),
                  [](const Eigen::MatrixXd& v_, const Eigen::MatrixXd& g) {
                    Eigen::MatrixXd s = v_.unaryExpr(
                        [](double x) { return stable_sigmoid(x); });
                    return Eigen::MatrixXd((g.array() * s.array() *
                                            (1.0 - s.array())).matrix());
                  });
}

Var softplus(Var a) {
  const Eigen::MatrixXd& v = a.tape->value(a);
  Eigen::MatrixXd out =
      v.unaryExpr([](double x) { return stable_softplus(x); });
  return unary_op(a, std::move(out),
                  [](const Eigen::MatrixXd& v_, const Eigen::MatrixXd& g) {
                    Eigen::MatrixXd s = v_.unaryExpr(
                        [](double x) { return stable_sigmoid(x); });
                    return Eigen::MatrixXd((g.array() * s.array()).matrix());
                  });
}

Var square(Var a) {
  return unary_op(a, a.tape->value(a).array().square().matrix(),
                  [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
                    return Eigen::MatrixXd((2.0 * g.array() * v.array()).matrix());
                  });
}

Var sum(Var a) {
  return unary_op(a,
                  Eigen::MatrixXd::Constant(1, 1, a.tape->value(a).sum()),
                  [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
                    return Eigen::MatrixXd(
                        Eigen::MatrixXd::Constant(v.rows(), v.cols(), g(0, 0)));
                  });
}

Var mean(Var a) {
  return unary_op(a,
                  Eigen::MatrixXd::Constant(1, 1, a.tape->value(a).mean()),
                  [](const Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
                    const double s = g(0, 0) / static_cast<double>(v.size());
                    return Eigen::MatrixXd(
                        Eigen::MatrixXd::Constant(v.rows(), v.cols(), s));
                  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty())
    throw InvalidArgument("autodiff: concat of zero parts");
  Tape& tape = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = tape.value(parts[0]).cols();
  bool needs = false;
  for (const Var& p : parts) {
    check_same_tape(parts[0], p);
    if (tape.value(p).cols() != cols)
      throw InvalidArgument("autodiff: concat column mismatch");
    rows += tape.value(p).rows();
    needs = needs || tape.needs_grad(p);
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> sizes;
  ids.reserve(parts.size());
  sizes.reserve(parts.size());
  for (const Var& p : parts) {
    const Eigen::MatrixXd& v = tape.value(p);
    out.middleRows(at, v.rows()) = v;
    at += v.rows();
    ids.push_back(p.id);
    sizes.push_back(v.rows());
  }
  return tape.record(std::move(out), needs,
                     [ids, sizes](Tape& t, int self) {
                       const Eigen::MatrixXd& g = t.adjoint(self);
                       Eigen::Index at_ = 0;
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         t.accumulate(ids[i], g.middleRows(at_, sizes[i]));
                         at_ += sizes[i];
                       }
                     });
}

Var slice_rows(Var a, int start, int rows) {
  Tape& tape = *a.tape;
  const Eigen::MatrixXd& v = tape.value(a);
  if (start < 0 || rows < 1 || start + rows > v.rows())
    throw InvalidArgument("autodiff: slice out of range");
  const int a_id = a.id;
  return tape.record(v.middleRows(start, rows), tape.needs_grad(a),
                     [a_id, start](Tape& t, int self) {
                       t.accumulate_rows(a_id, start, t.adjoint(self));
                     });
}

Var gaussian_log_pdf(Var x, Var mean_v, Var var_v) {
  check_same_tape(x, mean_v);
  check_same_tape(x, var_v);
  Tape& tape = *x.tape;
  if ((tape.value(var_v).array() <= 0.0).any())
    throw DomainError("gaussian_log_pdf: variance must be positive");
  Var diff = x - mean_v;
  Var log_term = log(var_v) + std::log(2.0 * std::numbers::pi);
  Var quad = square(diff) / var_v;
  return sum((log_term + quad) * -0.5);
}

}  // namespace vbgp::ad
