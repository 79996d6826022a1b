#include "p2pgrid/marl/autodiff.hpp"

#include "p2pgrid/errors.hpp"

namespace p2pgrid::marl::ad {

const Mat& Var::value() const { return tape->value(id); }

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Mat value, std::span<const Var> inputs, Backward back) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) n.requires_grad = n.requires_grad || requires_grad(v.id);
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1) throw ShapeMismatch("backward: root must be 1x1");
  for (auto& n : nodes_)
    if (n.requires_grad) n.grad.setZero(n.value.rows(), n.value.cols());
  nodes_[static_cast<std::size_t>(root.id)].grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad) continue;
    if (n.back) n.back(*this, i);
    if (n.param) n.param->grad += n.grad;
  }
}

void Tape::clear() { nodes_.clear(); }

namespace {

void check_same(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch(std::string(op) + ": shape mismatch");
}

void accumulate(Tape& t, Var v, const Mat& g) {
  if (t.requires_grad(v.id)) t.grad(v.id) += g;
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("matmul: inner dimensions differ");
  return a.tape->push(a.value() * b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.requires_grad(a.id)) t.grad(a.id).noalias() += g * b.value().transpose();
    if (t.requires_grad(b.id)) t.grad(b.id).noalias() += a.value().transpose() * g;
  });
}

Var add(Var a, Var b) {
  check_same(a, b, "add");
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    accumulate(t, a, t.grad(self));
    accumulate(t, b, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    accumulate(t, a, t.grad(self));
    if (t.requires_grad(b.id)) t.grad(b.id) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  return a.tape->push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.requires_grad(a.id)) t.grad(a.id) += g.cwiseProduct(b.value());
    if (t.requires_grad(b.id)) t.grad(b.id) += g.cwiseProduct(a.value());
  });
}

Var add_row(Var a, Var b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw ShapeMismatch("add_row: bias shape");
  Mat v = a.value().rowwise() + b.value().row(0);
  return a.tape->push(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    accumulate(t, a, g);
    if (t.requires_grad(b.id)) t.grad(b.id) += g.colwise().sum();
  });
}

Var scale(Var a, double k) {
  return a.tape->push(a.value() * k, {a}, [a, k](Tape& t, int self) {
    if (t.requires_grad(a.id)) t.grad(a.id) += t.grad(self) * k;
  });
}

Var add_scalar(Var a, double k) {
  return a.tape->push(a.value().array() + k, {a}, [a](Tape& t, int self) {
    accumulate(t, a, t.grad(self));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) {
  Mat y = a.value().array().tanh();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (!t.requires_grad(a.id)) return;
    const Mat& y = t.value(self);
    t.grad(a.id).array() += t.grad(self).array() * (1.0 - y.array().square());
  });
}

Var sigmoid(Var a) {
  Mat y = (1.0 + (-a.value().array()).exp()).inverse();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (!t.requires_grad(a.id)) return;
    const Mat& y = t.value(self);
    t.grad(a.id).array() += t.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var relu(Var a) {
  Mat y = a.value().cwiseMax(0.0);
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (!t.requires_grad(a.id)) return;
    t.grad(a.id).array() += (a.value().array() > 0.0).select(t.grad(self).array(), 0.0);
  });
}

Var exp(Var a) {
  Mat y = a.value().array().exp();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (!t.requires_grad(a.id)) return;
    t.grad(a.id).array() += t.grad(self).array() * t.value(self).array();
  });
}

Var square(Var a) {
  Mat y = a.value().array().square();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (!t.requires_grad(a.id)) return;
    t.grad(a.id).array() += 2.0 * t.grad(self).array() * a.value().array();
  });
}

Var clamp(Var a, double lo, double hi) {
  Mat y = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape->push(std::move(y), {a}, [a, lo, hi](Tape& t, int self) {
    if (!t.requires_grad(a.id)) return;
    const auto& x = a.value().array();
    t.grad(a.id).array() += ((x > lo) && (x < hi)).select(t.grad(self).array(), 0.0);
  });
}

Var minimum(Var a, Var b) {
  check_same(a, b, "minimum");
  Mat y = a.value().cwiseMin(b.value());
  return a.tape->push(std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const auto take_a = (a.value().array() <= b.value().array());
    const auto& g = t.grad(self).array();
    if (t.requires_grad(a.id)) t.grad(a.id).array() += take_a.select(g, 0.0);
    if (t.requires_grad(b.id)) t.grad(b.id).array() += take_a.select(0.0, g);
  });
}

Var cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) throw ShapeMismatch("cols: range out of bounds");
  Mat y = a.value().middleCols(start, count);
  return a.tape->push(std::move(y), {a}, [a, start, count](Tape& t, int self) {
    if (t.requires_grad(a.id)) t.grad(a.id).middleCols(start, count) += t.grad(self);
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ShapeMismatch("concat_cols: row counts differ");
  Mat y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  return a.tape->push(std::move(y), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.requires_grad(a.id)) t.grad(a.id) += g.leftCols(a.cols());
    if (t.requires_grad(b.id)) t.grad(b.id) += g.rightCols(b.cols());
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  Tape& tape = *parts.front().tape;
  Eigen::Index rows = 0;
  const Eigen::Index c = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != c) throw ShapeMismatch("concat_rows: column counts differ");
    rows += p.rows();
  }
  Mat y(rows, c);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return tape.push(std::move(y), std::span<const Var>(parts), [parts](Tape& t, int self) {
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p.id)) t.grad(p.id) += t.grad(self).middleRows(r, p.rows());
      r += p.rows();
    }
  });
}

Var row_sum(Var a) {
  Mat y = a.value().rowwise().sum();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (t.requires_grad(a.id)) t.grad(a.id).colwise() += t.grad(self).col(0);
  });
}

Var sum(Var a) {
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape->push(std::move(y), {a}, [a](Tape& t, int self) {
    if (t.requires_grad(a.id)) t.grad(a.id).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

}  // namespace p2pgrid::marl::ad
