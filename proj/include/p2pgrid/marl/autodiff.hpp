#pragma once

#include <Eigen/Dense>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace p2pgrid::marl::ad {

using Mat = Eigen::MatrixXd;

// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation order, so a
// single reverse sweep propagates gradients. Parameters receive their gradients in
// Parameter::grad (accumulated, call zero_grad between steps).
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  Var constant(Mat value);
  Var parameter(Parameter& p);

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);
  void clear();
  std::size_t size() const { return nodes_.size(); }

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Mat& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Adds a node computed from `inputs`; `back` runs only if some input requires grad.
  Var push(Mat value, std::span<const Var> inputs, Backward back);
  Var push(Mat value, std::initializer_list<Var> inputs, Backward back) {
    return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(back));
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
// a (n x m) plus row vector b (1 x m) on every row
Var add_row(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var neg(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var square(Var a);
// Gradient passes only where lo < a < hi.
Var clamp(Var a, double lo, double hi);
// Elementwise minimum; ties route the gradient to `a`.
Var minimum(Var a, Var b);
Var cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(Var a, Var b);
Var concat_rows(const std::vector<Var>& parts);
// Sum over columns: (n x m) -> (n x 1)
Var row_sum(Var a);
Var sum(Var a);
Var mean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace p2pgrid::marl::ad
