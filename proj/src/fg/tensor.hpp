#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "fg/common.hpp"

namespace fg {

// =====================================================================
//  Tensor - dense row-major array of doubles, rank 1 or 2 in taped code
//  (raw datasets may carry rank 3 before flattening).
// =====================================================================
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);

  int size() const { return static_cast<int>(data_.size()); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }
  // 2-D accessors
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool is_scalar() const { return size() == 1; }
  bool all_finite() const;
  std::string shape_str() const;

private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// =====================================================================
//  Tape - append-only record of primitive applications. Values are
//  computed eagerly; backward() emits the adjoint computation as new
//  nodes on the same tape, which is what permits gradients of gradients
//  (the critic's input-gradient penalty differentiates a gradient).
// =====================================================================
enum class Op : uint8_t {
  Leaf, Const,
  Add, Sub, Mul, Div, MatMul, Transpose,
  Exp, Log, Tanh, Relu, Sigmoid, Softplus, Neg,
  Square, Sqrt, SqrtGuard, Clamp,
  Sum, SumAxis, Mean,
  Broadcast, Reshape, Slice, Concat,
  StepMask, RangeMask
};

const char* op_name(Op op);

class Tape;

// Lightweight handle into a tape. Copyable; invalid after Tape::clear().
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& val() const;
};

struct Node {
  Op op = Op::Leaf;
  int a = -1;
  int b = -1;
  // op attributes: axis/start/len for Slice, axis for SumAxis/Concat,
  // bounds for Clamp/RangeMask.
  int i0 = 0, i1 = 0, i2 = 0;
  double x0 = 0.0, x1 = 0.0;
  Tensor value;
  bool requires_grad = false;
};

class Tape {
public:
  Var leaf(Tensor v, bool requires_grad = true);
  Var constant(Tensor v);
  Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  // Node storage is a deque so references stay valid while backward()
  // appends adjoint nodes.
  const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }

  // Reverse pass from a scalar output. Returns one gradient handle per
  // requested node (id -1 when the output does not depend on it). The
  // adjoints are themselves tape nodes, so a second backward() through
  // them yields second-order gradients.
  std::vector<int> backward(Var output, const std::vector<int>& wrt);

  // Gradient values for a set of leaves; unreached leaves get zero
  // tensors of the leaf's shape.
  std::vector<Tensor> gradients(Var output, const std::vector<Var>& wrt);

  Var emit(Op op, int a, int b, Tensor value, int i0 = 0, int i1 = 0, int i2 = 0,
           double x0 = 0.0, double x1 = 0.0);

private:
  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------
//  Primitives. Binary elementwise ops allow equal shapes, a scalar on
//  either side, or a strict-suffix shape broadcast across leading axes
//  (bias rows over a batch). Anything else is a contract violation.
// ---------------------------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var vexp(Var a);
Var vlog(Var a);
Var vtanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var neg(Var a);
Var square(Var a);
Var vsqrt(Var a);
Var sqrt_guard(Var a); // sqrt with a bounded adjoint at zero (penalty path)
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var sum_axis(Var a, int axis); // 2-D only
Var mean(Var a);
Var broadcast_to(Var a, const std::vector<int>& shape);
Var reshape(Var a, const std::vector<int>& shape);
Var slice(Var a, int axis, int start, int len);
Var concat(Var a, Var b, int axis);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
Var operator*(Var a, double s);
inline Var operator*(double s, Var a) { return a * s; }
Var operator+(Var a, double s);
inline Var operator+(double s, Var a) { return a + s; }
inline Var operator-(Var a, double s) { return a + (-s); }

// Value-level helpers shared by untaped code paths.
Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_scale(const Tensor& a, double s);
Tensor t_matmul(const Tensor& a, const Tensor& b);

// Central finite differences; the test oracle, never used by trainers.
std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& f,
                                         const std::vector<double>& theta0, double step);

} // namespace fg
