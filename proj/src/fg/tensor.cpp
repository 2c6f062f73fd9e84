#include "fg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace fg {

// ---------------------------------------------------------------------
//  Tensor
// ---------------------------------------------------------------------
static int checked_size(const std::vector<int>& shape) {
  if (shape.empty()) raise(Err::Contract, "tensor shape must have at least one extent");
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) raise(Err::Contract, "tensor extents must be positive");
    n *= d;
    if (n > (1ll << 31)) raise(Err::Contract, "tensor too large");
  }
  return static_cast<int>(n);
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_size(shape_) != static_cast<int>(data_.size()))
    raise(Err::Contract, "tensor data length does not match shape");
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) raise(Err::Contract, "t_add shape mismatch");
  Tensor r = a;
  for (int i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Tensor t_scale(const Tensor& a, double s) {
  Tensor r = a;
  for (int i = 0; i < r.size(); ++i) r[i] *= s;
  return r;
}

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    raise(Err::Contract, "t_matmul shape mismatch " + a.shape_str() + " x " + b.shape_str());
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor r({m, n});
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data() + static_cast<size_t>(i) * k;
    double* rrow = r.data() + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b.data() + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) rrow[j] += av * brow[j];
    }
  }
  return r;
}

// ---------------------------------------------------------------------
//  Op names
// ---------------------------------------------------------------------
const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Const: return "const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Neg: return "neg";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::SqrtGuard: return "sqrt_guard";
    case Op::Clamp: return "clamp";
    case Op::Sum: return "sum";
    case Op::SumAxis: return "sum_axis";
    case Op::Mean: return "mean";
    case Op::Broadcast: return "broadcast";
    case Op::Reshape: return "reshape";
    case Op::Slice: return "slice";
    case Op::Concat: return "concat";
    case Op::StepMask: return "step_mask";
    case Op::RangeMask: return "range_mask";
  }
  return "?";
}

// ---------------------------------------------------------------------
//  Tape
// ---------------------------------------------------------------------
const Tensor& Var::val() const {
  if (!valid()) raise(Err::Contract, "use of an invalid tape handle");
  return tape->val(id);
}

Var Tape::leaf(Tensor v, bool requires_grad) {
  if (!v.all_finite()) raise(Err::Numeric, "non-finite value in leaf tensor");
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor v) {
  Var r = leaf(std::move(v), false);
  nodes_.back().op = Op::Const;
  return r;
}

Var Tape::emit(Op op, int a, int b, Tensor value, int i0, int i1, int i2, double x0, double x1) {
  if (!value.all_finite()) raise(Err::Numeric, strf("non-finite output of primitive '%s'", op_name(op)));
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.i0 = i0;
  n.i1 = i1;
  n.i2 = i2;
  n.x0 = x0;
  n.x1 = x1;
  n.value = std::move(value);
  bool rg = false;
  if (a >= 0) rg = rg || nodes_[static_cast<size_t>(a)].requires_grad;
  if (b >= 0) rg = rg || nodes_[static_cast<size_t>(b)].requires_grad;
  if (op == Op::StepMask || op == Op::RangeMask) rg = false;
  n.requires_grad = rg;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

// ---------------------------------------------------------------------
//  Shape / broadcast machinery
// ---------------------------------------------------------------------
namespace {

enum class BMode { Same, AScalar, BScalar, ASuffix, BSuffix };

bool is_suffix(const std::vector<int>& small, const std::vector<int>& big) {
  if (small.size() >= big.size()) return false;
  size_t off = big.size() - small.size();
  for (size_t i = 0; i < small.size(); ++i)
    if (small[i] != big[off + i]) return false;
  return true;
}

BMode broadcast_mode(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.same_shape(b)) return BMode::Same;
  // suffix tests first: a [1,1] tensor is a suffix target, not a scalar
  if (is_suffix(a.shape(), b.shape())) return BMode::ASuffix;
  if (is_suffix(b.shape(), a.shape())) return BMode::BSuffix;
  if (a.is_scalar()) return BMode::AScalar;
  if (b.is_scalar()) return BMode::BScalar;
  raise(Err::Contract,
        strf("%s: shapes %s and %s do not conform", opname, a.shape_str().c_str(), b.shape_str().c_str()));
}

template <class F>
Tensor ew_binary(const Tensor& a, const Tensor& b, const char* opname, F f) {
  BMode m = broadcast_mode(a, b, opname);
  const Tensor& big = (m == BMode::AScalar || m == BMode::ASuffix) ? b : a;
  Tensor r(big.shape());
  int n = big.size();
  switch (m) {
    case BMode::Same:
      for (int i = 0; i < n; ++i) r[i] = f(a[i], b[i]);
      break;
    case BMode::AScalar:
      for (int i = 0; i < n; ++i) r[i] = f(a[0], b[i]);
      break;
    case BMode::BScalar:
      for (int i = 0; i < n; ++i) r[i] = f(a[i], b[0]);
      break;
    case BMode::ASuffix: {
      int k = a.size();
      for (int i = 0; i < n; ++i) r[i] = f(a[i % k], b[i]);
      break;
    }
    case BMode::BSuffix: {
      int k = b.size();
      for (int i = 0; i < n; ++i) r[i] = f(a[i], b[i % k]);
      break;
    }
  }
  return r;
}

template <class F>
Var ew_binary_op(Op op, Var a, Var b, const char* opname, F f) {
  if (a.tape != b.tape) raise(Err::Contract, "operands live on different tapes");
  Tensor r = ew_binary(a.val(), b.val(), opname, f);
  return a.tape->emit(op, a.id, b.id, std::move(r));
}

template <class F>
Var ew_unary_op(Op op, Var a, F f) {
  const Tensor& av = a.val();
  Tensor r(av.shape());
  for (int i = 0; i < av.size(); ++i) r[i] = f(av[i]);
  return a.tape->emit(op, a.id, -1, std::move(r));
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

// ---------------------------------------------------------------------
//  Primitives
// ---------------------------------------------------------------------
Var add(Var a, Var b) { return ew_binary_op(Op::Add, a, b, "add", [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return ew_binary_op(Op::Sub, a, b, "sub", [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return ew_binary_op(Op::Mul, a, b, "mul", [](double x, double y) { return x * y; }); }
Var div(Var a, Var b) { return ew_binary_op(Op::Div, a, b, "div", [](double x, double y) { return x / y; }); }

Var matmul(Var a, Var b) {
  if (a.tape != b.tape) raise(Err::Contract, "operands live on different tapes");
  return a.tape->emit(Op::MatMul, a.id, b.id, t_matmul(a.val(), b.val()));
}

Var transpose(Var a) {
  const Tensor& av = a.val();
  if (av.ndim() != 2) raise(Err::Contract, "transpose requires a 2-D tensor");
  int m = av.dim(0), n = av.dim(1);
  Tensor r({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) r.at(j, i) = av.at(i, j);
  return a.tape->emit(Op::Transpose, a.id, -1, std::move(r));
}

Var vexp(Var a) { return ew_unary_op(Op::Exp, a, [](double x) { return std::exp(x); }); }

Var vlog(Var a) {
  const Tensor& av = a.val();
  for (int i = 0; i < av.size(); ++i)
    if (av[i] <= 0.0) raise(Err::Domain, "log of non-positive input");
  return ew_unary_op(Op::Log, a, [](double x) { return std::log(x); });
}

Var vtanh(Var a) { return ew_unary_op(Op::Tanh, a, [](double x) { return std::tanh(x); }); }
Var relu(Var a) { return ew_unary_op(Op::Relu, a, [](double x) { return x > 0 ? x : 0.0; }); }
Var sigmoid(Var a) { return ew_unary_op(Op::Sigmoid, a, stable_sigmoid); }
Var softplus(Var a) { return ew_unary_op(Op::Softplus, a, stable_softplus); }
Var neg(Var a) { return ew_unary_op(Op::Neg, a, [](double x) { return -x; }); }
Var square(Var a) { return ew_unary_op(Op::Square, a, [](double x) { return x * x; }); }

Var vsqrt(Var a) {
  const Tensor& av = a.val();
  for (int i = 0; i < av.size(); ++i)
    if (av[i] <= 0.0) raise(Err::Domain, "sqrt of non-positive input");
  return ew_unary_op(Op::Sqrt, a, [](double x) { return std::sqrt(x); });
}

Var sqrt_guard(Var a) {
  const Tensor& av = a.val();
  for (int i = 0; i < av.size(); ++i)
    if (av[i] < 0.0) raise(Err::Domain, "sqrt_guard of negative input");
  return ew_unary_op(Op::SqrtGuard, a, [](double x) { return std::sqrt(x); });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo < hi)) raise(Err::Contract, "clamp bounds must satisfy lo < hi");
  Tensor r(a.val().shape());
  const Tensor& av = a.val();
  for (int i = 0; i < av.size(); ++i) r[i] = std::min(std::max(av[i], lo), hi);
  return a.tape->emit(Op::Clamp, a.id, -1, std::move(r), 0, 0, 0, lo, hi);
}

Var sum(Var a) {
  const Tensor& av = a.val();
  double s = 0.0;
  for (int i = 0; i < av.size(); ++i) s += av[i];
  return a.tape->emit(Op::Sum, a.id, -1, Tensor::scalar(s));
}

Var sum_axis(Var a, int axis) {
  const Tensor& av = a.val();
  if (av.ndim() != 2 || (axis != 0 && axis != 1)) raise(Err::Contract, "sum_axis requires a 2-D tensor and axis 0 or 1");
  int m = av.dim(0), n = av.dim(1);
  if (axis == 0) {
    Tensor r({n});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) r[j] += av.at(i, j);
    return a.tape->emit(Op::SumAxis, a.id, -1, std::move(r), 0);
  }
  Tensor r({m});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += av.at(i, j);
    r[i] = s;
  }
  return a.tape->emit(Op::SumAxis, a.id, -1, std::move(r), 1);
}

Var mean(Var a) {
  const Tensor& av = a.val();
  double s = 0.0;
  for (int i = 0; i < av.size(); ++i) s += av[i];
  return a.tape->emit(Op::Mean, a.id, -1, Tensor::scalar(s / av.size()));
}

Var broadcast_to(Var a, const std::vector<int>& shape) {
  const Tensor& av = a.val();
  Tensor r(shape);
  if (av.is_scalar()) {
    for (int i = 0; i < r.size(); ++i) r[i] = av[0];
  } else if (is_suffix(av.shape(), shape)) {
    int k = av.size();
    for (int i = 0; i < r.size(); ++i) r[i] = av[i % k];
  } else if (av.shape() == shape) {
    r = av;
  } else {
    raise(Err::Contract, strf("broadcast from %s only to a shape it suffixes", av.shape_str().c_str()));
  }
  return a.tape->emit(Op::Broadcast, a.id, -1, std::move(r));
}

Var reshape(Var a, const std::vector<int>& shape) {
  Tensor r(shape);
  const Tensor& av = a.val();
  if (r.size() != av.size()) raise(Err::Contract, "reshape must preserve element count");
  std::memcpy(r.data(), av.data(), sizeof(double) * static_cast<size_t>(r.size()));
  return a.tape->emit(Op::Reshape, a.id, -1, std::move(r));
}

Var slice(Var a, int axis, int start, int len) {
  const Tensor& av = a.val();
  if (len <= 0) raise(Err::Contract, "slice length must be positive");
  if (av.ndim() == 1) {
    if (axis != 0 || start < 0 || start + len > av.dim(0)) raise(Err::Contract, "slice out of range");
    Tensor r({len});
    for (int i = 0; i < len; ++i) r[i] = av[start + i];
    return a.tape->emit(Op::Slice, a.id, -1, std::move(r), axis, start, len);
  }
  if (av.ndim() != 2 || (axis != 0 && axis != 1)) raise(Err::Contract, "slice supports 1-D and 2-D tensors");
  int m = av.dim(0), n = av.dim(1);
  if (axis == 0) {
    if (start < 0 || start + len > m) raise(Err::Contract, "slice out of range");
    Tensor r({len, n});
    std::memcpy(r.data(), av.data() + static_cast<size_t>(start) * n, sizeof(double) * static_cast<size_t>(len) * n);
    return a.tape->emit(Op::Slice, a.id, -1, std::move(r), axis, start, len);
  }
  if (start < 0 || start + len > n) raise(Err::Contract, "slice out of range");
  Tensor r({m, len});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < len; ++j) r.at(i, j) = av.at(i, start + j);
  return a.tape->emit(Op::Slice, a.id, -1, std::move(r), axis, start, len);
}

Var concat(Var a, Var b, int axis) {
  if (a.tape != b.tape) raise(Err::Contract, "operands live on different tapes");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.ndim() != bv.ndim()) raise(Err::Contract, "concat rank mismatch");
  if (av.ndim() == 1) {
    if (axis != 0) raise(Err::Contract, "concat axis out of range");
    Tensor r({av.dim(0) + bv.dim(0)});
    std::memcpy(r.data(), av.data(), sizeof(double) * static_cast<size_t>(av.size()));
    std::memcpy(r.data() + av.size(), bv.data(), sizeof(double) * static_cast<size_t>(bv.size()));
    return a.tape->emit(Op::Concat, a.id, b.id, std::move(r), axis);
  }
  if (av.ndim() != 2 || (axis != 0 && axis != 1)) raise(Err::Contract, "concat supports 1-D and 2-D tensors");
  if (axis == 0) {
    if (av.dim(1) != bv.dim(1)) raise(Err::Contract, "concat column mismatch");
    Tensor r({av.dim(0) + bv.dim(0), av.dim(1)});
    std::memcpy(r.data(), av.data(), sizeof(double) * static_cast<size_t>(av.size()));
    std::memcpy(r.data() + av.size(), bv.data(), sizeof(double) * static_cast<size_t>(bv.size()));
    return a.tape->emit(Op::Concat, a.id, b.id, std::move(r), axis);
  }
  if (av.dim(0) != bv.dim(0)) raise(Err::Contract, "concat row mismatch");
  int m = av.dim(0), na = av.dim(1), nb = bv.dim(1);
  Tensor r({m, na + nb});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < na; ++j) r.at(i, j) = av.at(i, j);
    for (int j = 0; j < nb; ++j) r.at(i, na + j) = bv.at(i, j);
  }
  return a.tape->emit(Op::Concat, a.id, b.id, std::move(r), axis);
}

Var operator*(Var a, double s) { return mul(a, a.tape->constant_scalar(s)); }
Var operator+(Var a, double s) { return add(a, a.tape->constant_scalar(s)); }

// ---------------------------------------------------------------------
//  Backward
// ---------------------------------------------------------------------
namespace {

Var step_mask(Var a) {
  const Tensor& av = a.val();
  Tensor r(av.shape());
  for (int i = 0; i < av.size(); ++i) r[i] = av[i] > 0 ? 1.0 : 0.0;
  return a.tape->emit(Op::StepMask, a.id, -1, std::move(r));
}

Var range_mask(Var a, double lo, double hi) {
  const Tensor& av = a.val();
  Tensor r(av.shape());
  for (int i = 0; i < av.size(); ++i) r[i] = (av[i] > lo && av[i] < hi) ? 1.0 : 0.0;
  return a.tape->emit(Op::RangeMask, a.id, -1, std::move(r), 0, 0, 0, lo, hi);
}

// Sums an adjoint back down to the shape of a broadcast operand.
Var reduce_to(Var g, const std::vector<int>& target) {
  const Tensor& gv = g.val();
  if (gv.shape() == target) return g;
  long long tsize = 1;
  for (int d : target) tsize *= d;
  if (tsize == 1) {
    Var s = sum(g);
    return (target.size() == 1) ? s : reshape(s, target);
  }
  if (gv.ndim() == 2 && target.size() == 1 && target[0] == gv.dim(1)) return sum_axis(g, 0);
  raise(Err::Contract, "cannot reduce adjoint to operand shape");
}

// Ones row used to spread a per-row adjoint across columns.
Var spread_rows(Var g, int cols) {
  int m = g.val().dim(0);
  Var col = reshape(g, {m, 1});
  Var ones = g.tape->constant(Tensor::full({1, cols}, 1.0));
  return matmul(col, ones);
}

} // namespace

std::vector<int> Tape::backward(Var output, const std::vector<int>& wrt) {
  if (output.tape != this || output.id < 0 || output.id >= size())
    raise(Err::Contract, "backward output is not on this tape");
  if (!val(output.id).is_scalar()) raise(Err::Contract, "backward requires a scalar output");

  const int n0 = output.id + 1;
  std::vector<int> bar(static_cast<size_t>(n0), -1);

  auto var = [this](int id) { return Var{this, id}; };
  auto acc = [&](int target, Var g) {
    if (target < 0 || target >= n0) return;
    if (!nodes_[static_cast<size_t>(target)].requires_grad) return;
    // Adjoint must land in the operand's shape.
    Var gr = reduce_to(g, nodes_[static_cast<size_t>(target)].value.shape());
    bar[static_cast<size_t>(target)] = bar[static_cast<size_t>(target)] < 0
                                           ? gr.id
                                           : add(var(bar[static_cast<size_t>(target)]), gr).id;
  };

  if (nodes_[static_cast<size_t>(output.id)].requires_grad)
    bar[static_cast<size_t>(output.id)] = constant(Tensor::scalar(1.0)).id;

  for (int id = output.id; id >= 0; --id) {
    int gid = bar[static_cast<size_t>(id)];
    if (gid < 0) continue;
    const Node& n = nodes_[static_cast<size_t>(id)]; // deque: stable across appends
    Var g = var(gid);
    Var a = var(n.a), b = var(n.b), self = var(id);
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
      case Op::StepMask:
      case Op::RangeMask:
        break;
      case Op::Add:
        acc(n.a, g);
        acc(n.b, g);
        break;
      case Op::Sub:
        acc(n.a, g);
        acc(n.b, neg(g));
        break;
      case Op::Mul:
        acc(n.a, mul(g, b));
        acc(n.b, mul(g, a));
        break;
      case Op::Div:
        acc(n.a, div(g, b));
        acc(n.b, neg(mul(g, div(a, mul(b, b)))));
        break;
      case Op::MatMul:
        acc(n.a, matmul(g, transpose(b)));
        acc(n.b, matmul(transpose(a), g));
        break;
      case Op::Transpose:
        acc(n.a, transpose(g));
        break;
      case Op::Exp:
        acc(n.a, mul(g, self));
        break;
      case Op::Log:
        acc(n.a, div(g, a));
        break;
      case Op::Tanh:
        acc(n.a, mul(g, sub(constant_scalar(1.0), square(self))));
        break;
      case Op::Relu:
        acc(n.a, mul(g, step_mask(a)));
        break;
      case Op::Sigmoid:
        acc(n.a, mul(g, mul(self, sub(constant_scalar(1.0), self))));
        break;
      case Op::Softplus:
        acc(n.a, mul(g, sigmoid(a)));
        break;
      case Op::Neg:
        acc(n.a, neg(g));
        break;
      case Op::Square:
        acc(n.a, mul(g, mul(a, constant_scalar(2.0))));
        break;
      case Op::Sqrt:
        acc(n.a, div(mul(g, constant_scalar(0.5)), self));
        break;
      case Op::SqrtGuard:
        // Bounded adjoint at zero: the penalty's derivative stays finite
        // when the critic's input gradient vanishes.
        acc(n.a, div(mul(g, constant_scalar(0.5)), clamp(self, 1e-12, HUGE_VAL)));
        break;
      case Op::Clamp:
        acc(n.a, mul(g, range_mask(a, n.x0, n.x1)));
        break;
      case Op::Sum:
        acc(n.a, broadcast_to(g, nodes_[static_cast<size_t>(n.a)].value.shape()));
        break;
      case Op::SumAxis: {
        const auto& ashape = nodes_[static_cast<size_t>(n.a)].value.shape();
        if (n.i0 == 0)
          acc(n.a, broadcast_to(g, ashape));
        else
          acc(n.a, spread_rows(g, ashape[1]));
        break;
      }
      case Op::Mean: {
        const auto& ashape = nodes_[static_cast<size_t>(n.a)].value.shape();
        long long cnt = 1;
        for (int d : ashape) cnt *= d;
        acc(n.a, broadcast_to(mul(g, constant_scalar(1.0 / static_cast<double>(cnt))), ashape));
        break;
      }
      case Op::Broadcast:
        acc(n.a, g); // acc reduces to the operand's shape
        break;
      case Op::Reshape:
        acc(n.a, reshape(g, nodes_[static_cast<size_t>(n.a)].value.shape()));
        break;
      case Op::Slice: {
        const auto& ashape = nodes_[static_cast<size_t>(n.a)].value.shape();
        int axis = n.i0, start = n.i1, len = n.i2;
        int extent = ashape[static_cast<size_t>(axis)];
        Var padded = g;
        if (start > 0) {
          std::vector<int> lshape = ashape;
          lshape[static_cast<size_t>(axis)] = start;
          padded = concat(constant(Tensor::zeros(lshape)), padded, axis);
        }
        if (start + len < extent) {
          std::vector<int> rshape = ashape;
          rshape[static_cast<size_t>(axis)] = extent - start - len;
          padded = concat(padded, constant(Tensor::zeros(rshape)), axis);
        }
        acc(n.a, padded);
        break;
      }
      case Op::Concat: {
        int axis = n.i0;
        int na = nodes_[static_cast<size_t>(n.a)].value.shape()[static_cast<size_t>(axis)];
        int nb = nodes_[static_cast<size_t>(n.b)].value.shape()[static_cast<size_t>(axis)];
        acc(n.a, slice(g, axis, 0, na));
        acc(n.b, slice(g, axis, na, nb));
        break;
      }
    }
  }

  std::vector<int> out;
  out.reserve(wrt.size());
  for (int id : wrt) {
    if (id < 0 || id >= n0)
      out.push_back(-1);
    else
      out.push_back(bar[static_cast<size_t>(id)]);
  }
  return out;
}

std::vector<Tensor> Tape::gradients(Var output, const std::vector<Var>& wrt) {
  std::vector<int> ids;
  ids.reserve(wrt.size());
  for (const Var& v : wrt) ids.push_back(v.id);
  std::vector<int> gids = backward(output, ids);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (size_t i = 0; i < wrt.size(); ++i) {
    if (gids[i] < 0)
      out.push_back(Tensor::zeros(wrt[i].val().shape()));
    else
      out.push_back(val(gids[i]));
  }
  return out;
}

// ---------------------------------------------------------------------
//  Finite differences (test oracle)
// ---------------------------------------------------------------------
std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& f,
                                         const std::vector<double>& theta0, double step) {
  if (!(step > 0)) raise(Err::Contract, "finite_diff_gradient requires step > 0");
  std::vector<double> g(theta0.size());
  std::vector<double> theta = theta0;
  for (size_t i = 0; i < theta0.size(); ++i) {
    theta[i] = theta0[i] + step;
    double fp = f(theta);
    theta[i] = theta0[i] - step;
    double fm = f(theta);
    theta[i] = theta0[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) raise(Err::Numeric, "finite_diff_gradient: f returned non-finite");
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

} // namespace fg
