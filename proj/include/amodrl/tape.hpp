#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/special.hpp"
#include "amodrl/tensor.hpp"

namespace amodrl {

/// A named learnable tensor living outside any tape. Tapes bind to it by
/// pointer; backward() writes the fresh gradient into `grad`.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), grad(Tensor::zeros(v.rows, v.cols)) {
    value = std::move(v);
    value.requires_grad = true;
  }

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

class Tape;

/// Handle to a tensor recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Define-by-run reverse-mode tape over dense fp64 tensors. Forward values
/// are computed eagerly; backward() replays the recorded operations once in
/// reverse. A tape lives for one forward/backward pass and is then discarded.
class Tape {
  enum class Op {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Neg,
    AddScalar,
    MulScalar,
    AddRowVec,
    Relu,
    LeakyRelu,
    Sigmoid,
    Exp,
    Log,
    Tanh,
    Rsqrt,
    LogGamma,
    Digamma,
    RowSoftmax,
    SumPool,
    SumAll,
    Reshape,
    Transpose,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double k = 0.0;  // scalar op parameter (slope / factor / offset)
    Tensor val;
    Tensor grad;
    bool rg = false;
    std::vector<uint8_t> mask;   // RowSoftmax: 1 = active entry; empty = all active
    Parameter* bound = nullptr;  // Leaf bound to an external parameter
  };

 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When enabled, every op verifies its output is finite and throws
  /// NumericError otherwise. Off by default; tests and gradcheck turn it on.
  void set_check_finite(bool on) { check_finite_ = on; }

  size_t num_nodes() const { return nodes_.size(); }

  const Tensor& value(Var v) const { return at(v).val; }

  /// Gradient of the last backward() target w.r.t. this node.
  const Tensor& grad_of(Var v) const {
    const Node& n = at(v);
    if (n.grad.size() != n.val.size())
      throw ContractError("grad_of: no gradient recorded; run backward() first");
    return n.grad;
  }

  // ---- leaves ----

  /// Bind a parameter as a leaf. Calling again with the same parameter on
  /// this tape returns the same node, so gradients from every use accumulate.
  Var param(Parameter& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var{this, it->second};
    Node n;
    n.op = Op::Leaf;
    n.val = p.value;
    // A bound Parameter is a trainable leaf by contract; consulting the
    // tensor flag here would silently freeze parameters whose value tensor
    // was replaced wholesale (the flag does not survive assignment).
    n.rg = true;
    n.bound = &p;
    const int id = push(std::move(n));
    param_ids_.emplace(&p, id);
    return Var{this, id};
  }

  Var constant(Tensor t) {
    Node n;
    n.op = Op::Leaf;
    t.requires_grad = false;
    n.val = std::move(t);
    n.rg = false;
    return Var{this, push(std::move(n))};
  }

  /// Free-standing leaf; with requires_grad the gradient is readable through
  /// grad_of() after backward (used to pull task gradients w.r.t. inputs).
  Var input(Tensor t, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(t);
    n.rg = requires_grad;
    return Var{this, push(std::move(n))};
  }

  // ---- operations ----

  Var matmul(Var a, Var b) {
    Node n = binary(Op::MatMul, a, b);
    n.val = matmul_plain(at(a).val, at(b).val);
    return finish(std::move(n), "matmul");
  }

  Var add(Var a, Var b) {
    Node n = binary(Op::Add, a, b);
    n.val = add_plain(at(a).val, at(b).val);
    return finish(std::move(n), "add");
  }

  Var sub(Var a, Var b) {
    Node n = binary(Op::Sub, a, b);
    n.val = sub_plain(at(a).val, at(b).val);
    return finish(std::move(n), "sub");
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    Node n = binary(Op::Mul, a, b);
    n.val = mul_plain(at(a).val, at(b).val);
    return finish(std::move(n), "mul");
  }

  Var neg(Var a) {
    Node n = unary(Op::Neg, a);
    n.val = scale_plain(at(a).val, -1.0);
    return finish(std::move(n), "neg");
  }

  Var add_scalar(Var a, double c) {
    Node n = unary(Op::AddScalar, a);
    n.k = c;
    n.val = at(a).val;
    for (double& v : n.val.data) v += c;
    return finish(std::move(n), "add_scalar");
  }

  Var mul_scalar(Var a, double c) {
    Node n = unary(Op::MulScalar, a);
    n.k = c;
    n.val = scale_plain(at(a).val, c);
    return finish(std::move(n), "mul_scalar");
  }

  /// x (m-by-d) plus row vector b (1-by-d) broadcast over the m rows.
  Var add_rowvec(Var x, Var b) {
    const Tensor& xv = at(x).val;
    const Tensor& bv = at(b).val;
    if (bv.rows != 1 || bv.cols != xv.cols)
      throw DimensionError("add_rowvec: expected 1x" + std::to_string(xv.cols) + ", got " +
                           bv.shape_str());
    Node n = binary(Op::AddRowVec, x, b);
    n.val = xv;
    for (int i = 0; i < xv.rows; ++i)
      for (int j = 0; j < xv.cols; ++j) n.val(i, j) += bv(0, j);
    return finish(std::move(n), "add_rowvec");
  }

  Var relu(Var a) {
    Node n = unary(Op::Relu, a);
    n.val = at(a).val;
    for (double& v : n.val.data) v = v > 0.0 ? v : 0.0;
    return finish(std::move(n), "relu");
  }

  Var leaky_relu(Var a, double slope) {
    Node n = unary(Op::LeakyRelu, a);
    n.k = slope;
    n.val = at(a).val;
    for (double& v : n.val.data) v = v > 0.0 ? v : slope * v;
    return finish(std::move(n), "leaky_relu");
  }

  Var sigmoid(Var a) {
    Node n = unary(Op::Sigmoid, a);
    n.val = at(a).val;
    for (double& v : n.val.data) v = 1.0 / (1.0 + std::exp(-v));
    return finish(std::move(n), "sigmoid");
  }

  Var exp(Var a) {
    Node n = unary(Op::Exp, a);
    n.val = at(a).val;
    for (double& v : n.val.data) v = std::exp(v);
    return finish(std::move(n), "exp");
  }

  Var log(Var a) {
    Node n = unary(Op::Log, a);
    n.val = at(a).val;
    for (double& v : n.val.data) {
      if (!(v > 0.0)) throw DomainError("log: input must be strictly positive");
      v = std::log(v);
    }
    return finish(std::move(n), "log");
  }

  Var tanh(Var a) {
    Node n = unary(Op::Tanh, a);
    n.val = at(a).val;
    for (double& v : n.val.data) v = std::tanh(v);
    return finish(std::move(n), "tanh");
  }

  /// 1/sqrt(x); requires strictly positive input.
  Var rsqrt(Var a) {
    Node n = unary(Op::Rsqrt, a);
    n.val = at(a).val;
    for (double& v : n.val.data) {
      if (!(v > 0.0)) throw DomainError("rsqrt: input must be strictly positive");
      v = 1.0 / std::sqrt(v);
    }
    return finish(std::move(n), "rsqrt");
  }

  Var lgamma(Var a) {
    Node n = unary(Op::LogGamma, a);
    n.val = at(a).val;
    for (double& v : n.val.data) v = log_gamma(v);
    return finish(std::move(n), "lgamma");
  }

  Var digamma_op(Var a) {
    Node n = unary(Op::Digamma, a);
    n.val = at(a).val;
    for (double& v : n.val.data) v = digamma(v);
    return finish(std::move(n), "digamma");
  }

  /// Row-wise softmax; `mask` (same shape, 1 = active) restricts each row to
  /// its active entries, masked entries are exactly 0. Stabilized by row-max
  /// subtraction. A row with no active entry is an error.
  Var row_softmax(Var a, const std::vector<uint8_t>* mask = nullptr) {
    const Tensor& x = at(a).val;
    if (mask && mask->size() != x.size())
      throw DimensionError("row_softmax: mask size does not match input");
    Node n = unary(Op::RowSoftmax, a);
    if (mask) n.mask = *mask;
    n.val = Tensor(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
      double mx = -HUGE_VAL;
      for (int j = 0; j < x.cols; ++j)
        if (active(n.mask, x.cols, i, j)) mx = std::max(mx, x(i, j));
      if (mx == -HUGE_VAL)
        throw DegenerateError("row_softmax: fully-masked row " + std::to_string(i));
      double sum = 0.0;
      for (int j = 0; j < x.cols; ++j)
        if (active(n.mask, x.cols, i, j)) {
          n.val(i, j) = std::exp(x(i, j) - mx);
          sum += n.val(i, j);
        }
      for (int j = 0; j < x.cols; ++j)
        if (active(n.mask, x.cols, i, j)) n.val(i, j) /= sum;
    }
    return finish(std::move(n), "row_softmax");
  }

  /// Column sums: n-by-d -> 1-by-d.
  Var sum_pool(Var a) {
    const Tensor& x = at(a).val;
    if (x.rows < 1) throw DimensionError("sum_pool: empty input");
    Node n = unary(Op::SumPool, a);
    n.val = Tensor(1, x.cols);
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < x.cols; ++j) n.val(0, j) += x(i, j);
    return finish(std::move(n), "sum_pool");
  }

  /// Sum of all entries -> scalar.
  Var sum_all(Var a) {
    Node n = unary(Op::SumAll, a);
    double s = 0.0;
    for (double v : at(a).val.data) s += v;
    n.val = Tensor::scalar(s);
    return finish(std::move(n), "sum_all");
  }

  Var reshape(Var a, int rows, int cols) {
    const Tensor& x = at(a).val;
    if (static_cast<size_t>(rows) * cols != x.size())
      throw DimensionError("reshape: element count mismatch " + x.shape_str() + " -> " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    Node n = unary(Op::Reshape, a);
    n.val = x;
    n.val.rows = rows;
    n.val.cols = cols;
    return finish(std::move(n), "reshape");
  }

  Var transpose(Var a) {
    Node n = unary(Op::Transpose, a);
    n.val = transpose_plain(at(a).val);
    return finish(std::move(n), "transpose");
  }

  // ---- reverse pass ----

  /// Reverse sweep from a scalar loss. Gradients of bound parameters are
  /// written (not accumulated) into Parameter::grad, so a repeated call
  /// reproduces identical results.
  void backward(Var loss) {
    Node& l = at(loss);
    if (l.val.rows != 1 || l.val.cols != 1)
      throw ContractError("backward: loss must be scalar, got " + l.val.shape_str());
    if (!l.rg) throw ContractError("backward: loss does not depend on any parameter");
    for (Node& n : nodes_) {
      if (n.rg) {
        n.grad = Tensor::zeros(n.val.rows, n.val.cols);
      } else {
        n.grad = Tensor();
      }
    }
    l.grad.data[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) backprop(nodes_[i]);
    for (auto& [p, id] : param_ids_)
      if (nodes_[id].rg) p->grad = nodes_[id].grad;
  }

 private:
  Node& at(Var v) {
    if (v.tape != this) throw ContractError("var belongs to a different tape");
    return nodes_[v.id];
  }
  const Node& at(Var v) const {
    if (v.tape != this) throw ContractError("var belongs to a different tape");
    return nodes_[v.id];
  }

  static bool active(const std::vector<uint8_t>& mask, int cols, int i, int j) {
    return mask.empty() || mask[static_cast<size_t>(i) * cols + j] != 0;
  }

  Node unary(Op op, Var a) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.rg = at(a).rg;
    return n;
  }

  Node binary(Op op, Var a, Var b) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.rg = at(a).rg || at(b).rg;
    return n;
  }

  Var finish(Node&& n, const char* opname) {
    if (check_finite_ && !n.val.all_finite())
      throw NumericError(std::string(opname) + " produced a non-finite value");
    return Var{this, push(std::move(n))};
  }

  int push(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void backprop(Node& n) {
    if (!n.rg || n.op == Op::Leaf) return;
    const Tensor& dy = n.grad;
    Node* na = n.a >= 0 ? &nodes_[n.a] : nullptr;
    Node* nb = n.b >= 0 ? &nodes_[n.b] : nullptr;
    const bool ga = na && na->rg;
    const bool gb = nb && nb->rg;

    switch (n.op) {
      case Op::MatMul: {
        const Tensor& A = na->val;
        const Tensor& B = nb->val;
        if (ga) {
          Tensor& dA = na->grad;
          for (int i = 0; i < A.rows; ++i)
            for (int k = 0; k < A.cols; ++k) {
              double s = 0.0;
              for (int j = 0; j < B.cols; ++j) s += dy(i, j) * B(k, j);
              dA(i, k) += s;
            }
        }
        if (gb) {
          Tensor& dB = nb->grad;
          for (int i = 0; i < A.rows; ++i)
            for (int k = 0; k < A.cols; ++k) {
              const double aik = A(i, k);
              if (aik == 0.0) continue;
              for (int j = 0; j < B.cols; ++j) dB(k, j) += aik * dy(i, j);
            }
        }
        break;
      }
      case Op::Add:
        if (ga) acc(na->grad, dy, 1.0);
        if (gb) acc(nb->grad, dy, 1.0);
        break;
      case Op::Sub:
        if (ga) acc(na->grad, dy, 1.0);
        if (gb) acc(nb->grad, dy, -1.0);
        break;
      case Op::Mul:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) na->grad.data[i] += dy.data[i] * nb->val.data[i];
        if (gb)
          for (size_t i = 0; i < dy.size(); ++i) nb->grad.data[i] += dy.data[i] * na->val.data[i];
        break;
      case Op::Neg:
        if (ga) acc(na->grad, dy, -1.0);
        break;
      case Op::AddScalar:
        if (ga) acc(na->grad, dy, 1.0);
        break;
      case Op::MulScalar:
        if (ga) acc(na->grad, dy, n.k);
        break;
      case Op::AddRowVec:
        if (ga) acc(na->grad, dy, 1.0);
        if (gb)
          for (int i = 0; i < dy.rows; ++i)
            for (int j = 0; j < dy.cols; ++j) nb->grad(0, j) += dy(i, j);
        break;
      case Op::Relu:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i)
            na->grad.data[i] += na->val.data[i] > 0.0 ? dy.data[i] : 0.0;
        break;
      case Op::LeakyRelu:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i)
            na->grad.data[i] += (na->val.data[i] > 0.0 ? 1.0 : n.k) * dy.data[i];
        break;
      case Op::Sigmoid:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) {
            const double y = n.val.data[i];
            na->grad.data[i] += y * (1.0 - y) * dy.data[i];
          }
        break;
      case Op::Exp:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) na->grad.data[i] += n.val.data[i] * dy.data[i];
        break;
      case Op::Log:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) na->grad.data[i] += dy.data[i] / na->val.data[i];
        break;
      case Op::Tanh:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) {
            const double y = n.val.data[i];
            na->grad.data[i] += (1.0 - y * y) * dy.data[i];
          }
        break;
      case Op::Rsqrt:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) {
            const double y = n.val.data[i];
            na->grad.data[i] += -0.5 * y * y * y * dy.data[i];
          }
        break;
      case Op::LogGamma:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i)
            na->grad.data[i] += digamma(na->val.data[i]) * dy.data[i];
        break;
      case Op::Digamma:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i)
            na->grad.data[i] += trigamma(na->val.data[i]) * dy.data[i];
        break;
      case Op::RowSoftmax:
        if (ga) {
          const Tensor& y = n.val;
          for (int i = 0; i < y.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < y.cols; ++j)
              if (active(n.mask, y.cols, i, j)) s += dy(i, j) * y(i, j);
            for (int j = 0; j < y.cols; ++j)
              if (active(n.mask, y.cols, i, j)) na->grad(i, j) += y(i, j) * (dy(i, j) - s);
          }
        }
        break;
      case Op::SumPool:
        if (ga)
          for (int i = 0; i < na->val.rows; ++i)
            for (int j = 0; j < na->val.cols; ++j) na->grad(i, j) += dy(0, j);
        break;
      case Op::SumAll:
        if (ga) {
          const double g = dy.data[0];
          for (double& v : na->grad.data) v += g;
        }
        break;
      case Op::Reshape:
        if (ga)
          for (size_t i = 0; i < dy.size(); ++i) na->grad.data[i] += dy.data[i];
        break;
      case Op::Transpose:
        if (ga)
          for (int i = 0; i < dy.rows; ++i)
            for (int j = 0; j < dy.cols; ++j) na->grad(j, i) += dy(i, j);
        break;
      case Op::Leaf:
        break;
    }
  }

  static void acc(Tensor& dst, const Tensor& src, double f) {
    for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += f * src.data[i];
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_ids_;
  bool check_finite_ = false;
};

/// Convenience: zero the gradients of a parameter set.
inline void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace amodrl
