#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpmtl/errors.hpp"
#include "dpmtl/tensor.hpp"

namespace dpmtl::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape{nullptr};
  std::uint32_t id{0};
  const Tensor& value() const;
  const Tensor& grad() const;
};

// Reverse-mode tape over dense tensors. Nodes are recorded in construction
// order, which is already a topological order; backward() walks it in reverse.
// Accumulation order is therefore fixed, making runs bit-reproducible.
class Tape {
  enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Mul,
    Scale,
    MatMul,
    Concat,
    GatherRows,
    Sigmoid,
    Tanh,
    Relu,
    LogSoftmax,
    LogSumExp,
    Flatten,
    Sum,
    Mean,
  };

  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

  struct Node {
    Op op;
    std::uint32_t in0{kNone};
    std::uint32_t in1{kNone};
    std::vector<std::uint32_t> idx;  // gather rows, LSE subset, or concat children
    double c{0.0};
    Tensor value;
    Tensor grad;
    Tensor* param{nullptr};
  };

 public:
  // Registers a trainable parameter. The value is copied; gradients are looked
  // up afterwards with grad_of(). Repeated registration returns the same node.
  Var leaf(Tensor& param) {
    auto it = leaf_ids_.find(&param);
    if (it != leaf_ids_.end()) return {this, it->second};
    Node n;
    n.op = Op::Leaf;
    n.value = param;
    n.param = &param;
    const Var v = push(std::move(n));
    leaf_ids_.emplace(&param, v.id);
    return v;
  }

  Var constant(Tensor value) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(value);
    return push(std::move(n));
  }

  Var constant(double v) { return constant(Tensor::scalar(v)); }

  Var add(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (!x.same_shape(y)) throw ShapeError("add: " + x.shape_str() + " vs " + y.shape_str());
    Node n = node2(Op::Add, a, b, x.zeros_like());
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + y[i];
    return record(std::move(n), "add");
  }

  Var mul(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (!x.same_shape(y)) throw ShapeError("mul: " + x.shape_str() + " vs " + y.shape_str());
    Node n = node2(Op::Mul, a, b, x.zeros_like());
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * y[i];
    return record(std::move(n), "mul");
  }

  Var scale(Var a, double c) {
    const Tensor& x = val(a);
    Node n = node1(Op::Scale, a, x.zeros_like());
    n.c = c;
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = c * x[i];
    return record(std::move(n), "scale");
  }

  // (p x q) @ (q x r) -> (p x r); a rank-1 right operand is treated as a
  // column, producing a rank-1 result of length p.
  Var matmul(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (x.rank() != 2) throw ShapeError("matmul: left operand must be a matrix, got " + x.shape_str());
    const std::size_t p = x.rows(), q = x.cols();
    const std::size_t r = (y.rank() == 2) ? y.cols() : 1;
    const std::size_t yq = (y.rank() == 2) ? y.rows() : y.size();
    if (y.rank() > 2 || yq != q)
      throw ShapeError("matmul: " + x.shape_str() + " @ " + y.shape_str());
    Tensor out = (y.rank() == 2) ? Tensor::zeros_matrix(p, r) : Tensor::zeros_vector(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t k = 0; k < q; ++k) {
        const double xv = x[i * q + k];
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < r; ++j) out[i * r + j] += xv * y[k * r + j];
      }
    Node n = node2(Op::MatMul, a, b, std::move(out));
    return record(std::move(n), "matmul");
  }

  // Concatenates rank-1 (or scalar) parts into one vector.
  Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    std::size_t total = 0;
    for (const Var& p : parts) {
      if (val(p).rank() > 1) throw ShapeError("concat: rank-1 inputs only, got " + val(p).shape_str());
      total += val(p).size();
    }
    Tensor out = Tensor::zeros_vector(total);
    Node n;
    n.op = Op::Concat;
    n.idx.reserve(parts.size());
    std::size_t at = 0;
    for (const Var& p : parts) {
      n.idx.push_back(p.id);
      const Tensor& t = val(p);
      std::copy(t.values().begin(), t.values().end(), out.values().begin() + at);
      at += t.size();
    }
    n.value = std::move(out);
    return record(std::move(n), "concat");
  }

  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

  // Selects rows of a matrix (or elements of a vector). Duplicate rows are
  // allowed; their gradients accumulate.
  Var gather_rows(Var m, std::vector<std::uint32_t> rows) {
    const Tensor& x = val(m);
    const std::size_t nrows = x.rows();
    const std::size_t width = (x.rank() == 2) ? x.cols() : 1;
    for (std::uint32_t r : rows)
      if (r >= nrows)
        throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " + x.shape_str());
    Tensor out = (x.rank() == 2) ? Tensor::zeros_matrix(rows.size(), width)
                                 : Tensor::zeros_vector(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy_n(x.values().begin() + rows[i] * width, width, out.values().begin() + i * width);
    Node n = node1(Op::GatherRows, m, std::move(out));
    n.idx = std::move(rows);
    return record(std::move(n), "gather_rows");
  }

  Var gather_row(Var m, std::size_t row) { return gather_rows(m, {static_cast<std::uint32_t>(row)}); }

  Var sigmoid(Var a) {
    const Tensor& x = val(a);
    Node n = node1(Op::Sigmoid, a, x.zeros_like());
    for (std::size_t i = 0; i < x.size(); ++i)
      n.value[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                               : std::exp(x[i]) / (1.0 + std::exp(x[i]));
    return record(std::move(n), "sigmoid");
  }

  Var tanh(Var a) {
    const Tensor& x = val(a);
    Node n = node1(Op::Tanh, a, x.zeros_like());
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = std::tanh(x[i]);
    return record(std::move(n), "tanh");
  }

  Var relu(Var a) {
    const Tensor& x = val(a);
    Node n = node1(Op::Relu, a, x.zeros_like());
    for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] > 0.0 ? x[i] : 0.0;
    return record(std::move(n), "relu");
  }

  // Log-softmax over the last dimension; rank-1 input is one row.
  Var log_softmax(Var a) {
    const Tensor& x = val(a);
    const std::size_t cols = (x.rank() == 2) ? x.cols() : x.size();
    if (cols == 0) throw ShapeError("log_softmax: empty input");
    const std::size_t rows = x.size() / cols;
    Node n = node1(Op::LogSoftmax, a, x.zeros_like());
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = x.values().data() + r * cols;
      double m = row[0];
      for (std::size_t j = 1; j < cols; ++j) m = std::max(m, row[j]);
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += std::exp(row[j] - m);
      const double lse = m + std::log(s);
      for (std::size_t j = 0; j < cols; ++j) n.value[r * cols + j] = row[j] - lse;
    }
    return record(std::move(n), "log_softmax");
  }

  // log sum_{i in subset} exp(x_i) over flat indices, as a scalar. With a
  // singleton subset this is just element selection, which is how losses pick
  // one log-probability off a row.
  Var log_sum_exp(Var a, std::vector<std::uint32_t> subset) {
    const Tensor& x = val(a);
    if (subset.empty()) throw ShapeError("log_sum_exp: empty index subset");
    for (std::uint32_t i : subset)
      if (i >= x.size())
        throw ShapeError("log_sum_exp: index " + std::to_string(i) + " out of range for " + x.shape_str());
    double m = x[subset[0]];
    for (std::uint32_t i : subset) m = std::max(m, x[i]);
    double s = 0.0;
    for (std::uint32_t i : subset) s += std::exp(x[i] - m);
    Node n = node1(Op::LogSumExp, a, Tensor::scalar(m + std::log(s)));
    n.idx = std::move(subset);
    return record(std::move(n), "log_sum_exp");
  }

  // Shape-only view of the values as one vector; the adjoint is the identity.
  Var flatten(Var a) {
    const Tensor& x = val(a);
    Tensor out = (x.rank() == 1) ? x : Tensor::from_vector(x.values());
    return push(node1(Op::Flatten, a, std::move(out)));
  }

  Var sum(Var a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (double v : x.values()) s += v;
    return record(node1(Op::Sum, a, Tensor::scalar(s)), "sum");
  }

  Var mean(Var a) {
    const Tensor& x = val(a);
    if (x.size() == 0) throw ShapeError("mean: empty input");
    double s = 0.0;
    for (double v : x.values()) s += v;
    Node n = node1(Op::Mean, a, Tensor::scalar(s / static_cast<double>(x.size())));
    return record(std::move(n), "mean");
  }

  // Gradient of a scalar loss w.r.t. every node. Unreached leaves keep zero
  // gradients.
  void backward(Var loss) {
    if (loss.tape != this) throw ShapeError("backward: loss from another tape");
    const Tensor& lv = nodes_[loss.id].value;
    if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());
    for (Node& n : nodes_) n.grad = n.value.zeros_like();
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) backprop(nodes_[i]);
    has_grads_ = true;
  }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  const Tensor& grad(Var v) const {
    if (!has_grads_) throw NumericError("grad: backward() has not run");
    return nodes_[v.id].grad;
  }

  // Gradient w.r.t. a registered parameter; zeros if it never joined the tape.
  Tensor grad_of(const Tensor& param) const {
    auto it = leaf_ids_.find(const_cast<Tensor*>(&param));
    if (it == leaf_ids_.end()) return param.zeros_like();
    if (!has_grads_) throw NumericError("grad_of: backward() has not run");
    return nodes_[it->second].grad;
  }

  void clear() {
    nodes_.clear();
    leaf_ids_.clear();
    has_grads_ = false;
  }

  std::size_t size() const { return nodes_.size(); }

  // Distance of the closest relu input to its kink. Finite differences are
  // meaningless within epsilon of the kink; gradient-check harnesses use this
  // to redraw such instances.
  double min_relu_input_abs() const {
    double min_abs = std::numeric_limits<double>::infinity();
    for (const Node& n : nodes_) {
      if (n.op != Op::Relu) continue;
      for (double v : nodes_[n.in0].value.values()) min_abs = std::min(min_abs, std::abs(v));
    }
    return min_abs;
  }

 private:
  friend struct Var;

  const Tensor& val(Var v) const {
    if (v.tape != this) throw ShapeError("operand from another tape");
    return nodes_[v.id].value;
  }

  Node node1(Op op, Var a, Tensor out) {
    Node n;
    n.op = op;
    n.in0 = a.id;
    n.value = std::move(out);
    return n;
  }

  Node node2(Op op, Var a, Var b, Tensor out) {
    Node n = node1(op, a, std::move(out));
    n.in1 = b.id;
    return n;
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Var record(Node n, const char* opname) {
    ensure_finite(n.value, opname);
    return push(std::move(n));
  }

  void backprop(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Add: {
        Tensor& ga = nodes_[n.in0].grad;
        Tensor& gb = nodes_[n.in1].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::Mul: {
        Tensor& ga = nodes_[n.in0].grad;
        Tensor& gb = nodes_[n.in1].grad;
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      }
      case Op::Scale: {
        Tensor& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c * g[i];
        break;
      }
      case Op::MatMul: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        Tensor& ga = nodes_[n.in0].grad;
        Tensor& gb = nodes_[n.in1].grad;
        const std::size_t p = a.rows(), q = a.cols();
        const std::size_t r = (b.rank() == 2) ? b.cols() : 1;
        // dA = dC B^T, dB = A^T dC
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < r; ++j) {
            const double gij = g[i * r + j];
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < q; ++k) {
              ga[i * q + k] += gij * b[k * r + j];
              gb[k * r + j] += gij * a[i * q + k];
            }
          }
        break;
      }
      case Op::Concat: {
        std::size_t at = 0;
        for (std::uint32_t child : n.idx) {
          Tensor& gc = nodes_[child].grad;
          for (std::size_t i = 0; i < gc.size(); ++i) gc[i] += g[at + i];
          at += gc.size();
        }
        break;
      }
      case Op::GatherRows: {
        Tensor& ga = nodes_[n.in0].grad;
        const std::size_t width = n.value.size() / n.idx.size();
        for (std::size_t i = 0; i < n.idx.size(); ++i)
          for (std::size_t j = 0; j < width; ++j) ga[n.idx[i] * width + j] += g[i * width + j];
        break;
      }
      case Op::Sigmoid: {
        Tensor& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          ga[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::Tanh: {
        Tensor& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          ga[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::Relu: {
        Tensor& ga = nodes_[n.in0].grad;
        const Tensor& a = nodes_[n.in0].value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::LogSoftmax: {
        Tensor& ga = nodes_[n.in0].grad;
        const std::size_t cols = (n.value.rank() == 2) ? n.value.cols() : n.value.size();
        const std::size_t rows = n.value.size() / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          double gsum = 0.0;
          for (std::size_t j = 0; j < cols; ++j) gsum += g[r * cols + j];
          for (std::size_t j = 0; j < cols; ++j)
            ga[r * cols + j] += g[r * cols + j] - std::exp(n.value[r * cols + j]) * gsum;
        }
        break;
      }
      case Op::LogSumExp: {
        Tensor& ga = nodes_[n.in0].grad;
        const Tensor& a = nodes_[n.in0].value;
        const double z = n.value[0];
        for (std::uint32_t i : n.idx) ga[i] += g[0] * std::exp(a[i] - z);
        break;
      }
      case Op::Flatten: {
        Tensor& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::Sum: {
        Tensor& ga = nodes_[n.in0].grad;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::Mean: {
        Tensor& ga = nodes_[n.in0].grad;
        const double inv = 1.0 / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<Tensor*, std::uint32_t> leaf_ids_;
  bool has_grads_{false};
};

inline const Tensor& Var::value() const { return tape->value(*this); }
inline const Tensor& Var::grad() const { return tape->grad(*this); }

// Central-difference verification of reverse-mode gradients. Returns the worst
// relative error max |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// over every coordinate of every listed parameter. A central difference
// cannot resolve derivatives below |f| * eps_machine / (2 epsilon) -- the two
// evaluations differ by rounding dust only -- so values under that resolution
// are reported as zero on both sides.
inline double check_gradients(const std::function<Var(Tape&)>& f,
                              std::span<Tensor* const> params, double epsilon = 1e-5) {
  if (epsilon <= 0.0) throw ConfigError("check_gradients: epsilon must be positive");
  Tape tape;
  Var loss = f(tape);
  if (loss.value().size() != 1)
    throw ShapeError("check_gradients: f must return a scalar, got " + loss.value().shape_str());
  tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.push_back(tape.grad_of(*p));

  const auto eval = [&f]() {
    Tape t;
    return f(t).value()[0];
  };

  const double resolution = 64.0 * std::max(1.0, std::abs(loss.value()[0])) *
                            std::numeric_limits<double>::epsilon() / (2.0 * epsilon);
  double max_rel = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + epsilon;
      const double fp = eval();
      p[i] = orig - epsilon;
      const double fm = eval();
      p[i] = orig;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic[t][i];
      if (!std::isfinite(numeric) || !std::isfinite(a))
        throw NumericError("check_gradients: non-finite derivative at tensor " + std::to_string(t) +
                           " coordinate " + std::to_string(i));
      if (std::abs(a - numeric) < resolution) continue;  // below what the oracle can measure
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace dpmtl::ad
