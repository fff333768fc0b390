#include "smoothar/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "smoothar/error.hpp"

namespace smoothar::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

ConstMatMap as_mat(const Tensor& t) { return ConstMatMap(t.data().data(), t.rows(), t.cols()); }
MatMap as_mat(Tensor& t) { return MatMap(t.data().data(), t.rows(), t.cols()); }

enum class Broadcast { Same, Rows, Scalar };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (a.rank() == 2 && b.rank() == 1 && b.numel() == a.cols()) return Broadcast::Rows;
  if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Rows;
  if (b.numel() == 1) return Broadcast::Scalar;
  throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()) + " do not conform");
}

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return *a.tape();
}

template <typename F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Reduction geometry: view x as (outer, len, inner) where `len` is reduced.
struct Reduction {
  std::size_t outer = 1, len = 1, inner = 1;
  Shape out_shape;
};

Reduction reduction_of(const Tensor& x, std::size_t axis) {
  if (x.rank() == 0 || axis >= x.rank()) {
    throw DimensionError("reduction axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  }
  Reduction r;
  if (x.rank() == 1) {
    r.len = x.shape()[0];
  } else if (axis == 0) {
    r.len = x.shape()[0];
    r.inner = x.shape()[1];
    r.out_shape = {x.shape()[1]};
  } else {
    r.outer = x.shape()[0];
    r.len = x.shape()[1];
    r.out_shape = {x.shape()[0]};
  }
  return r;
}

void accumulate(std::vector<Tensor>& grads, std::size_t id, const Tensor& shape_of, auto&& fill) {
  Tensor& g = grads[id];
  if (g.shape() != shape_of.shape() || g.numel() != shape_of.numel()) g = Tensor(shape_of.shape());
  fill(g);
}

// Reduce an upstream gradient of a's shape to b's broadcast shape.
void reduce_broadcast(Broadcast kind, const Tensor& upstream_like, Tensor& gb, double sign = 1.0) {
  auto src = upstream_like.data();
  auto dst = gb.data();
  switch (kind) {
    case Broadcast::Same:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] += sign * src[i];
      break;
    case Broadcast::Rows: {
      const std::size_t cols = gb.numel();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i % cols] += sign * src[i];
      break;
    }
    case Broadcast::Scalar: {
      double s = 0;
      for (double v : src) s += v;
      dst[0] += sign * s;
      break;
    }
  }
}

double broadcast_at(Broadcast kind, const Tensor& b, std::size_t i) {
  switch (kind) {
    case Broadcast::Same:
      return b[i];
    case Broadcast::Rows:
      return b[i % b.numel()];
    case Broadcast::Scalar:
      return b[0];
  }
  return 0.0;
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::variable(Tensor value) {
  Node node;
  node.kind = OpKind::Leaf;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.kind = OpKind::Leaf;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, Tensor saved, std::size_t axis,
                 double scalar) {
  Node node;
  node.kind = kind;
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  if (node.requires_grad) node.saved = std::move(saved);
  node.axis = axis;
  node.scalar = scalar;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::custom(std::span<const Var> inputs, Tensor value, CustomBackward backward) {
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError("custom op input recorded on a different tape");
    ids.push_back(v.id());
  }
  Var out = record(OpKind::Custom, std::move(ids), std::move(value));
  nodes_.back().custom = std::move(backward);
  return out;
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ContractError("loss recorded on a different tape");
  const Node& root = nodes_.at(loss.id());
  if (root.value.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(root.value.shape(), 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || node.kind == OpKind::Leaf || grads[id].empty()) continue;
    backward_node(node, grads[id], grads);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (grads[id].shape() != nodes_[id].value.shape() || grads[id].numel() != nodes_[id].value.numel()) {
      grads[id] = Tensor(nodes_[id].value.shape());
    }
  }
  return Gradients(std::move(grads));
}

void Tape::backward_node(const Node& node, const Tensor& g, std::vector<Tensor>& grads) const {
  auto wants = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };
  auto in_value = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };

  switch (node.kind) {
    case OpKind::Leaf:
      return;

    case OpKind::MatMul:
    case OpKind::MaskedMatMul: {
      const Tensor& a = in_value(0);
      const Tensor& w = node.kind == OpKind::MatMul ? in_value(1) : node.saved;
      if (wants(0)) {
        accumulate(grads, node.inputs[0], a, [&](Tensor& ga) { as_mat(ga).noalias() += as_mat(g) * as_mat(w).transpose(); });
      }
      if (wants(1)) {
        accumulate(grads, node.inputs[1], in_value(1), [&](Tensor& gw) {
          if (node.kind == OpKind::MatMul) {
            as_mat(gw).noalias() += as_mat(a).transpose() * as_mat(g);
          } else {
            RowMat full = as_mat(a).transpose() * as_mat(g);
            as_mat(gw).array() += full.array() * as_mat(in_value(2)).array();
          }
        });
      }
      return;
    }

    case OpKind::Add:
    case OpKind::Sub: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const Broadcast kind = classify(a, b, "add");
      if (wants(0)) accumulate(grads, node.inputs[0], a, [&](Tensor& ga) { reduce_broadcast(Broadcast::Same, g, ga); });
      if (wants(1)) {
        const double sign = node.kind == OpKind::Add ? 1.0 : -1.0;
        accumulate(grads, node.inputs[1], b, [&](Tensor& gb) { reduce_broadcast(kind, g, gb, sign); });
      }
      return;
    }

    case OpKind::Mul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const Broadcast kind = classify(a, b, "mul");
      if (wants(0)) {
        accumulate(grads, node.inputs[0], a, [&](Tensor& ga) {
          for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * broadcast_at(kind, b, i);
        });
      }
      if (wants(1)) {
        Tensor prod(a.shape());
        for (std::size_t i = 0; i < prod.numel(); ++i) prod[i] = g[i] * a[i];
        accumulate(grads, node.inputs[1], b, [&](Tensor& gb) { reduce_broadcast(kind, prod, gb); });
      }
      return;
    }

    case OpKind::Relu:
    case OpKind::Tanh:
    case OpKind::Sigmoid:
    case OpKind::Exp:
    case OpKind::Log:
    case OpKind::Neg:
    case OpKind::Softplus:
    case OpKind::Scale: {
      if (!wants(0)) return;
      const Tensor& x = in_value(0);
      const Tensor& y = node.value;
      accumulate(grads, node.inputs[0], x, [&](Tensor& gx) {
        for (std::size_t i = 0; i < gx.numel(); ++i) {
          double d = 0.0;
          switch (node.kind) {
            case OpKind::Relu: d = x[i] > 0 ? 1.0 : 0.0; break;
            case OpKind::Tanh: d = 1.0 - y[i] * y[i]; break;
            case OpKind::Sigmoid: d = y[i] * (1.0 - y[i]); break;
            case OpKind::Exp: d = y[i]; break;
            case OpKind::Log: d = 1.0 / x[i]; break;
            case OpKind::Neg: d = -1.0; break;
            case OpKind::Softplus: d = stable_sigmoid(x[i]); break;
            case OpKind::Scale: d = node.scalar; break;
            default: break;
          }
          gx[i] += g[i] * d;
        }
      });
      return;
    }

    case OpKind::LogSumExp:
    case OpKind::Sum: {
      if (!wants(0)) return;
      const Tensor& x = in_value(0);
      const Reduction r = reduction_of(x, node.axis);
      accumulate(grads, node.inputs[0], x, [&](Tensor& gx) {
        for (std::size_t o = 0; o < r.outer; ++o)
          for (std::size_t l = 0; l < r.len; ++l)
            for (std::size_t in = 0; in < r.inner; ++in) {
              const std::size_t src = (o * r.len + l) * r.inner + in;
              const double up = g[o * r.inner + in];
              gx[src] += node.kind == OpKind::Sum ? up : up * node.saved[src];
            }
      });
      return;
    }

    case OpKind::ConcatCols: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const std::size_t ca = a.cols(), cb = b.cols(), rows = a.rows();
      if (wants(0)) {
        accumulate(grads, node.inputs[0], a, [&](Tensor& ga) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
        });
      }
      if (wants(1)) {
        accumulate(grads, node.inputs[1], b, [&](Tensor& gb) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
        });
      }
      return;
    }

    case OpKind::SliceCols: {
      if (!wants(0)) return;
      const Tensor& x = in_value(0);
      const std::size_t begin = node.axis;
      const std::size_t width = node.value.cols();
      accumulate(grads, node.inputs[0], x, [&](Tensor& gx) {
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < width; ++c) gx[r * x.cols() + begin + c] += g[r * width + c];
      });
      return;
    }

    case OpKind::Custom: {
      const std::size_t n = node.inputs.size();
      std::vector<const Tensor*> inputs(n);
      std::vector<Tensor> local(n);
      std::unique_ptr<bool[]> flags(new bool[n]);
      for (std::size_t k = 0; k < n; ++k) {
        inputs[k] = &in_value(k);
        flags[k] = wants(k);
        if (flags[k]) local[k] = Tensor(inputs[k]->shape());
      }
      node.custom(g, inputs, local, std::span<const bool>(flags.get(), n));
      for (std::size_t k = 0; k < n; ++k) {
        if (!flags[k]) continue;
        accumulate(grads, node.inputs[k], *inputs[k], [&](Tensor& gk) { reduce_broadcast(Broadcast::Same, local[k], gk); });
      }
      return;
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul: shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) +
                         " do not conform");
  }
  Tensor out(Shape{av.rows(), bv.cols()});
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  return tape.record(OpKind::MatMul, {a.id(), b.id()}, std::move(out));
}

Var masked_matmul(const Var& a, const Var& w, const Var& mask) {
  Tape& tape = same_tape(a, w);
  same_tape(w, mask);
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  const Tensor& mv = mask.value();
  if (av.rank() != 2 || wv.rank() != 2 || av.cols() != wv.rows()) {
    throw DimensionError("masked_matmul: shapes " + shape_string(av.shape()) + " and " + shape_string(wv.shape()) +
                         " do not conform");
  }
  if (mv.shape() != wv.shape()) {
    throw DimensionError("masked_matmul: mask " + shape_string(mv.shape()) + " vs weight " + shape_string(wv.shape()));
  }
  if (mask.requires_grad()) throw ContractError("masked_matmul: mask must be a constant");
  Tensor masked(wv.shape());
  as_mat(masked).array() = as_mat(wv).array() * as_mat(mv).array();
  Tensor out(Shape{av.rows(), wv.cols()});
  as_mat(out).noalias() = as_mat(av) * as_mat(masked);
  return tape.record(OpKind::MaskedMatMul, {a.id(), w.id(), mask.id()}, std::move(out), std::move(masked));
}

namespace {

template <typename F>
Var binary(OpKind kind, const char* name, const Var& a, const Var& b, F f) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = classify(av, bv, name);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(av[i], broadcast_at(bc, bv, i));
  return tape.record(kind, {a.id(), b.id()}, std::move(out));
}

template <typename F>
Var unary(OpKind kind, const Var& x, F f, double scalar = 0.0) {
  if (!x.tape()) throw ContractError("unbound Var");
  Tensor out = map_unary(x.value(), f);
  return x.tape()->record(kind, {x.id()}, std::move(out), {}, 0, scalar);
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(OpKind::Add, "add", a, b, [](double x, double y) { return x + y; }); }
Var sub(const Var& a, const Var& b) { return binary(OpKind::Sub, "sub", a, b, [](double x, double y) { return x - y; }); }
Var mul(const Var& a, const Var& b) { return binary(OpKind::Mul, "mul", a, b, [](double x, double y) { return x * y; }); }

Var relu(const Var& x) { return unary(OpKind::Relu, x, [](double v) { return v > 0 ? v : 0.0; }); }
Var tanh(const Var& x) { return unary(OpKind::Tanh, x, [](double v) { return std::tanh(v); }); }
Var sigmoid(const Var& x) { return unary(OpKind::Sigmoid, x, stable_sigmoid); }
Var exp(const Var& x) { return unary(OpKind::Exp, x, [](double v) { return std::exp(v); }); }
Var neg(const Var& x) { return unary(OpKind::Neg, x, [](double v) { return -v; }); }
Var softplus(const Var& x) { return unary(OpKind::Softplus, x, stable_softplus); }
Var scale(const Var& x, double factor) {
  return unary(OpKind::Scale, x, [factor](double v) { return v * factor; }, factor);
}

Var log(const Var& x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(OpKind::Log, x, [](double v) { return std::log(v); });
}

Var logsumexp(const Var& x, std::size_t axis) {
  if (!x.tape()) throw ContractError("unbound Var");
  const Tensor& xv = x.value();
  const Reduction r = reduction_of(xv, axis);
  Tensor out(r.out_shape);
  Tensor weights(xv.shape());
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < r.outer; ++o)
    for (std::size_t in = 0; in < r.inner; ++in) {
      double m = neg_inf;
      for (std::size_t l = 0; l < r.len; ++l) m = std::max(m, xv[(o * r.len + l) * r.inner + in]);
      double& dst = out[o * r.inner + in];
      if (m == neg_inf) {
        dst = neg_inf;
        continue;
      }
      double s = 0.0;
      for (std::size_t l = 0; l < r.len; ++l) {
        const std::size_t i = (o * r.len + l) * r.inner + in;
        weights[i] = std::exp(xv[i] - m);
        s += weights[i];
      }
      for (std::size_t l = 0; l < r.len; ++l) weights[(o * r.len + l) * r.inner + in] /= s;
      dst = m + std::log(s);
    }
  return x.tape()->record(OpKind::LogSumExp, {x.id()}, std::move(out), std::move(weights), axis);
}

Var sum(const Var& x, std::size_t axis) {
  if (!x.tape()) throw ContractError("unbound Var");
  const Tensor& xv = x.value();
  const Reduction r = reduction_of(xv, axis);
  Tensor out(r.out_shape);
  for (std::size_t o = 0; o < r.outer; ++o)
    for (std::size_t l = 0; l < r.len; ++l)
      for (std::size_t in = 0; in < r.inner; ++in) out[o * r.inner + in] += xv[(o * r.len + l) * r.inner + in];
  return x.tape()->record(OpKind::Sum, {x.id()}, std::move(out), {}, axis);
}

Var sum(const Var& x) {
  Var flat = x;
  if (x.value().rank() == 2) flat = sum(x, 1);
  if (flat.value().rank() == 0) return flat;
  return sum(flat, 0);
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) +
                         " do not conform");
  }
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out(Shape{av.rows(), ca + cb});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data().begin() + r * ca, ca, out.data().begin() + r * (ca + cb));
    std::copy_n(bv.data().begin() + r * cb, cb, out.data().begin() + r * (ca + cb) + ca);
  }
  return tape.record(OpKind::ConcatCols, {a.id(), b.id()}, std::move(out));
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  if (!x.tape()) throw ContractError("unbound Var");
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || begin > end || end > xv.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         shape_string(xv.shape()));
  }
  const std::size_t width = end - begin;
  Tensor out(Shape{xv.rows(), width});
  for (std::size_t r = 0; r < xv.rows(); ++r)
    std::copy_n(xv.data().begin() + r * xv.cols() + begin, width, out.data().begin() + r * width);
  return x.tape()->record(OpKind::SliceCols, {x.id()}, std::move(out), {}, begin);
}

}  // namespace smoothar::diff
