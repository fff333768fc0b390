#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "smoothar/tensor.hpp"

namespace smoothar::diff {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  Leaf,
  MatMul,
  MaskedMatMul,
  Add,
  Sub,
  Mul,
  Relu,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  Neg,
  Softplus,
  LogSumExp,
  Sum,
  Scale,
  ConcatCols,
  SliceCols,
  Custom,
};

// Backward rule for an operation defined outside this module. `upstream`
// has the shape of the node value; implementations accumulate into
// `input_grads[i]` (pre-sized, zero-filled) for every input whose gradient
// is requested (`wants[i]`).
using CustomBackward =
    std::function<void(const Tensor& upstream, std::span<const Tensor* const> inputs,
                       std::span<Tensor> input_grads, std::span<const bool> wants)>;

// Gradients returned by Tape::backward, indexed by node.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}
  const Tensor& operator[](const Var& v) const { return grads_.at(v.id()); }

 private:
  std::vector<Tensor> grads_;
};

// Define-by-run recording of a computation. A tape has a single owner and
// is rebuilt for every forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose gradient is tracked (parameter or differentiable input).
  Var variable(Tensor value);
  // Leaf treated as a constant.
  Var constant(Tensor value);

  Var custom(std::span<const Var> inputs, Tensor value, CustomBackward backward);

  // Reverse sweep from a scalar node. Leaves unreachable from `loss`
  // receive zero gradients.
  Gradients backward(const Var& loss) const;

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  // Used by the operator implementations.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, Tensor saved = {},
             std::size_t axis = 0, double scalar = 0.0);

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor saved;  // op-specific forward state needed by the backward rule
    std::size_t axis = 0;
    double scalar = 0.0;
    bool requires_grad = false;
    CustomBackward custom;
  };

  void backward_node(const Node& node, const Tensor& upstream, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
};

// Dense operators. Elementwise binary ops accept identical shapes, a rank-1
// right operand broadcast over the leading batch dimension of a rank-2 left
// operand, or a single-element right operand.
Var matmul(const Var& a, const Var& b);
// a · (w ∘ mask); `mask` is a constant 0/1 tensor with the shape of w.
Var masked_matmul(const Var& a, const Var& w, const Var& mask);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var neg(const Var& x);
Var softplus(const Var& x);
Var logsumexp(const Var& x, std::size_t axis);
Var sum(const Var& x, std::size_t axis);
Var sum(const Var& x);  // all elements, scalar result
Var scale(const Var& x, double factor);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace smoothar::diff
