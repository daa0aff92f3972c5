#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csl/tensor.hpp"

namespace csl {

using NodeId = std::size_t;

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  NodeId id_ = 0;
};

// Per-node gradient buffers produced by backward().
template <typename T>
class Gradients {
 public:
  explicit Gradients(const Tape<T>& tape);

  // Gradient of the output w.r.t. `v`; zeros when `v` did not reach it.
  Tensor<T> of(const Var<T>& v) const;
  Tensor<T> of(NodeId id) const;
  bool reached(NodeId id) const { return slots_[id].has_value(); }

  // Zero-initialised accumulation buffer for node `id` (used by backward rules).
  Tensor<T>& slot(NodeId id);

 private:
  const Tape<T>* tape_;
  std::vector<std::optional<Tensor<T>>> slots_;
};

// Append-only record of a computation. Parents always precede children, so
// reverse insertion order is a valid reverse topological order.
template <typename T>
class Tape {
 public:
  // Receives the node's own id and output gradient; accumulates into parent slots.
  using BackwardFn =
      std::function<void(NodeId self, const Tensor<T>& grad_out, Gradients<T>& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  // Records a derived node; requires_grad is inherited from the parents.
  Var<T> record(const char* op, Tensor<T> value, std::vector<NodeId> parents, BackwardFn backward);

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  const char* op(NodeId id) const { return nodes_.at(id).op; }
  const std::vector<NodeId>& parents(NodeId id) const { return nodes_.at(id).parents; }
  const BackwardFn& backward_fn(NodeId id) const { return nodes_.at(id).backward; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::vector<NodeId> parents;
    Tensor<T> value;
    BackwardFn backward;
    bool requires_grad;
  };
  std::vector<Node> nodes_;
};

// Reverse-mode sweep from a scalar output. Throws ContractError otherwise.
template <typename T>
Gradients<T> backward(Tape<T>& tape, const Var<T>& output);

// ---- differentiable operations -------------------------------------------
// Elementwise ops require identical shapes; no implicit broadcasting.

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& x, T c);
// x[..., d] + b[d]
template <typename T> Var<T> add_bias(const Var<T>& x, const Var<T>& bias);
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_b = false);
template <typename T> Var<T> transpose(const Var<T>& x);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> concat(const std::vector<Var<T>>& xs, std::size_t axis);
template <typename T> Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
// Row gather on a rank-2 tensor; repeated indices accumulate in backward.
template <typename T> Var<T> gather_rows(const Var<T>& x, std::vector<std::size_t> rows);
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> sum(const Var<T>& x, std::size_t axis);
template <typename T> Var<T> mean(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x, std::size_t axis);
template <typename T> Var<T> softmax(const Var<T>& x, std::size_t axis);
// Normalises the last axis, then applies gamma[d] and beta[d].
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));
template <typename T> Var<T> gelu(const Var<T>& x);
// Unit L2 norm along the last axis.
template <typename T> Var<T> l2_normalize(const Var<T>& x, T eps = T(1e-12));
// Mean squared error over all elements.
template <typename T> Var<T> mse(const Var<T>& pred, const Var<T>& target);
template <typename T> Var<T> exp(const Var<T>& x);
template <typename T> Var<T> log(const Var<T>& x);
template <typename T> Var<T> relu(const Var<T>& x);
// max(x, c) elementwise; the gradient passes where x > c.
template <typename T> Var<T> maximum(const Var<T>& x, T c);

// Scalar node with a caller-supplied value and vector-Jacobian product.
// `vjp(g)` returns one gradient tensor per input (shape of that input).
template <typename T>
Var<T> custom_scalar(const char* op, const std::vector<Var<T>>& inputs, T value,
                     std::function<std::vector<Tensor<T>>(T grad_out)> vjp);

}  // namespace csl
