#include "csl/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csl/ops.hpp"

namespace csl {

// ---- Gradients / Tape -----------------------------------------------------

template <typename T>
Gradients<T>::Gradients(const Tape<T>& tape) : tape_(&tape), slots_(tape.size()) {}

template <typename T>
Tensor<T> Gradients<T>::of(const Var<T>& v) const {
  return of(v.id());
}

template <typename T>
Tensor<T> Gradients<T>::of(NodeId id) const {
  if (id >= slots_.size()) throw ContractError("gradient requested for node outside the tape");
  if (slots_[id]) return *slots_[id];
  return Tensor<T>::zeros(tape_->value(id).shape());
}

template <typename T>
Tensor<T>& Gradients<T>::slot(NodeId id) {
  auto& s = slots_.at(id);
  if (!s) s.emplace(Tensor<T>::zeros(tape_->value(id).shape()));
  return *s;
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{"leaf", {}, std::move(value), nullptr, requires_grad});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value, std::vector<NodeId> parents,
                       BackwardFn backward) {
  bool rg = false;
  for (NodeId p : parents) {
    if (p >= nodes_.size()) throw ContractError(std::string(op) + ": parent is not on this tape");
    rg = rg || nodes_[p].requires_grad;
  }
  nodes_.push_back(Node{op, std::move(parents), std::move(value), std::move(backward), rg});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Gradients<T> backward(Tape<T>& tape, const Var<T>& output) {
  if (&output.tape() != &tape) throw ContractError("backward: output belongs to another tape");
  if (output.value().numel() != 1) {
    throw ContractError("backward: output must be scalar, got " + shape_str(output.shape()));
  }
  Gradients<T> grads(tape);
  grads.slot(output.id())[0] = T{1};
  for (NodeId id = output.id() + 1; id-- > 0;) {
    if (!grads.reached(id) || !tape.requires_grad(id)) continue;
    const auto& fn = tape.backward_fn(id);
    if (!fn) continue;
    fn(id, grads.slot(id), grads);
  }
  return grads;
}

// ---- helpers ----------------------------------------------------------------

namespace {

template <typename T>
void same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

template <typename T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  same_tape(a, b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename T>
bool wants(const Tape<T>& tape, NodeId id) {
  return tape.requires_grad(id);
}

// slot(id) += g * factor
template <typename T>
void accumulate(Gradients<T>& grads, NodeId id, const Tensor<T>& g, T factor = T{1}) {
  Tensor<T>& s = grads.slot(id);
  T* dst = s.ptr();
  const T* src = g.ptr();
  for (std::size_t i = 0; i < s.numel(); ++i) dst[i] += factor * src[i];
}

}  // namespace

// ---- elementwise --------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  Tape<T>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record("add", std::move(out), {ia, ib},
                     [&tape, ia, ib](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       if (wants(tape, ia)) accumulate(grads, ia, g);
                       if (wants(tape, ib)) accumulate(grads, ib, g);
                     });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  Tape<T>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record("sub", std::move(out), {ia, ib},
                     [&tape, ia, ib](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       if (wants(tape, ia)) accumulate(grads, ia, g);
                       if (wants(tape, ib)) accumulate(grads, ib, g, T{-1});
                     });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  Tape<T>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record("mul", std::move(out), {ia, ib},
                     [&tape, ia, ib](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& av = tape.value(ia);
                       const Tensor<T>& bv = tape.value(ib);
                       if (wants(tape, ia)) {
                         Tensor<T>& s = grads.slot(ia);
                         for (std::size_t i = 0; i < s.numel(); ++i) s[i] += g[i] * bv[i];
                       }
                       if (wants(tape, ib)) {
                         Tensor<T>& s = grads.slot(ib);
                         for (std::size_t i = 0; i < s.numel(); ++i) s[i] += g[i] * av[i];
                       }
                     });
}

template <typename T>
Var<T> scale(const Var<T>& x, T c) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = c * x.value()[i];
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("scale", std::move(out), {ix},
                     [ix, c](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       accumulate(grads, ix, g, c);
                     });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias) {
  same_tape(x, bias, "add_bias");
  const std::size_t d = bias.value().numel();
  if (bias.value().rank() != 1 || x.value().rank() == 0 || x.shape().back() != d) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  const std::size_t rows = x.value().numel() / d;
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = x.value()[r * d + j] + bias.value()[j];
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id(), ib = bias.id();
  return tape.record("add_bias", std::move(out), {ix, ib},
                     [&tape, ix, ib, rows, d](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       if (wants(tape, ix)) accumulate(grads, ix, g);
                       if (wants(tape, ib)) {
                         Tensor<T>& s = grads.slot(ib);
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < d; ++j) s[j] += g[r * d + j];
                         }
                       }
                     });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(x.value()[i]);
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("exp", std::move(out), {ix},
                     [&tape, ix](NodeId self, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& y = tape.value(self);
                       Tensor<T>& s = grads.slot(ix);
                       for (std::size_t i = 0; i < s.numel(); ++i) s[i] += g[i] * y[i];
                     });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(x.value()[i]);
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("log", std::move(out), {ix},
                     [&tape, ix](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& xv = tape.value(ix);
                       Tensor<T>& s = grads.slot(ix);
                       for (std::size_t i = 0; i < s.numel(); ++i) s[i] += g[i] / xv[i];
                     });
}

template <typename T>
Var<T> maximum(const Var<T>& x, T c) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(x.value()[i], c);
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("maximum", std::move(out), {ix},
                     [&tape, ix, c](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& xv = tape.value(ix);
                       Tensor<T>& s = grads.slot(ix);
                       for (std::size_t i = 0; i < s.numel(); ++i) {
                         if (xv[i] > c) s[i] += g[i];
                       }
                     });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return maximum(x, T{0});
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T v = x.value()[i];
    out[i] = T(0.5) * v * (T{1} + std::erf(v * kInvSqrt2));
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("gelu", std::move(out), {ix},
                     [&tape, ix](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
                       const Tensor<T>& xv = tape.value(ix);
                       Tensor<T>& s = grads.slot(ix);
                       for (std::size_t i = 0; i < s.numel(); ++i) {
                         const T v = xv[i];
                         const T cdf = T(0.5) * (T{1} + std::erf(v * kInvSqrt2));
                         const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
                         s[i] += g[i] * (cdf + v * pdf);
                       }
                     });
}

// ---- linear algebra -----------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  same_tape(a, b, "matmul");
  Tensor<T> out = ops::matmul(a.value(), b.value());
  Tape<T>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record("matmul", std::move(out), {ia, ib},
                     [&tape, ia, ib](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       if (wants(tape, ia)) accumulate(grads, ia, ops::matmul_nt(g, tape.value(ib)));
                       if (wants(tape, ib)) accumulate(grads, ib, ops::matmul_tn(tape.value(ia), g));
                     });
}

template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_b) {
  same_tape(a, b, "bmm");
  Tensor<T> out = ops::bmm(a.value(), b.value(), transpose_b);
  Tape<T>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record(
      "bmm", std::move(out), {ia, ib},
      [&tape, ia, ib, transpose_b](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
        const Tensor<T>& av = tape.value(ia);
        const Tensor<T>& bv = tape.value(ib);
        if (transpose_b) {
          // C = A B^T: dA = G B, dB = G^T A
          if (wants(tape, ia)) accumulate(grads, ia, ops::bmm(g, bv, false));
          if (wants(tape, ib)) accumulate(grads, ib, ops::bmm_tn(g, av));
        } else {
          // C = A B: dA = G B^T, dB = A^T G
          if (wants(tape, ia)) accumulate(grads, ia, ops::bmm(g, bv, true));
          if (wants(tape, ib)) accumulate(grads, ib, ops::bmm_tn(av, g));
        }
      });
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  Tensor<T> out = ops::transpose(x.value());
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("transpose", std::move(out), {ix},
                     [ix](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       accumulate(grads, ix, ops::transpose(g));
                     });
}

// ---- shape manipulation ---------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("reshape", std::move(out), {ix},
                     [ix](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       accumulate(grads, ix, g);
                     });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = xs.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& x : xs) {
    same_tape(xs.front(), x, "concat");
    const Shape& s = x.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  Tensor<T> out(out_shape);
  std::vector<NodeId> parents;
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const std::size_t w = x.shape()[axis] * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(x.value().ptr() + o * w, w, out.ptr() + o * os.n * os.inner + offset);
    }
    offset += w;
    parents.push_back(x.id());
    widths.push_back(w);
  }
  Tape<T>& tape = xs.front().tape();
  return tape.record(
      "concat", std::move(out), parents,
      [&tape, parents, widths, os](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < parents.size(); ++k) {
          const std::size_t w = widths[k];
          if (wants(tape, parents[k])) {
            Tensor<T>& s = grads.slot(parents[k]);
            for (std::size_t o = 0; o < os.outer; ++o) {
              const T* src = g.ptr() + o * os.n * os.inner + off;
              T* dst = s.ptr() + o * w;
              for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
            }
          }
          off += w;
        }
      });
}

template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (begin >= end || end > s.n) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t w = (end - begin) * s.inner;
  Tensor<T> out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.value().ptr() + o * s.n * s.inner + begin * s.inner, w, out.ptr() + o * w);
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("slice", std::move(out), {ix},
                     [ix, s, begin, w](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       Tensor<T>& dst = grads.slot(ix);
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         T* d = dst.ptr() + o * s.n * s.inner + begin * s.inner;
                         const T* src = g.ptr() + o * w;
                         for (std::size_t i = 0; i < w; ++i) d[i] += src[i];
                       }
                     });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::vector<std::size_t> rows) {
  if (x.value().rank() != 2) throw ShapeError("gather_rows: expected rank 2, got " + shape_str(x.shape()));
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  Tensor<T> out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       shape_str(x.shape()));
    }
    std::copy_n(x.value().ptr() + rows[r] * d, d, out.ptr() + r * d);
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("gather_rows", std::move(out), {ix},
                     [ix, rows = std::move(rows), d](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       Tensor<T>& dst = grads.slot(ix);
                       for (std::size_t r = 0; r < rows.size(); ++r) {
                         T* drow = dst.ptr() + rows[r] * d;
                         const T* grow = g.ptr() + r * d;
                         for (std::size_t j = 0; j < d; ++j) drow[j] += grow[j];
                       }
                     });
}

// ---- reductions -------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("sum", Tensor<T>::scalar(total), {ix},
                     [ix](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       Tensor<T>& s = grads.slot(ix);
                       const T gv = g[0];
                       for (std::size_t i = 0; i < s.numel(); ++i) s[i] += gv;
                     });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.value().numel()));
}

template <typename T>
Var<T> sum(const Var<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.shape().size(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  Tensor<T> out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.n; ++i) {
      const T* src = x.value().ptr() + (o * s.n + i) * s.inner;
      T* dst = out.ptr() + o * s.inner;
      for (std::size_t c = 0; c < s.inner; ++c) dst[c] += src[c];
    }
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("sum_axis", std::move(out), {ix},
                     [ix, s](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       Tensor<T>& dst = grads.slot(ix);
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.n; ++i) {
                           T* d = dst.ptr() + (o * s.n + i) * s.inner;
                           const T* src = g.ptr() + o * s.inner;
                           for (std::size_t c = 0; c < s.inner; ++c) d[c] += src[c];
                         }
                       }
                     });
}

template <typename T>
Var<T> mean(const Var<T>& x, std::size_t axis) {
  const std::size_t n = split_axis(x.shape(), axis).n;
  return scale(sum(x, axis), T{1} / static_cast<T>(n));
}

template <typename T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor<T> out = ops::softmax(x.value(), axis);
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("softmax", std::move(out), {ix},
                     [&tape, ix, s](NodeId self, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& y = tape.value(self);
                       Tensor<T>& dst = grads.slot(ix);
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t c = 0; c < s.inner; ++c) {
                           const std::size_t base = o * s.n * s.inner + c;
                           T dot{0};
                           for (std::size_t i = 0; i < s.n; ++i) {
                             dot += g[base + i * s.inner] * y[base + i * s.inner];
                           }
                           for (std::size_t i = 0; i < s.n; ++i) {
                             const std::size_t k = base + i * s.inner;
                             dst[k] += y[k] * (g[k] - dot);
                           }
                         }
                       }
                     });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  same_tape(x, gamma, "layer_norm");
  same_tape(x, beta, "layer_norm");
  if (x.value().rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: affine parameters must be [" + std::to_string(d) + "], got " +
                     shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  }
  const std::size_t rows = x.value().numel() / d;
  std::vector<T> rstd(rows);
  Tensor<T> out(x.shape());
  const T* xv = x.value().ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * d;
    T mu{0};
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    rstd[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      out[r * d + j] = (row[j] - mu) * rstd[r] * gamma.value()[j] + beta.value()[j];
    }
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id(), ig = gamma.id(), ib = beta.id();
  return tape.record(
      "layer_norm", std::move(out), {ix, ig, ib},
      [&tape, ix, ig, ib, d, rows, rstd = std::move(rstd)](NodeId, const Tensor<T>& g,
                                                           Gradients<T>& grads) {
        const T* xv = tape.value(ix).ptr();
        const T* gm = tape.value(ig).ptr();
        std::vector<T> xhat(d), gh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* row = xv + r * d;
          const T* grow = g.ptr() + r * d;
          T mu{0};
          for (std::size_t j = 0; j < d; ++j) mu += row[j];
          mu /= static_cast<T>(d);
          T mean_gh{0}, mean_gh_xhat{0};
          for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (row[j] - mu) * rstd[r];
            gh[j] = grow[j] * gm[j];
            mean_gh += gh[j];
            mean_gh_xhat += gh[j] * xhat[j];
          }
          mean_gh /= static_cast<T>(d);
          mean_gh_xhat /= static_cast<T>(d);
          if (wants(tape, ix)) {
            T* dx = grads.slot(ix).ptr() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              dx[j] += rstd[r] * (gh[j] - mean_gh - xhat[j] * mean_gh_xhat);
            }
          }
          if (wants(tape, ig)) {
            T* dg = grads.slot(ig).ptr();
            for (std::size_t j = 0; j < d; ++j) dg[j] += grow[j] * xhat[j];
          }
          if (wants(tape, ib)) {
            T* db = grads.slot(ib).ptr();
            for (std::size_t j = 0; j < d; ++j) db[j] += grow[j];
          }
        }
      });
}

template <typename T>
Var<T> l2_normalize(const Var<T>& x, T eps) {
  if (x.value().rank() == 0) throw ShapeError("l2_normalize: scalar input");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.value().numel() / d;
  std::vector<T> inv(rows);
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x.value().ptr() + r * d;
    T ss{0};
    for (std::size_t j = 0; j < d; ++j) ss += row[j] * row[j];
    inv[r] = T{1} / std::max(std::sqrt(ss), eps);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = row[j] * inv[r];
  }
  Tape<T>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record("l2_normalize", std::move(out), {ix},
                     [&tape, ix, d, rows, inv = std::move(inv)](NodeId self, const Tensor<T>& g,
                                                                Gradients<T>& grads) {
                       const T* y = tape.value(self).ptr();
                       T* dx = grads.slot(ix).ptr();
                       for (std::size_t r = 0; r < rows; ++r) {
                         T dot{0};
                         for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
                         for (std::size_t j = 0; j < d; ++j) {
                           dx[r * d + j] += inv[r] * (g[r * d + j] - y[r * d + j] * dot);
                         }
                       }
                     });
}

template <typename T>
Var<T> mse(const Var<T>& pred, const Var<T>& target) {
  same_shape(pred, target, "mse");
  const std::size_t n = pred.value().numel();
  T total{0};
  for (std::size_t i = 0; i < n; ++i) {
    const T e = pred.value()[i] - target.value()[i];
    total += e * e;
  }
  Tape<T>& tape = pred.tape();
  const NodeId ip = pred.id(), it = target.id();
  return tape.record("mse", Tensor<T>::scalar(total / static_cast<T>(n)), {ip, it},
                     [&tape, ip, it, n](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& p = tape.value(ip);
                       const Tensor<T>& t = tape.value(it);
                       const T c = T{2} * g[0] / static_cast<T>(n);
                       if (wants(tape, ip)) {
                         Tensor<T>& s = grads.slot(ip);
                         for (std::size_t i = 0; i < n; ++i) s[i] += c * (p[i] - t[i]);
                       }
                       if (wants(tape, it)) {
                         Tensor<T>& s = grads.slot(it);
                         for (std::size_t i = 0; i < n; ++i) s[i] -= c * (p[i] - t[i]);
                       }
                     });
}

template <typename T>
Var<T> custom_scalar(const char* op, const std::vector<Var<T>>& inputs, T value,
                     std::function<std::vector<Tensor<T>>(T grad_out)> vjp) {
  if (inputs.empty()) throw ContractError(std::string(op) + ": no inputs");
  std::vector<NodeId> parents;
  for (const auto& v : inputs) {
    same_tape(inputs.front(), v, op);
    parents.push_back(v.id());
  }
  Tape<T>& tape = inputs.front().tape();
  return tape.record(
      op, Tensor<T>::scalar(value), parents,
      [&tape, parents, vjp = std::move(vjp), op](NodeId, const Tensor<T>& g, Gradients<T>& grads) {
        std::vector<Tensor<T>> gin = vjp(g[0]);
        if (gin.size() != parents.size()) {
          throw ContractError(std::string(op) + ": vjp returned wrong number of gradients");
        }
        for (std::size_t k = 0; k < parents.size(); ++k) {
          if (!wants(tape, parents[k])) continue;
          if (gin[k].shape() != tape.value(parents[k]).shape()) {
            throw ShapeError(std::string(op) + ": vjp gradient shape mismatch");
          }
          accumulate(grads, parents[k], gin[k]);
        }
      });
}

// ---- instantiation ----------------------------------------------------------------

#define CSL_INSTANTIATE_AUTOGRAD(T)                                                        \
  template class Gradients<T>;                                                             \
  template class Tape<T>;                                                                  \
  template Gradients<T> backward(Tape<T>&, const Var<T>&);                                 \
  template Var<T> add(const Var<T>&, const Var<T>&);                                       \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                       \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                       \
  template Var<T> scale(const Var<T>&, T);                                                 \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                                  \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                    \
  template Var<T> bmm(const Var<T>&, const Var<T>&, bool);                                 \
  template Var<T> transpose(const Var<T>&);                                                \
  template Var<T> reshape(const Var<T>&, Shape);                                           \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                         \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t, std::size_t);             \
  template Var<T> gather_rows(const Var<T>&, std::vector<std::size_t>);                    \
  template Var<T> sum(const Var<T>&);                                                      \
  template Var<T> sum(const Var<T>&, std::size_t);                                         \
  template Var<T> mean(const Var<T>&);                                                     \
  template Var<T> mean(const Var<T>&, std::size_t);                                        \
  template Var<T> softmax(const Var<T>&, std::size_t);                                     \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);              \
  template Var<T> gelu(const Var<T>&);                                                     \
  template Var<T> l2_normalize(const Var<T>&, T);                                          \
  template Var<T> mse(const Var<T>&, const Var<T>&);                                       \
  template Var<T> exp(const Var<T>&);                                                      \
  template Var<T> log(const Var<T>&);                                                      \
  template Var<T> relu(const Var<T>&);                                                     \
  template Var<T> maximum(const Var<T>&, T);                                               \
  template Var<T> custom_scalar(const char*, const std::vector<Var<T>>&, T,                 \
                                std::function<std::vector<Tensor<T>>(T)>);

CSL_INSTANTIATE_AUTOGRAD(float)
CSL_INSTANTIATE_AUTOGRAD(double)

#undef CSL_INSTANTIATE_AUTOGRAD

}  // namespace csl
