#pragma once

#include <string>

#include "csl/autograd.hpp"
#include "csl/params.hpp"

// Transformer building blocks shared by the encoder and the PredMAE decoder.
namespace csl::nn {

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return add_bias(matmul(x, w), b);
}

template <typename T>
Var<T> linear(const BoundParams<T>& p, const std::string& prefix, const Var<T>& x) {
  return linear(x, p[prefix + ".w"], p[prefix + ".b"]);
}

template <typename T>
Var<T> norm(const BoundParams<T>& p, const std::string& prefix, const Var<T>& x) {
  return layer_norm(x, p[prefix + ".g"], p[prefix + ".b"]);
}

// Self-attention within `groups` independent sequences of `len` rows each.
// x is [groups * len, d] with each sequence contiguous; returns the projected
// output in the same layout. Uses `<prefix>.qkv` and `<prefix>.proj`.
template <typename T>
Var<T> self_attention(const BoundParams<T>& p, const std::string& prefix, const Var<T>& x,
                      std::size_t groups, std::size_t len, std::size_t heads);

// x + fc2(gelu(fc1(norm(x)))) with `<prefix>.norm`, `<prefix>.fc1`, `<prefix>.fc2`.
template <typename T>
Var<T> mlp_residual(const BoundParams<T>& p, const std::string& prefix, const Var<T>& x);

// Parameter initialisers: weights truncated normal (std 0.02), biases zero,
// layer-norm gain one.
void add_linear(ParamSet<float>& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
void add_norm(ParamSet<float>& ps, const std::string& prefix, std::size_t d);
void add_attention(ParamSet<float>& ps, const std::string& prefix, std::size_t d, Rng& rng);
void add_mlp(ParamSet<float>& ps, const std::string& prefix, std::size_t d, std::size_t hidden, Rng& rng);

inline constexpr double kInitStd = 0.02;

}  // namespace csl::nn
