#pragma once

#include <cstddef>

#include "csl/tensor.hpp"

// Tape-free tensor kernels. The differentiable versions in autograd.hpp call
// these for their forward pass.
namespace csl::ops {

// [n,k] x [k,m] -> [n,m]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// [n,k] x [m,k]^T -> [n,m]
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

// [n,k]^T x [n,m] -> [k,m]
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b);

// Batched product over a leading group axis: [g,n,k] x [g,k,m] -> [g,n,m], or
// with transpose_b: [g,n,k] x [g,m,k]^T -> [g,n,m].
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

// [g,n,k]^T x [g,n,m] -> [g,k,m]
template <typename T>
Tensor<T> bmm_tn(const Tensor<T>& a, const Tensor<T>& b);

// Swaps the last two axes (rank 2 or 3).
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

}  // namespace csl::ops
