#include "csl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csl::ops {

namespace {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

// c[n,m] += a[n,k] * b[k,m], all row-major.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    T* crow = c + i * m;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[n,m] += a[n,k] * b[m,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const T* brow = b + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * m + j] += acc;
    }
  }
}

// c[k,m] += a[n,k]^T * b[n,m]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({a.dim(0), b.dim(1)});
  gemm_nn(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: inner dimensions differ for " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({a.dim(0), b.dim(0)});
  gemm_nt(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(0));
  return c;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul_tn");
  require_rank(b, 2, "matmul_tn");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul_tn: leading dimensions differ for " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({a.dim(1), b.dim(1)});
  gemm_tn(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t g = a.dim(0), n = a.dim(1), k = a.dim(2);
  const std::size_t m = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != g || bk != k) {
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({g, n, m});
  for (std::size_t i = 0; i < g; ++i) {
    const T* ap = a.ptr() + i * n * k;
    const T* bp = b.ptr() + i * k * m;
    T* cp = c.ptr() + i * n * m;
    if (transpose_b) {
      gemm_nt(ap, bp, cp, n, k, m);
    } else {
      gemm_nn(ap, bp, cp, n, k, m);
    }
  }
  return c;
}

template <typename T>
Tensor<T> bmm_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 3, "bmm_tn");
  require_rank(b, 3, "bmm_tn");
  const std::size_t g = a.dim(0), n = a.dim(1), k = a.dim(2), m = b.dim(2);
  if (b.dim(0) != g || b.dim(1) != n) {
    throw ShapeError("bmm_tn: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({g, k, m});
  for (std::size_t i = 0; i < g; ++i) {
    gemm_tn(a.ptr() + i * n * k, b.ptr() + i * n * m, c.ptr() + i * k * m, n, k, m);
  }
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("transpose: expected rank 2 or 3, got " + shape_str(x.shape()));
  }
  const std::size_t g = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t r = x.dim(x.rank() - 2), c = x.dim(x.rank() - 1);
  Shape out_shape = x.shape();
  std::swap(out_shape[x.rank() - 2], out_shape[x.rank() - 1]);
  Tensor<T> out(out_shape);
  for (std::size_t b = 0; b < g; ++b) {
    const T* src = x.ptr() + b * r * c;
    T* dst = out.ptr() + b * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor<T> out(x.shape());
  const T* in = x.ptr();
  T* o = out.ptr();
  for (std::size_t a = 0; a < s.outer; ++a) {
    for (std::size_t c = 0; c < s.inner; ++c) {
      const std::size_t base = a * s.n * s.inner + c;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) mx = std::max(mx, in[base + i * s.inner]);
      T total{0};
      for (std::size_t i = 0; i < s.n; ++i) {
        const T e = std::exp(in[base + i * s.inner] - mx);
        o[base + i * s.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < s.n; ++i) o[base + i * s.inner] /= total;
    }
  }
  return out;
}

#define CSL_INSTANTIATE_OPS(T)                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> matmul_tn(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);             \
  template Tensor<T> bmm_tn(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> transpose(const Tensor<T>&);                               \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);

CSL_INSTANTIATE_OPS(float)
CSL_INSTANTIATE_OPS(double)

#undef CSL_INSTANTIATE_OPS

}  // namespace csl::ops
