#include "csl/similarity.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "csl/ops.hpp"

namespace csl {

template <typename T>
Tensor<T> sim_matrix(const Tensor<T>& a, const Tensor<T>& b, DotCounter* counter) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("sim_matrix: clip matrices " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " do not share D");
  }
  if (counter) counter->dots += a.dim(0) * b.dim(0);
  return ops::matmul_nt(a, b);
}

template <typename T>
std::vector<T> row_maxima(const Tensor<T>& sims) {
  const std::size_t n = sims.dim(0), m = sims.dim(1);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = sims.ptr() + i * m;
    out[i] = *std::max_element(row, row + m);
  }
  return out;
}

template <typename T>
double topk_of_maxima(std::vector<T> maxima, std::size_t k) {
  if (k < 1) throw ContractError("topk_cs: k must be >= 1");
  if (maxima.empty()) throw ContractError("topk_cs: no clips");
  // Order by value, then row index; stable_sort keeps equal maxima in row order.
  std::stable_sort(maxima.begin(), maxima.end(), std::greater<T>());
  const std::size_t take = std::min(k, maxima.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < take; ++i) acc += static_cast<double>(maxima[i]);
  return acc / static_cast<double>(take);
}

template <typename T>
double chamfer(const Tensor<T>& a, const Tensor<T>& b, DotCounter* counter) {
  return topk_of_maxima(row_maxima(sim_matrix(a, b, counter)), std::numeric_limits<std::size_t>::max());
}

template <typename T>
double topk_cs(const Tensor<T>& a, const Tensor<T>& b, std::size_t k, DotCounter* counter) {
  if (k < 1) throw ContractError("topk_cs: k must be >= 1");
  return topk_of_maxima(row_maxima(sim_matrix(a, b, counter)), k);
}

#define CSL_INSTANTIATE(T)                                                              \
  template Tensor<T> sim_matrix(const Tensor<T>&, const Tensor<T>&, DotCounter*);       \
  template std::vector<T> row_maxima(const Tensor<T>&);                                 \
  template double topk_of_maxima(std::vector<T>, std::size_t);                          \
  template double chamfer(const Tensor<T>&, const Tensor<T>&, DotCounter*);             \
  template double topk_cs(const Tensor<T>&, const Tensor<T>&, std::size_t, DotCounter*);

CSL_INSTANTIATE(float)
CSL_INSTANTIATE(double)

}  // namespace csl
