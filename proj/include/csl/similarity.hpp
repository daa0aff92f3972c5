#pragma once

#include <cstdint>
#include <vector>

#include "csl/tensor.hpp"

// Video-to-video scoring over clip matrices (n x D, unit-norm rows).
namespace csl {

inline constexpr std::size_t kDefaultTopK = 3;

// Counts clip-pair dot products, for measuring scoring work.
struct DotCounter {
  std::uint64_t dots = 0;
};

// A * B^T. Rows are accumulated in T.
template <typename T>
Tensor<T> sim_matrix(const Tensor<T>& a, const Tensor<T>& b, DotCounter* counter = nullptr);

// max_j S[i, j] for every row i, in row order.
template <typename T>
std::vector<T> row_maxima(const Tensor<T>& sims);

// Mean of the k largest row maxima. Maxima are sorted descending (equal
// values keep ascending row order) and the mean of the first min(k, n) is
// accumulated in double, so k >= n reproduces chamfer() bit for bit.
template <typename T>
double topk_of_maxima(std::vector<T> maxima, std::size_t k);

template <typename T>
double chamfer(const Tensor<T>& a, const Tensor<T>& b, DotCounter* counter = nullptr);

template <typename T>
double topk_cs(const Tensor<T>& a, const Tensor<T>& b, std::size_t k = kDefaultTopK,
               DotCounter* counter = nullptr);

}  // namespace csl
