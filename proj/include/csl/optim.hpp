#pragma once

#include <cstdint>
#include <vector>

#include "csl/params.hpp"

namespace csl {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled weight decay Adam. Each update:
//   p <- p - lr * wd * p
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  // Throws TrainingError naming the parameter on a non-finite gradient, and
  // ShapeError if grads do not line up with params. Nothing is modified on error.
  void step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads, double lr);

  std::uint64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

// Cosine annealing: base_lr * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double base_lr);

// The batch-size rule applied before annealing: base_lr * batch_size / 256.
double scaled_lr(double base_lr, std::size_t batch_size);

}  // namespace csl
