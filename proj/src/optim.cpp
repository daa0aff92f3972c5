#include "csl/optim.hpp"

#include <cmath>
#include <numbers>

namespace csl {

template <typename T>
void AdamW<T>::step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads, double lr) {
  if (lr < 0.0 || !std::isfinite(lr)) throw ContractError("adamw: learning rate must be finite and >= 0");
  if (grads.size() != params.size()) {
    throw ShapeError("adamw: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.at(i).shape()) {
      throw ShapeError("adamw: gradient " + shape_str(grads[i].shape()) + " does not match '" +
                       params.name(i) + "' " + shape_str(params.at(i).shape()));
    }
    if (!grads[i].all_finite()) {
      throw TrainingError("adamw: non-finite gradient for '" + params.name(i) + "'", params.name(i));
    }
  }
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.push_back(Tensor<T>::zeros(params.at(i).shape()));
      v_.push_back(Tensor<T>::zeros(params.at(i).shape()));
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("adamw: parameter count changed between steps");
  }

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const T decay = static_cast<T>(lr * config_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params.at(i);
    Tensor<T>& m = m_[i];
    Tensor<T>& v = v_[i];
    const Tensor<T>& g = grads[i];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      p[k] -= decay * p[k];
      m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * g[k]);
      v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * g[k] * g[k]);
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double base_lr) {
  if (total_steps == 0) throw ContractError("cosine_lr: total_steps must be positive");
  if (step > total_steps) {
    throw ContractError("cosine_lr: step " + std::to_string(step) + " exceeds total " +
                        std::to_string(total_steps));
  }
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

double scaled_lr(double base_lr, std::size_t batch_size) {
  return base_lr * static_cast<double>(batch_size) / 256.0;
}

}  // namespace csl
