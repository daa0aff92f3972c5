#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csl/autograd.hpp"
#include "csl/rng.hpp"

// Central finite-difference oracle for tape gradients (64-bit only).
namespace csl::checks {

using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;  // worst over inputs
  std::size_t evaluations = 0;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps exact zeros comparable.
double relative_error(double analytic, double numeric, double floor = 1e-10);

// Norm-wise relative error ||a - n|| / max(||a||, ||n||, floor) per input
// tensor, with n from central differences of step h over every element.
GradCheckResult check_gradients(const ScalarFn& f, const std::vector<Tensor<double>>& inputs,
                                double h = 1e-5);

// Pointwise relative error at selected (input, element) coordinates.
struct Coordinate {
  std::size_t input;
  std::size_t element;
};
GradCheckResult check_coordinates(const ScalarFn& f, const std::vector<Tensor<double>>& inputs,
                                  const std::vector<Coordinate>& coords, double h = 1e-5);

// Result of a named batch of randomized checks.
struct SuiteResult {
  std::string name;
  std::size_t trials = 0;
  double worst = 0.0;
  bool passed = false;
};

// 100-style randomized checks of every differentiable tensor op.
std::vector<SuiteResult> op_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance);

}  // namespace csl::checks
