#pragma once

#include "csl/checks/gradcheck.hpp"
#include "csl/simlearn.hpp"

namespace csl::checks {

// Direct evaluation of the MS objective with plain exp/log, no shifting.
double naive_ms_loss(const Tensor<double>& sims, const std::vector<MinedPairs>& mined, const LossConfig& cfg,
                     std::size_t m);
// Direct hinge on 1 - cosine distances.
double naive_fcs_loss(const Tensor<double>& xa, const Tensor<double>& xp, const Tensor<double>& xpf, double gamma);

// Random similarity rows, roles and hyper-parameters; the analytic gradient
// (through custom_scalar) against central differences with the mined sets
// held fixed, and the value against naive_ms_loss.
SuiteResult ms_loss_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance);
// Random embeddings with every hinge residual at least 1e-3 from zero.
SuiteResult fcs_loss_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance);

}  // namespace csl::checks
