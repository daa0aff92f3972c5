#pragma once

#include "csl/checks/gradcheck.hpp"
#include "csl/encoder.hpp"

namespace csl::checks {

// Random clip with values in [0,1].
Frames random_clip(const ModelConfig& cfg, Rng& rng);

// Gradient of a fixed random projection of the embeddings of two random clips,
// at `coords` random parameter elements, against central differences (64-bit).
// Worst pointwise relative error is reported.
SuiteResult encoder_gradient_check(std::uint64_t seed, std::size_t coords, double tolerance,
                                   const ModelConfig& cfg = ModelConfig::toy());

}  // namespace csl::checks
