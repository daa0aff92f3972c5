#pragma once

#include <set>
#include <string>
#include <vector>

#include "csl/checks/gradcheck.hpp"
#include "csl/retrieval.hpp"

// Direct-definition reimplementations used to cross-check the engine, plus the
// randomized suites built on them.
namespace csl::checks {

// Every a_i . b_j in double, per-row maxima, then the k largest picked by
// repeated selection and averaged. No sorting shared with the engine.
double brute_topk_cs(const Tensor<float>& a, const Tensor<float>& b, std::size_t k);

// AP by recounting hits in every prefix: for each relevant id at rank r,
// precision@r = |relevant in ranks 1..r| / r.
double brute_average_precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant);

// n x d matrix of random unit rows.
Tensor<float> random_unit_rows(std::size_t n, std::size_t d, Rng& rng);

SuiteResult topk_oracle_suite(std::uint64_t seed, std::size_t trials, double tolerance);
// topk_cs(A, B, k >= n) == chamfer(A, B) bit for bit.
SuiteResult reduction_identity_suite(std::uint64_t seed, std::size_t trials);
SuiteResult map_oracle_suite(std::uint64_t seed, std::size_t trials, double tolerance);
// Encode/decode of random stores and checkpoints is bit exact, and every
// truncation of an encoded store is rejected.
SuiteResult store_roundtrip_suite(std::uint64_t seed, std::size_t trials);
SuiteResult checkpoint_roundtrip_suite(std::uint64_t seed, std::size_t trials);

}  // namespace csl::checks
