#include "csl/checks/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "csl/params.hpp"
#include "csl/similarity.hpp"

namespace csl::checks {

double brute_topk_cs(const Tensor<float>& a, const Tensor<float>& b, std::size_t k) {
  const std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  std::vector<double> maxima;
  for (std::size_t i = 0; i < n; ++i) {
    double best = -INFINITY;
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += static_cast<double>(a[i * d + c]) * b[j * d + c];
      best = std::max(best, dot);
    }
    maxima.push_back(best);
  }
  const std::size_t take = std::min(k, n);
  std::vector<bool> used(n, false);
  double total = 0.0;
  for (std::size_t t = 0; t < take; ++t) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i] && (pick == n || maxima[i] > maxima[pick])) pick = i;
    }
    used[pick] = true;
    total += maxima[pick];
  }
  return total / static_cast<double>(take);
}

double brute_average_precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant) {
  double total = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (!relevant.count(ranking[r])) continue;
    std::size_t hits = 0;
    for (std::size_t q = 0; q <= r; ++q) hits += relevant.count(ranking[q]);
    total += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return total / static_cast<double>(relevant.size());
}

Tensor<float> random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  Tensor<float> t({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    std::vector<double> row(d);
    for (auto& v : row) {
      v = rng.normal();
      sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(std::max(sq, 1e-30));
    for (std::size_t c = 0; c < d; ++c) t[i * d + c] = static_cast<float>(row[c] * inv);
  }
  return t;
}

SuiteResult topk_oracle_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  Rng rng(seed);
  SuiteResult res{"topk_cs vs brute force", trials, 0.0, true};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.below(10), m = 1 + rng.below(10), d = 1 + rng.below(16);
    const Tensor<float> a = random_unit_rows(n, d, rng), b = random_unit_rows(m, d, rng);
    const double err = std::abs(topk_cs(a, b, kDefaultTopK) - brute_topk_cs(a, b, kDefaultTopK));
    res.worst = std::max(res.worst, err);
  }
  res.passed = res.worst <= tolerance;
  return res;
}

SuiteResult reduction_identity_suite(std::uint64_t seed, std::size_t trials) {
  Rng rng(seed);
  SuiteResult res{"topk_cs(k>=n) == chamfer, bitwise", trials, 0.0, true};
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.below(10), m = 1 + rng.below(10), d = 1 + rng.below(16);
    const Tensor<float> a = random_unit_rows(n, d, rng), b = random_unit_rows(m, d, rng);
    const std::size_t k = n + rng.below(5);
    const double x = topk_cs(a, b, k), y = chamfer(a, b);
    if (std::memcmp(&x, &y, sizeof(double)) != 0) {
      ++mismatches;
      res.worst = std::max(res.worst, std::abs(x - y));
    }
  }
  res.passed = mismatches == 0;
  return res;
}

SuiteResult map_oracle_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  Rng rng(seed);
  SuiteResult res{"average precision vs definition", trials + 1, 0.0, true};
  // Hand-checked case: relevant at ranks 1 and 3 of two relevant items.
  {
    RankedList ranked{{"a", 0.9}, {"b", 0.8}, {"c", 0.7}};
    res.worst = std::abs(average_precision(ranked, {"a", "c"}) - 5.0 / 6.0);
  }
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i));
    rng.shuffle(ids);
    std::set<std::string> relevant;
    const std::size_t r = 1 + rng.below(n);
    for (std::size_t i = 0; i < r; ++i) relevant.insert("v" + std::to_string(rng.below(n)));
    // Some relevant ids are never retrieved, which must cost recall.
    if (rng.coin()) relevant.insert("missing" + std::to_string(t));
    RankedList ranked;
    for (std::size_t i = 0; i < n; ++i) ranked.push_back({ids[i], static_cast<double>(n - i)});
    const double err = std::abs(average_precision(ranked, relevant) - brute_average_precision(ids, relevant));
    res.worst = std::max(res.worst, err);
  }
  res.passed = res.worst <= tolerance;
  return res;
}

SuiteResult store_roundtrip_suite(std::uint64_t seed, std::size_t trials) {
  Rng rng(seed);
  SuiteResult res{"feature store roundtrip and truncation", trials, 0.0, true};
  for (std::size_t t = 0; t < trials && res.passed; ++t) {
    CorpusIndex index;
    const std::size_t d = 1 + rng.below(16), videos = 1 + rng.below(6);
    for (std::size_t v = 0; v < videos; ++v) {
      index.add("vid" + std::to_string(rng.below(1000000)) + "_" + std::to_string(v),
                random_unit_rows(1 + rng.below(5), d, rng));
    }
    const auto bytes = encode_store(index);
    if (!(decode_store(bytes) == index) || encode_store(decode_store(bytes)) != bytes) res.passed = false;
    const std::size_t cut = rng.below(bytes.size());
    try {
      decode_store(std::vector<char>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut)));
      res.passed = false;
    } catch (const FormatError&) {
    }
  }
  return res;
}

SuiteResult checkpoint_roundtrip_suite(std::uint64_t seed, std::size_t trials) {
  Rng rng(seed);
  SuiteResult res{"checkpoint roundtrip and truncation", trials, 0.0, true};
  for (std::size_t t = 0; t < trials && res.passed; ++t) {
    ParamSet<float> ps;
    const std::size_t count = 1 + rng.below(5);
    for (std::size_t i = 0; i < count; ++i) {
      Shape s;
      for (std::size_t r = rng.below(4); r > 0; --r) s.push_back(1 + rng.below(4));
      ps.add("p" + std::to_string(i), trunc_normal<float>(s, 1.0, rng));
    }
    const auto bytes = encode_checkpoint(ps);
    if (!(decode_checkpoint(bytes) == ps)) res.passed = false;
    const std::size_t cut = rng.below(bytes.size());
    try {
      decode_checkpoint(std::vector<char>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut)));
      res.passed = false;
    } catch (const FormatError&) {
    }
  }
  return res;
}

}  // namespace csl::checks
