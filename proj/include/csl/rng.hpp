#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace csl {

// Counter-based splittable generator.
//
// State is a 64-bit key and a 64-bit counter. Draw number c (0-based) of a
// stream with key K is
//
//     mix64(K + (c + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer:
//
//     z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//     z ^= z >> 27; z *= 0x94D049BB133111EB;
//     z ^= z >> 31;
//
// split(s) returns a fresh stream (counter 0) with key
// mix64(K ^ mix64(s + 0xD1B54A32D192ED03)); it does not advance the parent.
// A seed S maps to key mix64(S). Derived distributions:
//   uniform()        (u64 >> 11) * 2^-53, in [0, 1)
//   below(n)         rejection on u64 values < (2^64 mod n), then u64 mod n
//   normal()         Box-Muller cos branch from two draws u1 in (0,1], u2 in [0,1)
//   truncated_normal redraw normal() until |z| <= 2, then scale
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed)) {}

  static Rng from_key(std::uint64_t key) {
    Rng r;
    r.key_ = key;
    return r;
  }

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  Rng split(std::uint64_t stream) const {
    return from_key(mix64(key_ ^ mix64(stream + 0xD1B54A32D192ED03ULL)));
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool coin() { return (next_u64() >> 63) != 0; }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double truncated_normal(double stddev) {
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= 2.0) return stddev * z;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::swap(idx[i], idx[i + below(n - i)]);
    }
    idx.resize(std::min(k, n));
    return idx;
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace csl
