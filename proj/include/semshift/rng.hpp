#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semshift/common.hpp"

namespace semshift {

// Stateless counter-based generator: the nth draw of a (seed, stream) pair is
// a pure function of (seed, stream, n). Parallel workers share a seed and use
// distinct streams, so no draw depends on scheduling.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t bits(std::uint64_t counter) const;
  // Uniform in [0, 1), 53-bit resolution.
  double uniform(std::uint64_t counter) const;

  static std::uint64_t mix(std::uint64_t x);

private:
  std::uint64_t base_;
};

// Sequential convenience wrapper with common distributions.
class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : rng_(seed, stream) {}

  std::uint64_t bits() { return rng_.bits(n_++); }
  double uniform() { return rng_.uniform(n_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), n > 0.
  std::int64_t uniform_int(std::int64_t n);
  double normal();
  std::int64_t poisson(double lambda);

private:
  CounterRng rng_;
  std::uint64_t n_ = 0;
};

// Walker alias table for O(1) draws from a fixed discrete distribution.
// Construction is deterministic in the order of the input weights.
class AliasTable {
public:
  explicit AliasTable(std::span<const double> weights);

  // u in [0, 1); the index and the coin flip are both carved out of u.
  int sample(double u) const;
  int size() const { return static_cast<int>(prob_.size()); }

private:
  std::vector<double> prob_;
  std::vector<int> alias_;
};

}  // namespace semshift
