#include "semshift/rng.hpp"

#include <cmath>
#include <deque>

#include "semshift/common.hpp"

namespace semshift {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t CounterRng::mix(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : base_(mix(mix(seed) ^ (stream * 0xD1342543DE82EF95ull))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix(base_ + counter * kGolden);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) throw Error("uniform_int: n must be positive");
  return static_cast<std::int64_t>(uniform() * static_cast<double>(n)) % n;
}

double Rng::normal() {
  // Box-Muller; u1 shifted into (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::int64_t Rng::poisson(double lambda) {
  if (lambda < 0.0) throw Error("poisson: negative rate");
  // Knuth inversion on chunks; Poisson(a + b) = Poisson(a) + Poisson(b).
  std::int64_t total = 0;
  while (lambda > 0.0) {
    double chunk = lambda > 30.0 ? 30.0 : lambda;
    lambda -= chunk;
    double limit = std::exp(-chunk);
    double prod = 1.0;
    std::int64_t k = -1;
    do {
      ++k;
      prod *= 1.0 - uniform();  // (0, 1]
    } while (prod > limit);
    total += k;
  }
  return total;
}

AliasTable::AliasTable(std::span<const double> weights) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw Error("alias table: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw Error("alias table: invalid weight");
    total += w;
  }
  if (total <= 0.0) throw Error("alias table: weights sum to zero");

  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::deque<int> small, large;
  for (int i = 0; i < n; ++i) {
    scaled[i] = weights[i] * n / total;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    int s = small.front();
    small.pop_front();
    int l = large.front();
    large.pop_front();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (int i : small) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (int i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

int AliasTable::sample(double u) const {
  const int n = size();
  double scaled = u * n;
  int idx = static_cast<int>(scaled);
  if (idx >= n) idx = n - 1;
  double coin = scaled - idx;
  return coin < prob_[idx] ? idx : alias_[idx];
}

}  // namespace semshift
