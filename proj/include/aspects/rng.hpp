// Deterministic random source. All sampling goes through this wrapper so that
// runs are reproducible bit-for-bit from a single seed; substreams are derived
// with fork() to keep the seed lineage explicit.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "aspects/common.hpp"

namespace aspects {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1), 53-bit resolution. Hand-rolled so the stream does not
  // depend on the standard library's distribution implementation.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n) without modulo bias.
  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= bound);
    return static_cast<std::size_t>(x % n);
  }

  bool coin() { return (next_u64() & 1u) != 0; }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

  // Derive an independent substream; same (seed, stream) -> same substream.
  Rng fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream)));
  }
  Rng fork(std::string_view name) const { return fork(fnv1a(name)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace aspects
