#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tadner {

// Portable random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; every derived draw below is computed here rather
// than through <random> distributions, which are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::size_t uniform_index(std::size_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent seed for a sub-stream (e.g. one per episode).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Stable 64-bit FNV-1a hash, used to derive per-label seeds.
std::uint64_t fnv1a(std::string_view text);

}  // namespace tadner
