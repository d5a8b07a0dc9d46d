#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace lrdet {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent sub-seed for a named purpose:
//   derive_seed(seed, purpose) = mix64(seed ^ mix64(fnv1a64(purpose)))
// Every stochastic stage takes its stream from the run seed through this rule.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

// Portable random stream. Distributions are implemented here instead of using
// <random> distributions, whose output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  float uniform();
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  float normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace lrdet
