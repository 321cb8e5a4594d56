#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace volformer {

// Seeded generator with fully specified output on every platform.
//
// The engine is std::mt19937_64 seeded through std::seed_seq{seed, stream};
// both are pinned by the C++ standard. The standard distributions are not, so
// every derived draw is computed here:
//   uniform()  = (x >> 11) * 2^-53, in [0, 1)
//   below(n)   = rejection sampling on x mod n, discarding the biased tail
//   normal()   = Box-Muller on two uniforms, cosine branch only
//   shuffle()  = Fisher-Yates from the back, swapping i with below(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Standard normal resampled until it falls inside [-bound, bound].
  double truncated_normal(double bound = 2.0);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace volformer
