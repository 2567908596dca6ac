#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace refacer {

/// xoshiro256** seeded through SplitMix64. All derived quantities (uniform
/// reals, normals, shuffles) are computed here rather than through <random>
/// distributions, whose output is implementation-defined, so cohorts and
/// weight initialisations are identical across standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  /// Independent stream for item `index` under `master_seed`.
  static Rng for_stream(std::uint64_t master_seed, std::uint64_t index) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n); n > 0. Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; caches the second variate.
  double normal() noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace refacer
