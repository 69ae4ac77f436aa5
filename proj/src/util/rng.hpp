#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <utility>

namespace cellclip {

// Counter-keyed SplitMix64 generator. Every stream is fully determined by its
// key, so results never depend on platform, thread count or call order of
// unrelated streams. Distributions are implemented here rather than taken from
// <random> because the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Stream keyed by an ordered tuple, e.g. {seed, epoch} or {seed, query, perm}.
  static Rng keyed(std::initializer_list<std::uint64_t> key);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Normal(0, std) resampled until |x| <= bound * std.
  double truncated_normal(double std, double bound = 2.0);

  template <class It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      using std::swap;
      swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace cellclip
