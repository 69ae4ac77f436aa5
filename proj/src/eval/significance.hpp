#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cellclip::eval {

inline constexpr std::size_t kDeskPermutations = 10000;
inline constexpr std::size_t kFullScalePermutations = 100000;
inline constexpr double kDefaultAlpha = 0.05;

// Add-one permutation p-value of the observed AP: (1 + #{AP_perm >= AP_obs}) / (n + 1).
// Each permutation shuffles the relevance flags with its own stream keyed by
// (seed, query_key, permutation index), so the result does not depend on how
// queries are distributed over threads.
double permutation_pvalue(const std::vector<bool>& relevance, std::size_t n_perms,
                          std::uint64_t seed, std::uint64_t query_key);

// Benjamini-Hochberg step-up. Flags are returned in input order.
std::vector<bool> benjamini_hochberg(std::span<const double> pvalues, double alpha = kDefaultAlpha);

}  // namespace cellclip::eval
