#include "eval/significance.hpp"

#include <algorithm>
#include <numeric>

#include "eval/retrieval.hpp"
#include "util/error.hpp"
#include "util/rng.hpp"

namespace cellclip::eval {

double permutation_pvalue(const std::vector<bool>& relevance, std::size_t n_perms,
                          std::uint64_t seed, std::uint64_t query_key) {
  if (n_perms == 0) fail(Errc::invalid_argument, "permutation count must be positive");
  const double observed = average_precision(relevance);
  std::vector<char> flags(relevance.begin(), relevance.end());
  std::size_t at_least = 0;
  std::vector<char> perm;
  for (std::size_t p = 0; p < n_perms; ++p) {
    perm = flags;
    auto rng = Rng::keyed({seed, query_key, p});
    rng.shuffle(perm.begin(), perm.end());
    std::size_t found = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      if (!perm[i]) continue;
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(i + 1);
    }
    if (sum / static_cast<double>(found) >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(n_perms + 1);
}

std::vector<bool> benjamini_hochberg(std::span<const double> pvalues, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(Errc::invalid_argument, "alpha must lie in (0, 1], got {}", alpha);
  const std::size_t m = pvalues.size();
  for (double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) fail(Errc::invalid_argument, "p-value {} outside [0, 1]", p);
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t r = 0; r < m; ++r) {
    if (pvalues[order[r]] <= alpha * static_cast<double>(r + 1) / static_cast<double>(m)) cutoff = r + 1;
  }
  std::vector<bool> reject(m, false);
  for (std::size_t r = 0; r < cutoff; ++r) reject[order[r]] = true;
  return reject;
}

}  // namespace cellclip::eval
