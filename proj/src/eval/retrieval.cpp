#include "eval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "util/error.hpp"
#include "util/parallel.hpp"

namespace cellclip::eval {

void EmbeddingTable::push_back(std::string id, std::span<const double> v) {
  if (ids.empty() && dim == 0) dim = v.size();
  if (v.size() != dim) fail(Errc::shape, "embedding '{}' has width {}, table width is {}", id, v.size(), dim);
  ids.push_back(std::move(id));
  values.insert(values.end(), v.begin(), v.end());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(Errc::shape, "cosine of vectors of width {} and {}", a.size(), b.size());
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) fail(Errc::invalid_argument, "cosine of a zero-norm vector");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

void SimilarityMatrix::validate() const {
  if (s.size() != rows() * cols()) fail(Errc::shape, "similarity matrix holds {} values for {}x{}", s.size(), rows(), cols());
  for (double v : s) {
    if (!std::isfinite(v) || v < -1.0 - 1e-9 || v > 1.0 + 1e-9) {
      fail(Errc::invalid_argument, "similarity {} outside [-1, 1]", v);
    }
  }
}

SimilarityMatrix cosine_similarity(const EmbeddingTable& q, const EmbeddingTable& c) {
  if (q.dim != c.dim) fail(Errc::shape, "query width {} differs from candidate width {}", q.dim, c.dim);
  SimilarityMatrix m{q.ids, c.ids, std::vector<double>(q.size() * c.size())};
  parallel_for(q.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < c.size(); ++j) m.s[i * c.size() + j] = cosine(q.row(i), c.row(j));
  });
  return m;
}

std::size_t RankedList::relevant_count() const {
  return static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
}

RankedList rank_candidates(std::span<const std::string> ids, std::span<const double> similarity,
                           const std::vector<bool>& relevant) {
  if (ids.size() != similarity.size() || ids.size() != relevant.size()) {
    fail(Errc::shape, "ranking needs equal-length ids, similarities and relevance flags");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (similarity[a] != similarity[b]) return similarity[a] > similarity[b];
    if (ids[a] != ids[b]) return ids[a] < ids[b];
    return a < b;
  });
  RankedList r;
  for (std::size_t i : order) {
    r.ids.push_back(ids[i]);
    r.relevant.push_back(relevant[i]);
  }
  return r;
}

std::size_t rank_of_match(const SimilarityMatrix& s, std::size_t row) {
  const auto& id = s.row_ids.at(row);
  std::size_t match = s.cols();
  for (std::size_t j = 0; j < s.cols(); ++j) {
    if (s.col_ids[j] == id) {
      if (match != s.cols()) fail(Errc::invalid_argument, "candidate id '{}' appears twice", id);
      match = j;
    }
  }
  if (match == s.cols()) fail(Errc::invalid_argument, "query '{}' has no matching candidate", id);
  const double target = s.at(row, match);
  std::size_t rank = 1;
  for (std::size_t j = 0; j < s.cols(); ++j) {
    if (j == match) continue;
    const double v = s.at(row, j);
    if (v > target || (v == target && s.col_ids[j] < id)) ++rank;
  }
  return rank;
}

double recall_at_k(const SimilarityMatrix& s, std::size_t k) {
  if (s.rows() != s.cols() || s.rows() == 0) fail(Errc::shape, "recall needs a non-empty square similarity matrix");
  if (k == 0 || k > s.cols()) fail(Errc::invalid_argument, "recall k must lie in [1, {}], got {}", s.cols(), k);
  std::vector<std::size_t> ranks(s.rows());
  parallel_for(s.rows(), [&](std::size_t i) { ranks[i] = rank_of_match(s, i); });
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

double average_precision(const std::vector<bool>& relevance) {
  // Extended accumulation with a single final rounding, so short hand cases
  // such as [1,0,1] come out as the nearest double to the exact fraction.
  std::size_t found = 0;
  long double sum = 0.0L;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (!relevance[i]) continue;
    ++found;
    sum += static_cast<long double>(found) / static_cast<long double>(i + 1);
  }
  if (found == 0) fail(Errc::invalid_argument, "average precision needs at least one relevant candidate");
  return static_cast<double>(sum / static_cast<long double>(found));
}

}  // namespace cellclip::eval
