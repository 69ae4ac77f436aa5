#pragma once

// Similarity tables, rankings and the rank-based metrics built on them.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cellclip::eval {

// Row-major dense vectors with one id per row.
struct EmbeddingTable {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t size() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span(values).subspan(i * dim, dim);
  }
  void push_back(std::string id, std::span<const double> v);
};

double cosine(std::span<const double> a, std::span<const double> b);

struct SimilarityMatrix {
  std::vector<std::string> row_ids;  // queries
  std::vector<std::string> col_ids;  // candidates
  std::vector<double> s;             // rows×cols, entries in [-1, 1]

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return col_ids.size(); }
  double at(std::size_t i, std::size_t j) const { return s[i * cols() + j]; }

  // Throws unless sizes agree and every entry is finite and in [-1, 1]
  // (with 1e-9 rounding slack).
  void validate() const;
};

// Cosine similarity of every row of q against every row of c. Throws on a
// zero-norm row or mismatched widths.
SimilarityMatrix cosine_similarity(const EmbeddingTable& q, const EmbeddingTable& c);

// Candidates in descending similarity; ties go to the smaller candidate id.
struct RankedList {
  std::vector<std::string> ids;
  std::vector<bool> relevant;

  std::size_t size() const { return ids.size(); }
  std::size_t relevant_count() const;
};

RankedList rank_candidates(std::span<const std::string> ids, std::span<const double> similarity,
                           const std::vector<bool>& relevant);

// 1-based rank of the column whose id equals row i's id.
std::size_t rank_of_match(const SimilarityMatrix& s, std::size_t row);

// Fraction of rows whose matching column ranks within the top k. S must be
// square and each row id must appear exactly once among the column ids.
double recall_at_k(const SimilarityMatrix& s, std::size_t k);

// Sum over relevant positions of precision at that position, divided by the
// number of relevant items. Throws when nothing is relevant.
double average_precision(const std::vector<bool>& relevance);
inline double average_precision(const RankedList& r) { return average_precision(r.relevant); }

}  // namespace cellclip::eval
