#pragma once

// Replicate detection, sister matching and gene-gene relationship recall.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "eval/batch_correct.hpp"
#include "eval/significance.hpp"

namespace cellclip::eval {

struct MapOptions {
  std::size_t permutations = kDeskPermutations;
  double alpha = kDefaultAlpha;
  std::uint64_t seed = 0;
};

struct QueryAp {
  std::string id;
  std::string batch;  // empty for aggregated queries
  double ap = 0.0;
  double pvalue = 1.0;
  bool significant = false;
  std::size_t relevant = 0;
  std::size_t candidates = 0;
};

struct MapReport {
  std::vector<QueryAp> queries;
  // Per-perturbation mean AP, then the mean over perturbations.
  std::map<std::string, double> per_perturbation;
  double map = 0.0;
  // Same, restricted to BH-significant queries; perturbations with no
  // significant query do not enter the filtered mean.
  double map_filtered = 0.0;
  double retained_fraction = 0.0;  // significant queries / scored queries
  // Per-class means of the per-perturbation values.
  std::map<std::string, double> per_class;
  std::map<std::string, double> per_class_filtered;
  std::vector<std::string> skipped;  // ids that could not be scored
};

// Scores every treated (id, batch) embedding: same-id embeddings from other
// batches are relevant, every control embedding is an irrelevant candidate.
// Perturbations observed in a single batch are skipped and listed.
// classes maps id -> class label for the per-class summary (may be empty).
MapReport replicate_detection_map(const ScreenEmbeddings& screen, const MapOptions& options,
                                  const std::map<std::string, std::string>& classes = {});

enum class SisterMode { within, across };

// Treated embeddings averaged across batches; for each query, candidates are
// the other treated perturbations of the same class (within) or of a
// different class (across), relevant when they share an annotated gene.
// Queries without any relevant candidate are skipped. Throws if a treated
// perturbation has no annotation.
MapReport sister_matching_map(const ScreenEmbeddings& screen,
                              const std::map<std::string, std::set<std::string>>& genes,
                              const std::map<std::string, std::string>& classes, SisterMode mode,
                              const MapOptions& options);

enum class Aggregate { mean, median };

// One vector per distinct id (sorted by id); controls are dropped when
// treated_only is set.
EmbeddingTable aggregate_by_id(const ScreenEmbeddings& screen, Aggregate how, bool treated_only);

struct RelationRecall {
  double recall = 0.0;
  std::size_t known = 0;      // relations among the scored ids
  std::size_t recovered = 0;  // known pairs inside either tail
  std::size_t pairs = 0;      // all unordered pairs
  std::size_t tail = 0;       // pairs per tail
};

using IdPair = std::pair<std::string, std::string>;

// All unordered pairs ranked by cosine; each tail holds floor(pairs * f / 2)
// pairs. Relations naming ids outside the table are ignored; throws if none
// remain or f is outside (0, 0.5].
RelationRecall gene_gene_recall(const EmbeddingTable& table, const std::vector<IdPair>& relations,
                                double tail_fraction);

// Treated rows get their perturbation ids permuted; the shuffled-label
// baseline for replicate detection.
ScreenEmbeddings shuffle_labels(const ScreenEmbeddings& screen, std::uint64_t seed);

}  // namespace cellclip::eval
