#pragma once

// Stage implementations shared by the CLI and the acceptance runner.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "harness/dataset.hpp"
#include "harness/run_config.hpp"
#include "train/model.hpp"

namespace cellclip::harness {

inline constexpr const char* kAllBatches = "all";

// One latent vector. Image rows exist per (perturbation, batch) and, for
// treated perturbations, pooled over all images (batch "all"); text rows
// exist for treated perturbations only.
struct EmbeddingRow {
  std::string modality;  // image | text
  std::string id;
  std::string batch;
  bool control = false;
  std::string cls;
  std::vector<double> v;
};

struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<EmbeddingRow> rows;

  // Per-batch image rows.
  eval::ScreenEmbeddings screen() const;
  // Rows of one modality with batch "all", in row order, optionally limited to ids.
  eval::EmbeddingTable pooled(const std::string& modality, const std::vector<std::string>* ids = nullptr) const;
};

std::string format_embeddings(const EmbeddingSet& e);
EmbeddingSet parse_embeddings(const Tsv& t);

EmbeddingSet embed_dataset(const train::CellClipModel<float>& model, const Dataset& d);

struct MetricRow {
  std::string task;
  std::string subset;
  std::string metric;
  double value = 0.0;
  std::size_t n = 0;
  std::optional<double> p_filtered_fraction;
};

std::string format_metrics(const std::vector<MetricRow>& rows, std::uint64_t config_hash);

// Recall@k in both directions over the treated perturbations of one split
// ("*" for all of them).
std::vector<MetricRow> retrieval_metrics(const EmbeddingSet& e, const Dataset& d, const std::string& subset,
                                         const std::vector<std::size_t>& ks);

// Replicate detection (observed and shuffled labels) and sister matching
// within and across CRISPR/ORF classes.
std::vector<MetricRow> map_metrics(const EmbeddingSet& e, const Dataset& d, const EvalConfig& config);

// Gene-gene recall per relation source and in total, one row per tail fraction.
std::vector<MetricRow> genegene_metrics(const EmbeddingSet& e, const Dataset& d, const std::vector<double>& tails,
                                        eval::Aggregate aggregate);

// Kernel-PCA batch correction of the per-batch image rows; pooled image rows
// are replaced by the mean of their corrected batch rows. Text rows are
// dropped since they do not live in the corrected space.
EmbeddingSet batch_correct_embeddings(const EmbeddingSet& e, const eval::KernelConfig& config);

std::vector<std::string> split_ids(const Dataset& d, const std::string& split);

}  // namespace cellclip::harness
