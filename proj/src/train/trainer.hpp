#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eval/retrieval.hpp"
#include "train/checkpoint.hpp"

namespace cellclip::train {

// Image and prompt latents of aligned examples, rows in example order.
struct PairEmbeddings {
  eval::EmbeddingTable image;
  eval::EmbeddingTable text;
};

PairEmbeddings embed_examples(const CellClipModel<float>& model, const std::vector<Example>& examples);

struct RecallReport {
  std::size_t k = 0;
  double image_to_text = 0.0;
  double text_to_image = 0.0;
};

// Recall@k in both directions for every k <= examples.size().
std::vector<RecallReport> cross_modal_recall(const PairEmbeddings& e, const std::vector<std::size_t>& ks);

// Mean of Recall@1 in both directions; used for model selection.
double selection_metric(const std::vector<RecallReport>& r);

struct RunOutputs {
  // Empty paths disable the corresponding output.
  std::filesystem::path log_tsv;
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  std::function<void(const std::string&)> progress;
};

class Trainer {
 public:
  // Throws on an empty training set or when it holds fewer examples than
  // one batch.
  Trainer(const ModelConfig& model, const TrainConfig& train, text::Vocabulary vocab, std::vector<Example> train_set,
          std::vector<Example> val_set);
  // Continues a run from a checkpoint written by this class with the same
  // datasets.
  Trainer(const Checkpoint& ckpt, std::vector<Example> train_set, std::vector<Example> val_set);

  std::size_t batches_per_epoch() const { return train_set_.size() / train_.batch_size; }
  std::size_t total_steps() const { return batches_per_epoch() * train_.epochs; }
  std::size_t step_count() const { return state_.step; }
  bool done() const { return state_.step >= total_steps(); }

  // Example indices of one epoch's batch order (drop-last).
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;

  // One optimizer step. Returns the batch loss before the update. At the end
  // of an epoch it validates, logs and updates the best checkpoint.
  double step(const RunOutputs& out = {});
  // Steps until done, then writes the final checkpoint.
  void run(const RunOutputs& out = {});

  Checkpoint checkpoint() const;
  const CellClipModel<float>& model() const { return model_; }
  const TrainerState& state() const { return state_; }
  const TrainConfig& train_config() const { return train_; }

 private:
  void end_of_epoch(std::size_t epoch, const RunOutputs& out);
  void log(const RunOutputs& out, const std::string& split, const std::string& metric, double value) const;

  TrainConfig train_;
  CellClipModel<float> model_;
  ad::ParamList<float> params_;
  AdamState adam_;
  TrainerState state_;
  std::vector<Example> train_set_;
  std::vector<Example> val_set_;
  std::vector<std::size_t> order_;  // current epoch's order
  std::size_t order_epoch_ = static_cast<std::size_t>(-1);
};

}  // namespace cellclip::train
