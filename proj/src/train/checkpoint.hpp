#pragma once

// Checkpoint file layout:
//
//   cellclip-checkpoint 1
//   config_hash <16 hex digits>
//   state.<key> <value>             trainer counters; doubles as hex floats
//   model.<key> <value>
//   train.<key> <value>
//   vocab <count>
//   <one token per line>
//   tensor <name> <rows> <cols>     one line per tensor, in file order
//   end
//
// followed immediately by the tensor data as little-endian f32 in the same
// order. Tensors are the model parameters, then adam.m/<name> and
// adam.v/<name> for each parameter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "train/config.hpp"
#include "train/model.hpp"
#include "train/optimizer.hpp"

namespace cellclip::train {

struct TrainerState {
  std::size_t step = 0;  // optimizer steps taken
  double epoch_loss_sum = 0.0;  // over the batches of the current epoch so far
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch completed
};

struct NamedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::vector<std::string> vocab;  // full token list, specials first
  TrainerState state;
  std::vector<NamedTensor> tensors;
  std::uint64_t config_hash = 0;
};

// Hash of the model and train entries plus the vocabulary.
std::uint64_t config_hash(const ModelConfig& model, const TrainConfig& train, const text::Vocabulary& vocab);

Checkpoint make_checkpoint(const CellClipModel<float>& model, const TrainConfig& train, const AdamState& adam,
                           const TrainerState& state);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& source = "checkpoint");

// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the model (and optionally the optimizer moments) from a
// checkpoint. Throws Errc::format if names or shapes disagree with the
// parameter layout implied by the stored config.
CellClipModel<float> restore_model(const Checkpoint& ckpt);
AdamState restore_optimizer(const Checkpoint& ckpt, const CellClipModel<float>& model);

}  // namespace cellclip::train
