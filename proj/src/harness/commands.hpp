#pragma once

// One function per CLI subcommand. Each writes its outputs and a
// manifest_<command>.json into ctx.out.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "harness/dataset.hpp"
#include "harness/run_config.hpp"

namespace cellclip::harness {

struct CommandContext {
  RunConfig config = RunConfig::desk();
  std::vector<std::string> argv;
  std::filesystem::path out = ".";
  std::function<void(const std::string&)> log;
};

inline constexpr const char* kEmbeddingsFile = "embeddings.tsv";
inline constexpr const char* kCorrectedFile = "embeddings_corrected.tsv";
inline constexpr const char* kTrainLogFile = "train_log.tsv";
inline constexpr const char* kBestCheckpoint = "best.ckpt";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";

void run_synth(const CommandContext& ctx);
ValidationReport run_validate(const CommandContext& ctx, const std::filesystem::path& data);
// Trains on the "train" split, selects on "val". With a resume checkpoint
// the run continues and appends to the existing log.
void run_train(const CommandContext& ctx, const std::filesystem::path& data,
               const std::filesystem::path& resume = {});
void run_embed(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& checkpoint);
void run_eval_retrieval(const CommandContext& ctx, const std::filesystem::path& data,
                        const std::filesystem::path& embeddings, const std::string& subset);
void run_eval_map(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& embeddings);
void run_eval_genegene(const CommandContext& ctx, const std::filesystem::path& data,
                       const std::filesystem::path& embeddings, const std::vector<double>& tails);
void run_batch_correct(const CommandContext& ctx, const std::filesystem::path& embeddings);
// Gene-gene recall swept over tail fractions 0.02..0.20.
void run_report(const CommandContext& ctx, const std::filesystem::path& data, const std::filesystem::path& embeddings);

}  // namespace cellclip::harness
